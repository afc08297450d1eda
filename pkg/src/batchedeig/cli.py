"""Command-line harness: verify, bench, solve, gen.

Exit codes: 0 success, 1 verification/solve failure, 2 usage error,
3 I/O or file-format error.  BED_THREADS caps verify parallelism
(0 = auto).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .bench import (
    VERIFY_DEFLATION_TOL,
    BenchSpec,
    bench_csv,
    gen_spd,
    loglog_slope,
    run_bench,
    run_verify,
    verify_report,
)
from .core import (
    BadMagic,
    BatchedEigError,
    BatchedMatrix,
    DimMismatch,
    SolverConfig,
    TruncatedPayload,
    read_batch,
    write_batch,
)
from .oracle import Tolerances
from .solver import batched_eig

_EXIT_OK = 0
_EXIT_FAIL = 1
_EXIT_USAGE = 2
_EXIT_IO = 3


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="batchedeig",
        description="Batched symmetric eigendecomposition: verification, "
        "timing, and BED1 file solving.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dims", type=_int_list, default=(4, 8, 16),
                        help="comma-separated matrix dimensions")
    common.add_argument("--batches", type=_int_list, default=(1, 64),
                        help="comma-separated batch sizes")
    common.add_argument("--seed", type=int, default=0, help="base RNG seed")
    common.add_argument("--decades", type=float, default=3.0,
                        help="condition spread of generated spectra, in decades")

    p_verify = sub.add_parser("verify", parents=[common],
                              help="run the invariant suite over a grid")
    p_verify.add_argument("--count", type=int, default=256,
                          help="minimum matrices per cell")
    p_verify.add_argument("--tol", type=float, default=1e-8,
                          help="eigenvalue error gate, scaled by the spectral radius")
    p_verify.add_argument("--deflation-tol", type=float, default=VERIFY_DEFLATION_TOL,
                          help="deflation threshold used for verification solves")
    p_verify.add_argument("--csv", action="store_true",
                          help="emit per-cell CSV instead of the table")

    p_bench = sub.add_parser("bench", parents=[common],
                             help="time solves over a grid, CSV to stdout")
    p_bench.add_argument("--reps", type=int, default=5,
                         help="timed repetitions per cell (after one warm-up)")
    p_bench.add_argument("--mode", choices=("values", "full"), default="full",
                         help="eigenvalues only, or eigenvalues and eigenvectors")
    p_bench.add_argument("--tol", type=float, default=None,
                         help="override the solver deflation threshold")

    p_solve = sub.add_parser("solve", help="decompose a BED1 batch file")
    p_solve.add_argument("input", help="input BED1 file (symmetric batch)")
    p_solve.add_argument("--out", required=True,
                         help="output base path; writes <out>.values.bed "
                         "and <out>.vectors.bed")
    p_solve.add_argument("--no-vectors", action="store_true",
                         help="skip eigenvector computation and output")
    p_solve.add_argument("--tol", type=float, default=None,
                         help="override the solver deflation threshold")

    p_gen = sub.add_parser("gen", parents=[common],
                           help="generate a random SPD batch as a BED1 file")
    p_gen.add_argument("--out", required=True, help="output BED1 path")
    return parser


def _cmd_verify(args) -> int:
    spec = BenchSpec(dims=args.dims, batches=args.batches, seed=args.seed,
                     condition_decades=args.decades)
    cells = run_verify(
        spec,
        count=args.count,
        tol=Tolerances(eigenvalue=args.tol),
        deflation_tol=args.deflation_tol,
    )
    if args.csv:
        print("dim,batch,count,max_eig_err,max_recon,max_orth,max_single_dev,r_median,passed")
        for c in cells:
            r_med = float(np.median(c.r_values)) if c.r_values else 0.0
            print(
                f"{c.dim},{c.batch},{c.count},{c.max_scaled_eig_err:.3e},"
                f"{c.max_recon_resid:.3e},{c.max_orth_resid:.3e},"
                f"{c.max_single_dev:.3e},{r_med:.3f},{int(c.passed)}"
            )
    else:
        print(verify_report(cells), end="")
    return _EXIT_OK if all(c.passed for c in cells) else _EXIT_FAIL


def _cmd_bench(args) -> int:
    spec = BenchSpec(dims=args.dims, batches=args.batches, reps=args.reps,
                     seed=args.seed, mode=args.mode,
                     condition_decades=args.decades)
    rows = run_bench(spec, deflation_tol=args.tol)
    sys.stdout.write(bench_csv(rows))
    slope_dims = [r.dim for r in rows if r.batch == rows[0].batch]
    if len(set(slope_dims)) >= 3:
        cells = [r for r in rows if r.batch == rows[0].batch]
        slope = loglog_slope([r.dim for r in cells], [r.per_matrix_s for r in cells])
        print(f"# per-matrix log-log slope vs dim at batch {rows[0].batch}: {slope:.2f}",
              file=sys.stderr)
    return _EXIT_OK


def _cmd_solve(args) -> int:
    cfg = SolverConfig(compute_vectors=not args.no_vectors)
    if args.tol is not None:
        cfg = SolverConfig(compute_vectors=not args.no_vectors, deflation_tol=args.tol)
    batch = read_batch(args.input)
    result = batched_eig(batch, cfg)
    values = BatchedMatrix(result.eigenvalues[:, :, None])
    write_batch(values, f"{args.out}.values.bed")
    if not args.no_vectors:
        write_batch(BatchedMatrix(result.eigenvectors), f"{args.out}.vectors.bed")
    diag = result.diagnostics
    print(
        f"solved batch={batch.batch} dim={batch.dim}: "
        f"double_steps={diag.double_steps} mean_reductions={diag.reductions:.3f} "
        f"rotations={diag.rotation_count}",
        file=sys.stderr,
    )
    return _EXIT_OK


def _cmd_gen(args) -> int:
    if len(args.dims) != 1 or len(args.batches) != 1:
        print("gen needs exactly one value in --dims and --batches", file=sys.stderr)
        return _EXIT_USAGE
    batch = gen_spd(args.batches[0], args.dims[0], args.seed, args.decades)
    write_batch(batch, args.out)
    print(f"wrote batch={batch.batch} dim={batch.dim} to {args.out}", file=sys.stderr)
    return _EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {
        "verify": _cmd_verify,
        "bench": _cmd_bench,
        "solve": _cmd_solve,
        "gen": _cmd_gen,
    }[args.command]
    try:
        return handler(args)
    except (OSError, BadMagic, TruncatedPayload, DimMismatch) as err:
        print(f"error: {err}", file=sys.stderr)
        return _EXIT_IO
    except BatchedEigError as err:
        # validation and convergence failures on otherwise readable input
        print(f"error: {err}", file=sys.stderr)
        return _EXIT_FAIL
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return _EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
