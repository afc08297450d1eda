"""Reproducible batch generation, verification sweeps, and the timing grid.

The verify path solves seeded SPD batches, checks every decomposition
invariant against the Jacobi oracle, and reports per-cell error maxima plus
the distribution of reduction counts.  The bench path times solves over a
(dim, batch) grid and emits one CSV row per cell; counters are deterministic
for a fixed spec, only wall times vary.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import BatchedSymmetric, NoConvergence, SolverConfig
from .oracle import Tolerances, compare, jacobi_eig
from .solver import batched_eig

__all__ = [
    "BenchSpec",
    "BenchRow",
    "VerifyCell",
    "VERIFY_DEFLATION_TOL",
    "gen_spd",
    "run_bench",
    "bench_csv",
    "run_verify",
    "verify_report",
    "loglog_slope",
]

# Deflation threshold used by verification runs.  The library default of
# 1e-5 matches the speed-oriented profile, whose eigenvalue error is
# bounded by that same threshold; verification instead demands errors near
# round-off, so it locks eigenvalues only once couplings are this small.
VERIFY_DEFLATION_TOL = 3e-12

_CSV_HEADER = "dim,batch,mode,median_wall_s,per_matrix_s,mean_r,mean_k,rotations,max_eig_err"


@dataclass(frozen=True)
class BenchSpec:
    """Grid parameters shared by the verify and bench commands."""

    dims: tuple[int, ...]
    batches: tuple[int, ...]
    reps: int = 5
    seed: int = 0
    mode: str = "full"
    condition_decades: float = 3.0

    def __post_init__(self):
        if not self.dims or min(self.dims) < 2:
            raise ValueError("dims must be a nonempty list of values >= 2")
        if not self.batches or min(self.batches) < 1:
            raise ValueError("batches must be a nonempty list of values >= 1")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.mode not in ("values", "full"):
            raise ValueError("mode must be 'values' or 'full'")
        if self.condition_decades < 0:
            raise ValueError("condition_decades must be nonnegative")


@dataclass
class BenchRow:
    """One timing cell.  max_eig_err stays None outside verify runs."""

    dim: int
    batch: int
    mode: str
    median_wall_s: float
    per_matrix_s: float
    mean_r: float
    mean_k: float
    rotations: int
    max_eig_err: float | None = None


@dataclass
class VerifyCell:
    """Aggregated verification results for one (dim, batch) cell."""

    dim: int
    batch: int
    count: int
    max_scaled_eig_err: float
    max_recon_resid: float
    max_orth_resid: float
    max_single_dev: float
    r_values: list[float] = field(default_factory=list)
    double_steps: list[int] = field(default_factory=list)
    rotation_counts: list[int] = field(default_factory=list)
    converged_steps: list[int] = field(default_factory=list)
    budget_double_steps: list[int] = field(default_factory=list)
    failures: list[tuple[int, int, int, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _cell_seed(seed: int, dim: int, batch: int, index: int) -> int:
    seq = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, dim, batch, index])
    return int(seq.generate_state(1, np.uint64)[0])


def gen_spd(batch: int, dim: int, seed: int, condition_decades: float = 3.0) -> BatchedSymmetric:
    """Seeded random SPD batch Q diag(lam) Q^T, bit-reproducible.

    Q is the product of ``dim`` random Householder reflectors; eigenvalues
    are log-uniform over ``condition_decades`` decades below a per-matrix
    scale drawn from [10^-0.5, 10^0.5].  Zero decades gives multiples of
    the identity.
    """
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((dim, batch, dim))
    exps = rng.uniform(0.0, condition_decades, (batch, dim))
    scale = 10.0 ** rng.uniform(-0.5, 0.5, batch)
    lam = scale[:, None] * 10.0 ** (-exps)

    q = np.broadcast_to(np.eye(dim), (batch, dim, dim)).copy()
    for k in range(dim):
        v = raw[k]
        v = v / np.sqrt((v * v).sum(axis=-1))[:, None]
        qv = q @ v[:, :, None]
        q -= 2.0 * qv * v[:, None, :]
    a = (q * lam[:, None, :]) @ q.transpose(0, 2, 1)
    a = (a + a.transpose(0, 2, 1)) / 2.0
    return BatchedSymmetric(a)


# --------------------------------------------------------------------------
# timing


def run_bench(spec: BenchSpec, deflation_tol: float | None = None) -> list[BenchRow]:
    """Time one solve per grid cell: median of reps, first round discarded.

    Generation happens before the clock starts; timing covers validation
    through eigen output only.  Only one measurement runs at a time, and
    repetitions interleave across cells round-robin so slow environment
    drift lands evenly on every cell instead of skewing whichever was
    measured last.  Solves run the fixed benchmark schedule (at most
    ``dim`` double steps, stopping rather than erroring on leftovers),
    which is the regime whose iteration count the complexity model
    describes; verification runs use the convergence-gated profile.
    """
    base_tol = SolverConfig().deflation_tol if deflation_tol is None else deflation_tol
    cells = []
    for dim in spec.dims:
        for batch in spec.batches:
            cfg = SolverConfig(
                compute_vectors=(spec.mode == "full"),
                deflation_tol=base_tol,
                max_double_steps=dim,
                strict_convergence=False,
            )
            a = gen_spd(batch, dim, _cell_seed(spec.seed, dim, batch, 0),
                        spec.condition_decades)
            cells.append((dim, batch, cfg, a, [], [None]))

    # blocks of consecutive reps per cell (first of each block discarded as
    # warm-up), with blocks rotating round-robin over the cells: each
    # timed rep runs cache-warm, while slow drift still lands evenly
    rounds = min(3, spec.reps)
    per_round = -(-spec.reps // rounds)
    for _ in range(rounds):
        for dim, batch, cfg, a, times, last in cells:
            for rep in range(per_round + 1):
                t0 = time.perf_counter()
                last[0] = batched_eig(a, cfg)
                elapsed = time.perf_counter() - t0
                if rep > 0:
                    times.append(elapsed)

    rows = []
    for dim, batch, cfg, a, times, last in cells:
        med = float(np.median(times))
        diag = last[0].diagnostics
        rows.append(
            BenchRow(
                dim=dim,
                batch=batch,
                mode=spec.mode,
                median_wall_s=med,
                per_matrix_s=med / batch,
                mean_r=diag.reductions,
                mean_k=float(diag.double_steps),
                rotations=diag.rotation_count,
            )
        )
    return rows


def bench_csv(rows: list[BenchRow]) -> str:
    lines = [_CSV_HEADER]
    for r in rows:
        err = "" if r.max_eig_err is None else f"{r.max_eig_err:.3e}"
        lines.append(
            f"{r.dim},{r.batch},{r.mode},{r.median_wall_s:.9e},"
            f"{r.per_matrix_s:.9e},{r.mean_r:.6f},{r.mean_k:.3f},{r.rotations},{err}"
        )
    return "\n".join(lines) + "\n"


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.log(np.asarray(xs, dtype=np.float64))
    ys = np.log(np.asarray(ys, dtype=np.float64))
    return float(np.polyfit(xs, ys, 1)[0])


# --------------------------------------------------------------------------
# verification


def _verify_cell(dim, batch, spec, count, tol, deflation_tol, single_cap, solve_fn):
    # Budget 4n double steps: the batch-wide gate advances at the pace of
    # the slowest matrix, so a tight deflation threshold on a large batch
    # can need more than the 2n a lone matrix takes.  Per-matrix
    # convergence steps are recorded separately in converged_steps.
    cfg = SolverConfig(deflation_tol=deflation_tol, compute_vectors=True,
                       max_double_steps=4 * dim)
    single_cfg = cfg
    # The iteration-budget statistic is measured at the solver's default
    # profile (the threshold the 2n-step behaviour is stated for); the
    # accuracy checks above run at the verification threshold.
    budget_cfg = SolverConfig(compute_vectors=False)
    cell = VerifyCell(dim=dim, batch=batch, count=0,
                      max_scaled_eig_err=0.0, max_recon_resid=0.0,
                      max_orth_resid=0.0, max_single_dev=0.0)
    solves = max(1, -(-count // batch))
    eye = np.eye(dim)
    for s in range(solves):
        a = gen_spd(batch, dim, _cell_seed(spec.seed, dim, batch, s),
                    spec.condition_decades)
        try:
            budget = solve_fn(a, budget_cfg)
            cell.budget_double_steps.append(budget.diagnostics.double_steps)
        except NoConvergence as err:
            for idx in err.batch_indices:
                cell.failures.append((dim, batch, s * batch + idx, "budget-no-convergence"))
        try:
            result = solve_fn(a, cfg)
        except NoConvergence as err:
            for idx in err.batch_indices:
                cell.failures.append((dim, batch, s * batch + idx, "no-convergence"))
            cell.count += batch
            continue
        ref_vals = np.empty((batch, dim))
        ref_vecs = np.empty((batch, dim, dim))
        for k in range(batch):
            ref_vals[k], ref_vecs[k] = jacobi_eig(a.data[k])
        reports = compare(result, ref_vals, ref_vecs, matrix=a, tol=tol)
        v = result.eigenvectors
        orth = np.linalg.norm(v.transpose(0, 2, 1) @ v - eye[None], axis=(1, 2))
        lam_max = np.abs(ref_vals).max(axis=1)
        for k, rep in enumerate(reports):
            scaled = rep.max_abs_eigenvalue_error / max(lam_max[k], 1e-300)
            cell.max_scaled_eig_err = max(cell.max_scaled_eig_err, scaled)
            cell.max_recon_resid = max(cell.max_recon_resid, rep.reconstruction_residual)
            cell.max_orth_resid = max(cell.max_orth_resid, float(orth[k]) / dim)
            if not rep.passed or orth[k] > tol.residual * dim:
                cell.failures.append((dim, batch, s * batch + k, "invariants"))
        diag = result.diagnostics
        cell.r_values.append(diag.reductions)
        cell.double_steps.append(diag.double_steps)
        cell.rotation_counts.append(diag.rotation_count)
        if diag.converged_steps is not None:
            cell.converged_steps.extend(int(v) for v in diag.converged_steps)
        cell.count += batch

        if batch > 1 and single_cap > 0 and s == 0:
            sorted_vals = np.sort(result.eigenvalues, axis=1)
            for k in range(min(batch, single_cap)):
                one = BatchedSymmetric(a.data[k : k + 1])
                single = solve_fn(one, single_cfg)
                dev = float(np.abs(np.sort(single.eigenvalues[0]) - sorted_vals[k]).max())
                cell.max_single_dev = max(cell.max_single_dev, dev)
                if dev > 1e-8:
                    cell.failures.append((dim, batch, k, "batch-vs-single"))
    return cell


def run_verify(
    spec: BenchSpec,
    count: int = 256,
    tol: Tolerances | None = None,
    deflation_tol: float = VERIFY_DEFLATION_TOL,
    single_cap: int = 16,
    solve_fn=None,
    workers: int | None = None,
) -> list[VerifyCell]:
    """Solve >= ``count`` seeded SPD matrices per grid cell and check
    eigenvalue agreement with the Jacobi oracle, reconstruction,
    orthogonality, and batch-vs-single consistency.

    ``solve_fn`` is injectable so harness sensitivity can be tested with a
    deliberately corrupted solver.  Cells are independent and may run in
    parallel (``workers=None`` honours BED_THREADS, 0 meaning auto).
    """
    tol = tol or Tolerances()
    if solve_fn is None:
        solve_fn = batched_eig
    grid = [(d, b) for d in spec.dims for b in spec.batches]
    if workers is None:
        workers = _default_workers()
    workers = max(1, min(workers, len(grid)))

    def job(cell):
        d, b = cell
        return _verify_cell(d, b, spec, count, tol, deflation_tol, single_cap, solve_fn)

    if workers == 1 or len(grid) == 1:
        return [job(c) for c in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, grid))


def _default_workers() -> int:
    raw = os.environ.get("BED_THREADS", "0")
    try:
        value = int(raw)
    except ValueError:
        value = 0
    if value <= 0:
        value = os.cpu_count() or 1
    return value


def _quantiles(values):
    arr = np.asarray(values, dtype=np.float64)
    qs = np.percentile(arr, [0, 25, 50, 75, 100])
    return qs


def verify_report(cells: list[VerifyCell]) -> str:
    """Human-readable per-cell table plus reduction-count distributions."""
    lines = [
        f"{'dim':>4} {'batch':>6} {'count':>6} {'eig_err':>10} {'recon':>10} "
        f"{'orth':>10} {'single':>10} {'r_median':>9} {'k_max':>6} {'status':>7}"
    ]
    for c in cells:
        r_med = float(np.median(c.r_values)) if c.r_values else 0.0
        k_max = max(c.double_steps) if c.double_steps else 0
        status = "pass" if c.passed else "FAIL"
        lines.append(
            f"{c.dim:>4} {c.batch:>6} {c.count:>6} {c.max_scaled_eig_err:>10.3e} "
            f"{c.max_recon_resid:>10.3e} {c.max_orth_resid:>10.3e} "
            f"{c.max_single_dev:>10.3e} {r_med:>9.3f} {k_max:>6} {status:>7}"
        )
    lines.append("")
    lines.append("reduction count distribution per cell (min/q25/median/q75/max):")
    for c in cells:
        if not c.r_values:
            continue
        q = _quantiles(c.r_values)
        lines.append(
            f"  dim {c.dim:>3} batch {c.batch:>5}: "
            f"{q[0]:.3f} / {q[1]:.3f} / {q[2]:.3f} / {q[3]:.3f} / {q[4]:.3f} "
            f"over {len(c.r_values)} solves"
        )
    failures = [f for c in cells for f in c.failures]
    if failures:
        lines.append("")
        lines.append("failing (dim, batch, matrix, reason):")
        for f in failures[:200]:
            lines.append(f"  {f}")
        if len(failures) > 200:
            lines.append(f"  ... {len(failures) - 200} more")
    return "\n".join(lines) + "\n"
