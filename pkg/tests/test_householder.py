import numpy as np
import pytest

from batchedeig import (
    BatchedSymmetric,
    BlockTooLarge,
    SolverConfig,
    accumulate_reflectors,
    householder_vector,
    jacobi_eig,
    rank2_update,
    tridiagonalize,
    wy_accumulate,
    wy_factors,
)

from helpers import explicit_reflection, random_symmetric

SQRT3 = 1.7320508075688772


def symmetric_with_column_tail(tail):
    """Small symmetric matrix whose column-0 tail below the diagonal is ``tail``."""
    n = len(tail) + 1
    m = np.zeros((n, n))
    m[0, 0] = 1.0
    m[1:, 0] = tail
    m[0, 1:] = tail
    m[1:, 1:] = np.eye(n - 1) * 2.0
    return BatchedSymmetric(m[None])


def test_householder_vector_pythagorean_tail():
    a = symmetric_with_column_tail([3.0, 4.0])
    u, sigma = householder_vector(a, 0)
    assert sigma[0] == pytest.approx(5.0, abs=0)
    assert u[0, 0] == 0.0
    after = rank2_update(a, u, sigma)
    np.testing.assert_allclose(after.data[0, 1, 0], -5.0, rtol=1e-14)
    np.testing.assert_allclose(after.data[0, 2, 0], 0.0, atol=1e-14)


def test_householder_vector_sign_follows_pivot():
    a = symmetric_with_column_tail([-3.0, 4.0])
    u, sigma = householder_vector(a, 0)
    assert sigma[0] == pytest.approx(-5.0, abs=0)
    after = rank2_update(a, u, sigma)
    np.testing.assert_allclose(after.data[0, 1, 0], 5.0, rtol=1e-14)


def test_householder_vector_zero_tail_is_identity():
    a = symmetric_with_column_tail([0.0, 0.0])
    u, sigma = householder_vector(a, 0)
    assert np.all(u == 0.0)
    assert np.all(sigma == 0.0)
    after = rank2_update(a, u, sigma)
    np.testing.assert_array_equal(after.data, a.data)


def test_householder_vector_ones_matrix():
    # all-ones 4x4: sigma = sqrt(1+1+1), post-state column (1, -sqrt(3), 0, 0);
    # cross-checked against the explicitly formed H A H
    a = BatchedSymmetric(np.ones((1, 4, 4)))
    u, sigma = householder_vector(a, 0)
    assert sigma[0] == pytest.approx(SQRT3, rel=1e-15)
    after = rank2_update(a, u, sigma)
    np.testing.assert_allclose(after.data[0, :, 0], [1.0, -SQRT3, 0.0, 0.0], atol=1e-14)
    oracle = explicit_reflection(a.data, u)
    np.testing.assert_allclose(after.data, oracle, atol=1e-13)


def test_householder_vector_prefix_exact_zero():
    rng = np.random.default_rng(5)
    a = BatchedSymmetric(random_symmetric(rng, 2, 6))
    tri_a = rank2_update(a, *householder_vector(a, 0))
    u, _ = householder_vector(tri_a, 1)
    assert np.all(u[:, :2] == 0.0)


def test_householder_vector_step_range():
    a = BatchedSymmetric(np.eye(4)[None])
    with pytest.raises(ValueError):
        householder_vector(a, 2)


def test_rank2_update_identity_input():
    rng = np.random.default_rng(0)
    a = BatchedSymmetric(np.broadcast_to(np.eye(5), (3, 5, 5)).copy())
    src = BatchedSymmetric(random_symmetric(rng, 3, 5))
    u, sigma = householder_vector(src, 0)
    out = rank2_update(a, u, sigma)
    np.testing.assert_allclose(out.data, a.data, atol=1e-14)


def test_rank2_update_matches_explicit_reflection():
    rng = np.random.default_rng(1)
    a = BatchedSymmetric(random_symmetric(rng, 4, 5))
    u, sigma = householder_vector(a, 0)
    out = rank2_update(a, u, sigma)
    oracle = explicit_reflection(a.data, u)
    scale = np.linalg.norm(a.data, axis=(1, 2)).max()
    np.testing.assert_allclose(out.data, oracle, atol=1e-13 * scale)


def test_rank2_update_symmetric_exactly():
    rng = np.random.default_rng(2)
    a = BatchedSymmetric(random_symmetric(rng, 2, 6))
    u, sigma = householder_vector(a, 0)
    out = rank2_update(a, u, sigma)
    np.testing.assert_array_equal(out.data, out.data.transpose(0, 2, 1))


@pytest.mark.parametrize("dim", range(3, 13))
def test_rank2_equals_reflection_all_small_dims(dim):
    rng = np.random.default_rng(dim)
    a = BatchedSymmetric(random_symmetric(rng, 2, dim))
    u, sigma = householder_vector(a, 0)
    out = rank2_update(a, u, sigma)
    oracle = explicit_reflection(a.data, u)
    scale = np.linalg.norm(a.data, axis=(1, 2)).max()
    np.testing.assert_allclose(out.data, oracle, atol=1e-13 * scale)


# ---------------------------------------------------------------- tridiagonalize


def test_tridiagonalize_diagonal_matrix():
    a = BatchedSymmetric(np.diag([1.0, 2.0, 3.0, 4.0])[None])
    tri, refl = tridiagonalize(a)
    np.testing.assert_array_equal(tri.diag[0], [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(tri.offdiag[0], [0.0, 0.0, 0.0])
    assert np.all(refl.norms == 0.0)


def test_tridiagonalize_identity_batch():
    a = BatchedSymmetric(np.broadcast_to(np.eye(5), (3, 5, 5)).copy())
    tri, refl = tridiagonalize(a)
    np.testing.assert_array_equal(tri.diag, np.ones((3, 5)))
    np.testing.assert_array_equal(tri.offdiag, np.zeros((3, 4)))
    p = accumulate_reflectors(refl)
    np.testing.assert_array_equal(p.data, np.broadcast_to(np.eye(5), (3, 5, 5)))


def test_tridiagonalize_small_dims_passthrough():
    one = BatchedSymmetric(np.array([[[7.0]]]))
    tri, refl = tridiagonalize(one)
    assert tri.diag[0, 0] == 7.0 and refl.steps == 0
    two = BatchedSymmetric(np.array([[[2.0, 1.0], [1.0, 2.0]]]))
    tri, refl = tridiagonalize(two)
    np.testing.assert_array_equal(tri.diag[0], [2.0, 2.0])
    np.testing.assert_array_equal(tri.offdiag[0], [1.0])
    assert refl.steps == 0


def test_tridiagonalize_preserves_spectrum_spd():
    rng = np.random.default_rng(42)
    raw = rng.standard_normal((16, 8, 8))
    spd = raw @ raw.transpose(0, 2, 1) + 8 * np.eye(8)
    a = BatchedSymmetric(spd)
    tri, _ = tridiagonalize(a)
    dense = tri.dense()
    for k in range(16):
        before, _ = jacobi_eig(a.data[k])
        after, _ = jacobi_eig(dense[k])
        np.testing.assert_allclose(np.sort(before), np.sort(after), atol=1e-10)


def test_tridiagonalize_similarity_invariants():
    rng = np.random.default_rng(3)
    a = BatchedSymmetric(random_symmetric(rng, 4, 9))
    tri, _ = tridiagonalize(a)
    trace_before = np.trace(a.data, axis1=1, axis2=2)
    trace_after = tri.diag.sum(axis=1)
    np.testing.assert_allclose(trace_after, trace_before, rtol=1e-12)
    fro_before = np.linalg.norm(a.data, axis=(1, 2))
    fro_after = np.linalg.norm(tri.dense(), axis=(1, 2))
    np.testing.assert_allclose(fro_after, fro_before, rtol=1e-12)


def test_tridiagonalize_band_exterior_negligible():
    rng = np.random.default_rng(4)
    a = BatchedSymmetric(random_symmetric(rng, 2, 10))
    tri, refl = tridiagonalize(a)
    p = accumulate_reflectors(refl)
    full = p.data.transpose(0, 2, 1) @ a.data @ p.data
    band = tri.dense()
    scale = np.linalg.norm(a.data, axis=(1, 2))[:, None, None]
    np.testing.assert_allclose(full, band, atol=1e-11 * scale.max())
    exterior = full - np.tril(np.triu(full, -1), 1)
    assert np.abs(exterior).max() <= 1e-12 * scale.max()


def test_tridiagonalize_batch_independence_bitwise():
    rng = np.random.default_rng(6)
    data = random_symmetric(rng, 5, 7)
    tri_all, refl_all = tridiagonalize(BatchedSymmetric(data))
    for k in range(5):
        tri_one, refl_one = tridiagonalize(BatchedSymmetric(data[k : k + 1]))
        assert tri_one.diag.tobytes() == tri_all.diag[k : k + 1].tobytes()
        assert tri_one.offdiag.tobytes() == tri_all.offdiag[k : k + 1].tobytes()
        assert refl_one.vectors.tobytes() == refl_all.vectors[:, k : k + 1, :].tobytes()


def test_reflector_set_invariants():
    rng = np.random.default_rng(7)
    a = BatchedSymmetric(random_symmetric(rng, 3, 8))
    _, refl = tridiagonalize(a)
    for i in range(refl.steps):
        assert np.all(refl.vectors[i][:, : i + 1] == 0.0)
        stored = (refl.vectors[i] ** 2).sum(axis=-1)
        np.testing.assert_allclose(stored, refl.norms[i], rtol=1e-14, atol=1e-300)


def test_reflector_unitarity():
    rng = np.random.default_rng(8)
    a = BatchedSymmetric(random_symmetric(rng, 2, 6))
    _, refl = tridiagonalize(a)
    n = a.dim
    for i in range(refl.steps):
        u = refl.vectors[i]
        h = np.broadcast_to(np.eye(n), (a.batch, n, n)).copy()
        norm2 = refl.norms[i]
        live = norm2 > 0
        scale = np.where(live, 2.0 / np.where(live, norm2, 1.0), 0.0)
        h -= scale[:, None, None] * u[:, :, None] * u[:, None, :]
        gram = np.linalg.norm(h @ h.transpose(0, 2, 1) - np.eye(n), axis=(1, 2))
        assert gram.max() <= 1e-13 * n
        skew = np.linalg.norm(h - h.transpose(0, 2, 1), axis=(1, 2))
        assert skew.max() <= 1e-13


# ---------------------------------------------------------------- accumulation


def test_accumulate_empty_is_identity():
    a = BatchedSymmetric(np.array([[[2.0, 1.0], [1.0, 2.0]]]))
    _, refl = tridiagonalize(a)
    p = accumulate_reflectors(refl)
    np.testing.assert_array_equal(p.data, np.eye(2)[None])


def test_accumulate_single_reflector_formula():
    from batchedeig import ReflectorSet

    u = np.array([[0.0, 0.0, 0.6, 0.8]])  # unit vector, zero prefix of 2
    refl = ReflectorSet(u[None], np.array([[1.0]]))
    p = accumulate_reflectors(refl)
    expected = np.eye(4) - 2.0 * np.outer(u[0], u[0])
    np.testing.assert_allclose(p.data[0], expected, atol=1e-15)


def test_accumulate_orthogonal_and_reduces():
    rng = np.random.default_rng(9)
    a = BatchedSymmetric(random_symmetric(rng, 3, 10))
    tri, refl = tridiagonalize(a)
    p = accumulate_reflectors(refl)
    n = a.dim
    gram = p.data.transpose(0, 2, 1) @ p.data
    assert np.linalg.norm(gram - np.eye(n), axis=(1, 2)).max() <= 1e-10 * n
    full = p.data.transpose(0, 2, 1) @ a.data @ p.data
    scale = np.linalg.norm(a.data, axis=(1, 2)).max()
    np.testing.assert_allclose(full, tri.dense(), atol=1e-11 * scale)


def test_wy_accumulate_matches_plain():
    rng = np.random.default_rng(10)
    raw = rng.standard_normal((8, 12, 12))
    spd = raw @ raw.transpose(0, 2, 1) + 12 * np.eye(12)
    _, refl = tridiagonalize(BatchedSymmetric(spd))
    plain = accumulate_reflectors(refl)
    blocked = wy_accumulate(refl, 4)
    np.testing.assert_allclose(blocked.data, plain.data, atol=1e-12)


def test_wy_block_of_one_degenerates_to_plain():
    rng = np.random.default_rng(11)
    a = BatchedSymmetric(random_symmetric(rng, 4, 10))
    _, refl = tridiagonalize(a)
    plain = accumulate_reflectors(refl)
    blocked = wy_accumulate(refl, 1)
    np.testing.assert_allclose(blocked.data, plain.data, atol=1e-13)


def test_wy_single_block_orthogonal():
    rng = np.random.default_rng(12)
    a = BatchedSymmetric(random_symmetric(rng, 2, 9))
    _, refl = tridiagonalize(a)
    p = wy_accumulate(refl, a.dim - 2)
    n = a.dim
    gram = p.data.transpose(0, 2, 1) @ p.data
    assert np.linalg.norm(gram - np.eye(n), axis=(1, 2)).max() <= 1e-10 * n


def test_wy_all_block_sizes_agree():
    rng = np.random.default_rng(13)
    a = BatchedSymmetric(random_symmetric(rng, 2, 10))
    _, refl = tridiagonalize(a)
    plain = accumulate_reflectors(refl)
    for m in range(1, a.dim - 1):
        blocked = wy_accumulate(refl, m)
        np.testing.assert_allclose(blocked.data, plain.data, atol=1e-12)


def test_wy_factor_pairs_are_orthogonal():
    rng = np.random.default_rng(14)
    a = BatchedSymmetric(random_symmetric(rng, 3, 10))
    _, refl = tridiagonalize(a)
    n = a.dim
    for pair in wy_factors(refl, 3):
        prod = pair.product()
        gram = prod.transpose(0, 2, 1) @ prod
        assert np.linalg.norm(gram - np.eye(n), axis=(1, 2)).max() <= 1e-10 * n


def test_wy_block_bounds():
    rng = np.random.default_rng(15)
    a = BatchedSymmetric(random_symmetric(rng, 1, 8))
    _, refl = tridiagonalize(a)
    with pytest.raises(BlockTooLarge):
        wy_accumulate(refl, 7)
    with pytest.raises(BlockTooLarge):
        wy_accumulate(refl, 0)


def test_tridiagonalize_validates_input():
    from batchedeig import NonSymmetric

    m = np.zeros((1, 3, 3))
    m[0, 0, 1] = 1.0
    with pytest.raises(NonSymmetric):
        tridiagonalize(BatchedSymmetric(m))
