"""Sparse symmetric storage and the Cholesky solver layer.

Dense numpy factorizations serve as the oracle throughout; the property
tests run under both the compiled and the pure-Python kernel backends.
"""

import numpy as np
import pytest

from lapgm import _chol_py, _kernels
from lapgm.components import ar1_precision
from lapgm.errors import NotPositiveDefiniteError
from lapgm.sparse import (
    CholeskyContext,
    add_diag,
    analyze,
    build_sparse,
    cholesky,
    load_triplets,
    log_det,
    marginal_variances,
    solve,
)

KERNEL_NAMES = ("etree", "symbolic", "numeric", "lsolve", "ltsolve", "inv_diag")


@pytest.fixture(params=["compiled", "python"])
def backend(request, monkeypatch):
    """Route the kernel dispatch module at one of the two implementations."""
    if request.param == "python":
        impl = _chol_py
    else:
        impl = pytest.importorskip("lapgm._chol_c")
    for name in KERNEL_NAMES:
        monkeypatch.setattr(_kernels, name, getattr(impl, name))
    return request.param


def dense(matrix):
    return np.asarray(matrix, dtype=np.float64)


def from_dense(M):
    M = dense(M)
    trip = [(i, j, M[i, j]) for i in range(M.shape[0])
            for j in range(i, M.shape[1]) if M[i, j] != 0.0]
    return build_sparse(trip, M.shape[0])


# ---------------------------------------------------------------------------
# construction


def test_build_identity_pattern():
    Q = build_sparse([(0, 0, 1.0), (1, 1, 1.0)], dim=2)
    assert Q.nnz == 2
    np.testing.assert_array_equal(Q.to_dense(), np.eye(2))


def test_build_duplicates_are_summed():
    Q = build_sparse([(0, 0, 1.0), (0, 0, 1.0)], dim=1)
    assert Q.nnz == 1
    assert Q.to_dense()[0, 0] == 2.0


def test_build_ar1_is_tridiagonal():
    Q = ar1_precision(3, phi=0.5, tau_marg=1.0)
    assert Q.nnz == 5  # 3 diagonal + 2 off-diagonal stored entries
    D = Q.to_dense()
    assert D[0, 2] == 0.0


def test_build_rejects_bad_input():
    with pytest.raises(ValueError):
        build_sparse([(0, 2, 1.0)], dim=2)
    with pytest.raises(ValueError):
        build_sparse([], dim=0)


def test_triplet_mirroring():
    # off-diagonal triplets refer to the symmetric matrix
    Q = build_sparse([(0, 0, 2.0), (1, 0, 1.0), (1, 1, 2.0)], dim=2)
    np.testing.assert_allclose(Q.to_dense(), [[2.0, 1.0], [1.0, 2.0]])


def test_add_diag():
    I2 = from_dense(np.eye(2))
    np.testing.assert_array_equal(add_diag(I2, [0.0, 0.0]).to_dense(), np.eye(2))
    np.testing.assert_array_equal(add_diag(I2, [1.0, 2.0]).to_dense(),
                                  np.diag([2.0, 3.0]))
    Q = ar1_precision(3, phi=0.5, tau_marg=1.0)
    shifted = add_diag(Q, np.ones(3))
    np.testing.assert_allclose(shifted.to_dense(), Q.to_dense() + np.eye(3))
    with pytest.raises(ValueError):
        add_diag(I2, np.ones(3))


def test_load_triplets_roundtrip(tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("2 3\n0 0 2.0\n0 1 1.0\n1 1 2.0\n")
    Q = load_triplets(path)
    np.testing.assert_allclose(Q.to_dense(), [[2.0, 1.0], [1.0, 2.0]])
    path.write_text("2 5\n0 0 2.0\n")
    with pytest.raises(ValueError):
        load_triplets(path)


def test_matvec_matches_dense():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(7, 7))
    M = M @ M.T
    Q = from_dense(M)
    x = rng.normal(size=7)
    np.testing.assert_allclose(Q.matvec(x), M @ x, atol=1e-12)


# ---------------------------------------------------------------------------
# factorization: pinned examples


def test_cholesky_identity(backend):
    F = cholesky(from_dense(np.eye(3)))
    np.testing.assert_allclose(F.dense_L(), np.eye(3))


def test_cholesky_2x2_values(backend):
    F = cholesky(from_dense([[2.0, 1.0], [1.0, 2.0]]), ordering="natural")
    L = F.dense_L()
    np.testing.assert_allclose(L, [[1.41421, 0.0], [0.70711, 1.22474]],
                               atol=1e-5)


def test_cholesky_reports_failing_pivot(backend):
    with pytest.raises(NotPositiveDefiniteError) as err:
        cholesky(from_dense([[1.0, 2.0], [2.0, 1.0]]), ordering="natural")
    assert err.value.pivot == 1


def test_solve_examples(backend):
    F = cholesky(from_dense(np.eye(3)))
    np.testing.assert_allclose(solve(F, [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])
    F2 = cholesky(from_dense([[2.0, 1.0], [1.0, 2.0]]))
    np.testing.assert_allclose(solve(F2, [1.0, 1.0]), [1 / 3, 1 / 3],
                               atol=1e-12)
    np.testing.assert_array_equal(solve(F2, [0.0, 0.0]), [0.0, 0.0])
    with pytest.raises(ValueError):
        solve(F2, np.ones(3))


def test_log_det_examples(backend):
    assert log_det(cholesky(from_dense(np.eye(5)))) == pytest.approx(0.0)
    assert log_det(cholesky(from_dense(np.diag([2.0, 3.0])))) == pytest.approx(
        np.log(6.0))
    assert log_det(cholesky(from_dense([[2.0, 1.0], [1.0, 2.0]]))) == pytest.approx(
        np.log(3.0))


def test_marginal_variances_examples(backend):
    np.testing.assert_allclose(
        marginal_variances(cholesky(from_dense(np.eye(4)))), np.ones(4))
    np.testing.assert_allclose(
        marginal_variances(cholesky(from_dense([[2.0, -1.0], [-1.0, 2.0]]))),
        [2 / 3, 2 / 3], atol=1e-12)
    # AR(1) with unit marginal precision: stationary variances are 1
    F = cholesky(ar1_precision(3, phi=0.5, tau_marg=1.0))
    np.testing.assert_allclose(marginal_variances(F), np.ones(3), atol=1e-10)


# ---------------------------------------------------------------------------
# property tests against the dense oracle


def random_sparse_spd(rng, dim):
    """Diagonally dominant band-ish SPD matrix with random sparsity."""
    M = np.zeros((dim, dim))
    nnz_target = max(dim, int(0.05 * dim * dim))
    for _ in range(nnz_target):
        i, j = rng.integers(0, dim, size=2)
        v = rng.normal()
        M[i, j] += v
        M[j, i] += v
    M = 0.5 * (M + M.T)
    M[np.arange(dim), np.arange(dim)] += np.abs(M).sum(axis=1) + 1.0
    return M


@pytest.mark.parametrize("ordering", ["mindeg", "natural"])
def test_random_spd_roundtrip(backend, ordering):
    rng = np.random.default_rng(2024)
    for trial in range(20):
        dim = int(rng.integers(2, 200))
        M = random_sparse_spd(rng, dim)
        Q = from_dense(M)
        F = cholesky(Q, ordering=ordering)

        # reconstruction through the permutation
        L = F.dense_L()
        perm = F.ctx.perm
        R = (L @ L.T)[np.ix_(F.ctx.iperm, F.ctx.iperm)]
        assert np.linalg.norm(R - M) / np.linalg.norm(M) < 1e-10

        b = rng.normal(size=dim)
        x = solve(F, b)
        assert np.linalg.norm(M @ x - b) / np.linalg.norm(b) < 1e-8

        assert log_det(F) == pytest.approx(np.linalg.slogdet(M)[1], abs=1e-9)

        V = np.linalg.inv(M)
        np.testing.assert_allclose(marginal_variances(F), np.diag(V),
                                   rtol=1e-8, atol=1e-12)
        assert perm.size == dim


def test_context_reuse_same_pattern(backend):
    Q1 = ar1_precision(50, phi=0.6, tau_marg=1.0)
    Q2 = ar1_precision(50, phi=-0.3, tau_marg=2.5)
    ctx = analyze(Q1)
    F2 = ctx.factor(Q2)
    assert log_det(F2) == pytest.approx(np.linalg.slogdet(Q2.to_dense())[1],
                                        abs=1e-9)
    with pytest.raises(ValueError):
        ctx.factor(ar1_precision(51, phi=0.6, tau_marg=1.0))


def test_unknown_ordering_rejected():
    with pytest.raises(ValueError):
        CholeskyContext(ar1_precision(4, 0.5, 1.0), ordering="rcm")


def test_ar1_factorization_has_no_fill():
    # a chain graph factors without fill-in: nnz(L) = 2m - 1
    for m in (10, 100, 1000):
        ctx = analyze(ar1_precision(m, phi=0.7, tau_marg=1.0))
        assert ctx.nnz_L == 2 * m - 1
