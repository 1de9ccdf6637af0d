import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from teq.generators import laplace1d, laplace_eigenvalues
from teq.hmatrix import hmatrix_from_banded
from teq.lowrank import LowRank, orthonormalize_right, recompress
from teq.sylv_lowrank import (DenseOperator, InexactnessProbe, SolverFailure, ek_solve, fadi,
                              fadi_inexact, fadi_residual_exact, rk_solve)
from teq.zolotarev import (IntervalPair, shift_count_adi, shift_count_rk, zolotarev_bound,
                           zolotarev_shifts)

from conftest import laplace_dense


def sylv_residual(A1, A2, X, L):
    C = L.dense()
    return np.linalg.norm(A1 @ X + X @ A2 - C) / np.linalg.norm(C)


def pair_of(A1, A2):
    w1, w2 = np.linalg.eigvalsh(A1), np.linalg.eigvalsh(A2)
    return IntervalPair(w1[0], w1[-1], w2[0], w2[-1])


def random_rhs(rng, m, n, k=2):
    return LowRank(rng.standard_normal((m, k)), rng.standard_normal((n, k)))


def random_spd(rng, n, lo=1.0, hi=100.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (Q * np.geomspace(lo, hi, n)) @ Q.T


# ---- recompression

def test_recompress_duplicates(rng):
    u, v = rng.standard_normal((10, 1)), rng.standard_normal((8, 1))
    L = recompress(LowRank(np.hstack([u, u]), np.hstack([v, v])), 1e-12)
    assert L.rank == 1
    np.testing.assert_allclose(L.dense(), 2 * u @ v.T, rtol=1e-12)


def test_recompress_exact_at_zero_tol(rng):
    L = random_rhs(rng, 20, 15, 4)
    R = recompress(L, 0.0)
    assert R.rank <= 4
    assert np.linalg.norm(R.dense() - L.dense()) <= 1e-13 * np.linalg.norm(L.dense())
    np.testing.assert_allclose(R.V.T @ R.V, np.eye(R.rank), atol=1e-13)


def test_recompress_recovers_rank(rng):
    U0, V0 = rng.standard_normal((40, 5)), rng.standard_normal((30, 5))
    M = rng.standard_normal((5, 20))
    L = LowRank(U0 @ M, V0 @ np.linalg.pinv(M).T)
    assert L.rank == 20
    R = recompress(L, 1e-10)
    assert R.rank == 5
    assert np.linalg.norm(R.dense() - U0 @ V0.T) <= 1e-10 * np.linalg.norm(U0 @ V0.T)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.floats(1e-12, 0.5), st.integers(1, 12))
def test_recompress_error_bound(seed, tol, k):
    rng = np.random.default_rng(seed)
    scales = np.geomspace(1.0, 1e-8, k)
    L = LowRank(rng.standard_normal((25, k)) * scales, rng.standard_normal((18, k)))
    R = recompress(L, tol)
    D = L.dense()
    assert np.linalg.norm(R.dense() - D) <= tol * np.linalg.norm(D) * (1 + 1e-10)
    # minimality: one fewer term would violate the tolerance
    if R.rank > 0:
        S = recompress(L, tol, max_rank=R.rank - 1)
        assert np.linalg.norm(S.dense() - D) > tol * np.linalg.norm(D) * (1 - 1e-10)


def test_orthonormalize_right_keeps_product(rng):
    L = random_rhs(rng, 7, 9, 3)
    O = orthonormalize_right(L)
    np.testing.assert_allclose(O.dense(), L.dense(), rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(O.V.T @ O.V, np.eye(3), atol=1e-14)


def test_lowrank_algebra(rng):
    a, b = random_rhs(rng, 5, 4, 2), random_rhs(rng, 5, 4, 1)
    np.testing.assert_allclose((a + b).dense(), a.dense() + b.dense())
    np.testing.assert_allclose((-a).dense(), -a.dense())
    np.testing.assert_allclose(a.T().dense(), a.dense().T)
    assert a.norm() == pytest.approx(np.linalg.norm(a.dense()), rel=1e-13)
    assert LowRank.zeros(3, 2).norm() == 0.0
    with pytest.raises(ValueError):
        LowRank(np.ones((3, 2)), np.ones((3, 1)))


# ---- fADI

def test_fadi_zero_rhs():
    A = laplace_dense(8)
    S = zolotarev_shifts(3, pair_of(A, A))
    X = fadi(A, A, LowRank.zeros(8, 8), S)
    assert X.rank == 0 and X.shape == (8, 8)


def test_fadi_scalar_exact():
    a, b = 3.0, 5.0
    pair = IntervalPair(a, a, b, b)
    X = fadi(np.array([[a]]), np.array([[b]]), LowRank(np.array([[2.0]]), np.array([[1.0]])),
             zolotarev_shifts(1, pair))
    assert X.dense()[0, 0] == pytest.approx(2.0 / (a + b), rel=1e-15)


def test_fadi_laplacian_256():
    n = 256
    H = hmatrix_from_banded(laplace1d(n), n_min=64)
    A = laplace_dense(n)
    lam = laplace_eigenvalues(n)
    pair = IntervalPair(lam.min(), lam.max(), lam.min(), lam.max())
    s = shift_count_adi(1e-8, pair)
    rng = np.random.default_rng(0)
    L = random_rhs(rng, n, n, 1)
    X = fadi(H, H, L, zolotarev_shifts(s, pair))
    assert X.rank <= s * L.rank
    assert sylv_residual(A, A, X.dense(), L) <= 1e-8


@pytest.mark.parametrize("n,seed", [(64, 0), (64, 1), (100, 2), (128, 3)])
def test_fadi_matches_closed_form(n, seed):
    rng = np.random.default_rng(seed)
    A1, A2 = random_spd(rng, n, 1, 50), random_spd(rng, n, 0.5, 200)
    L = random_rhs(rng, n, n, 3)
    for s in (1, 4, 8):
        S = zolotarev_shifts(s, pair_of(A1, A2))
        X = fadi(A1, A2, L, S)
        measured = sylv_residual(A1, A2, X.dense(), L)
        closed = fadi_residual_exact(A1, A2, L, S) / np.linalg.norm(L.dense())
        assert abs(measured - closed) <= 1e-10 * closed


def test_fadi_laplacian_64_closed_form():
    A = laplace_dense(64)
    L = random_rhs(np.random.default_rng(5), 64, 64, 2)
    S = zolotarev_shifts(4, pair_of(A, A))
    X = fadi(A, A, L, S)
    r = np.linalg.norm(A @ X.dense() + X.dense() @ A - L.dense())
    assert abs(r - fadi_residual_exact(A, A, L, S)) <= 1e-10 * r


def test_closed_form_without_shifts(rng):
    A = random_spd(rng, 10)
    L = random_rhs(rng, 10, 10)
    assert fadi_residual_exact(A, A, L) == pytest.approx(np.linalg.norm(L.dense()), rel=1e-14)


def test_fadi_residual_decreases_and_obeys_bound(rng):
    A1, A2 = random_spd(rng, 80, 1, 1e3), random_spd(rng, 80, 2, 40)
    pair = pair_of(A1, A2)
    L = random_rhs(rng, 80, 80, 2)
    prev = np.inf
    for s in range(1, 13):
        S = zolotarev_shifts(s, pair)
        r = fadi_residual_exact(A1, A2, L, S) / np.linalg.norm(L.dense())
        assert r <= zolotarev_bound(s, pair)
        assert r <= prev * (1 + 1e-12)
        prev = r


def test_fadi_recompression_tolerance(rng):
    A = laplace_dense(64)
    L = random_rhs(rng, 64, 64, 2)
    S = zolotarev_shifts(10, pair_of(A, A))
    X = fadi(A, A, L, S)
    Xc = fadi(A, A, L, S, tol=1e-6)
    assert Xc.rank <= X.rank
    assert np.linalg.norm(Xc.dense() - X.dense()) <= 1e-6 * np.linalg.norm(X.dense())


def test_fadi_failure_reports_step():
    A = laplace_dense(16)
    w = np.linalg.eigvalsh(A)
    # a pole inside the spectrum of A1 makes A1 - q I indefinite
    bad = zolotarev_shifts(3, IntervalPair(w[0], w[-1], w[0], w[-1]))
    object.__setattr__(bad, "q", np.array([bad.q[0], 1.0, bad.q[2]]))
    with pytest.raises(SolverFailure) as info:
        fadi(A, A, LowRank(np.ones((16, 1)), np.ones((16, 1))), bad)
    assert info.value.step == 2


# ---- inexact fADI

def test_inexact_zero_injection_identical(rng):
    A = laplace_dense(32)
    L = random_rhs(rng, 32, 32)
    S = zolotarev_shifts(5, pair_of(A, A))
    X, probe = fadi_inexact(A, A, L, S, InexactnessProbe(0.0))
    np.testing.assert_array_equal(X.dense(), fadi(A, A, L, S).dense())
    assert probe.eta_norms == [0.0] * 5


@pytest.mark.parametrize("s", [4, 6, 8])
@pytest.mark.parametrize("eps", [1e-4, 1e-6])
def test_inexact_bounds(s, eps):
    n = 64
    A = laplace_dense(n)
    rng = np.random.default_rng(s)
    L = orthonormalize_right(random_rhs(rng, n, n, 2))
    S = zolotarev_shifts(s, pair_of(A, A))
    X, probe = fadi_inexact(A, A, L, S, InexactnessProbe(eps, seed=s))
    nU = np.linalg.norm(L.U)
    assert all(e <= eps * nU * (1 + 1e-12) for e in probe.eta_norms)
    measured = np.linalg.norm(A @ X.dense() + X.dense() @ A - L.dense())
    exact = fadi_residual_exact(A, A, L, S)
    assert measured <= exact + 2 * s * eps * nU * np.linalg.norm(L.V, 2)
    # ||(A - p_j) W_j - r_j(A) U|| <= j eps ||U||
    w, Q = np.linalg.eigh(A)
    for j, W in enumerate(probe.W, start=1):
        rj = np.prod([(w - S.p[i]) / (w - S.q[i]) for i in range(j)], axis=0)
        M = (A - S.p[j - 1] * np.eye(n)) @ W - Q @ (rj[:, None] * (Q.T @ L.U))
        assert np.linalg.norm(M) <= j * eps * nU * (1 + 1e-8)


def test_probe_rejects_negative():
    with pytest.raises(ValueError):
        InexactnessProbe(-1.0)


# ---- rational Krylov

def test_rk_zero_rhs():
    A = laplace_dense(8)
    assert rk_solve(A, A, LowRank.zeros(8, 8), zolotarev_shifts(2, pair_of(A, A))).rank == 0


def test_rk_full_space_matches_dense(rng):
    n = 32
    A1, A2 = random_spd(rng, n, 1, 10), random_spd(rng, n, 1, 30)
    L = random_rhs(rng, n, n, 2)
    X = rk_solve(A1, A2, L, zolotarev_shifts(20, pair_of(A1, A2)))
    w1, S1 = np.linalg.eigh(A1)
    w2, S2 = np.linalg.eigh(A2)
    ref = S1 @ ((S1.T @ L.dense() @ S2) / (w1[:, None] + w2[None, :])) @ S2.T
    assert np.linalg.norm(X.dense() - ref) <= 1e-11 * np.linalg.norm(ref)


def test_rk_laplacian_bound():
    n = 256
    A = laplace_dense(n)
    H = hmatrix_from_banded(laplace1d(n), n_min=64)
    lam = laplace_eigenvalues(n)
    pair = IntervalPair(lam.min(), lam.max(), lam.min(), lam.max())
    s = shift_count_rk(1e-8, pair)
    L = random_rhs(np.random.default_rng(3), n, n, 1)
    X = rk_solve(H, H, L, zolotarev_shifts(s, pair))
    r = sylv_residual(A, A, X.dense(), L)
    assert r <= 2 * (1 + pair.kappa) * zolotarev_bound(s, pair)
    assert r <= 1e-8


# ---- extended Krylov

def test_ek_zero_rhs():
    A = laplace_dense(8)
    res = ek_solve(A, A, LowRank.zeros(8, 8))
    assert res.converged and res.solution.rank == 0


def test_ek_laplacian_converges():
    n = 256
    A = laplace_dense(n)
    H = hmatrix_from_banded(laplace1d(n), n_min=64)
    L = random_rhs(np.random.default_rng(4), n, n, 1)
    res = ek_solve(H, H, L, tol=1e-8, max_iter=60)
    assert res.converged
    assert res.iterations == len(res.residuals) < 60
    assert sylv_residual(A, A, res.solution.dense(), L) <= 1.5e-8
    assert res.residuals[-1] <= 1e-8
    assert np.all(np.diff(res.residuals) <= 0)


def test_ek_reports_nonconvergence(rng):
    A = laplace_dense(200)
    L = random_rhs(rng, 200, 200, 1)
    res = ek_solve(A, A, L, tol=1e-14, max_iter=2)
    assert not res.converged and res.iterations == 2
    assert res.residuals[-1] > 1e-14


def test_dense_operator(rng):
    A = random_spd(rng, 6)
    op = DenseOperator(A)
    B = rng.standard_normal((6, 2))
    np.testing.assert_allclose(A @ op.solve(B, 0.5) + 0.5 * op.solve(B, 0.5), B, atol=1e-12)
    with pytest.raises(np.linalg.LinAlgError):
        op.solve(B, -1000.0)
