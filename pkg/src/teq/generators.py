"""Test-problem generators.

All generators are deterministic; random ones take an explicit seed.
"""

import math

import numpy as np
import scipy.linalg as sla

from .hmatrix import band_from_dense, hmatrix_from_banded, hmatrix_from_dense

KINDS = ("laplace1d", "fractional_gl", "random_spd_hss", "shifted_laplace")


def laplace_eigenvalues(n):
    """Eigenvalues ``2 + 2 cos(pi j / (n + 1))``, ``j = 1..n`` (decreasing)."""
    j = np.arange(1, n + 1)
    return 2.0 + 2.0 * np.cos(np.pi * j / (n + 1))


def laplace1d(n):
    """Tridiagonal ``(-1, 2, -1)`` matrix in lower band storage (2 x n)."""
    if n < 1:
        raise ValueError("n must be positive")
    ab = np.zeros((2, n))
    ab[0] = 2.0
    ab[1, :n - 1] = -1.0
    return ab


def shifted_laplace(n, sigma):
    """Band storage of ``tridiag(-1, 2 + sigma, -1)``."""
    ab = laplace1d(n)
    ab[0] += sigma
    lam = laplace_eigenvalues(n)
    if lam[-1] + sigma <= 0:
        raise ValueError(f"shift {sigma} makes the matrix indefinite")
    return ab


def shift_for_condition(n, kappa):
    """Shift giving the shifted Laplacian of size `n` the condition number `kappa`.

    Targets beyond the unshifted condition number need a negative shift.
    """
    if kappa <= 1:
        raise ValueError("kappa must exceed 1")
    lam = laplace_eigenvalues(n)
    lmax, lmin = lam[0], lam[-1]
    return (lmax - kappa * lmin) / (kappa - 1.0)


def gl_weights(m, order):
    """Gruenwald-Letnikov weights ``g_0 .. g_{m-1}`` of the given order."""
    g = np.empty(m)
    g[0] = 1.0
    for k in range(1, m):
        g[k] = g[k - 1] * (k - 1 - order) / k
    return g


def fractional_gl(n, order=1.5, scale=1.0):
    """Symmetric Gruenwald-Letnikov discretization of the fractional Laplacian.

    With ``T[i, j] = g_{i - j + 1}`` (lower Hessenberg Toeplitz) the matrix is
    ``-scale * (T + T^T) / 2``; for ``1 < order < 2`` it is an SPD M-matrix.
    Pass ``scale=(n + 1) ** order`` for the grid-width scaling of a unit
    interval.
    """
    if not 1 < order <= 2:
        raise ValueError("order must lie in (1, 2]")
    g = gl_weights(n + 1, order)
    col = g[1:]
    row = np.zeros(n)
    row[0] = g[1]
    if n > 1:
        row[1] = g[0]
    T = sla.toeplitz(col, row)
    A = -0.5 * scale * (T + T.T)
    _require_spd(A, "fractional_gl")
    return A


def random_spd_hss(n, p=1.0, band=8, seed=0):
    """``Q diag(lam)**p Q^T`` with Laplacian eigenvalues and a banded-random ``Q``.

    `Q` is the orthogonal factor of a random matrix with lower bandwidth
    `band`, which bounds the off-diagonal ranks of the result by `band`.
    Returns ``(A, Q)``.
    """
    rng = np.random.default_rng(seed)
    M = np.triu(rng.standard_normal((n, n)), -band)
    Q, _ = np.linalg.qr(M)
    d = laplace_eigenvalues(n) ** p
    A = (Q * d) @ Q.T
    A = 0.5 * (A + A.T)
    return A, Q


def power_for_condition(n, kappa):
    """Exponent ``p`` such that ``random_spd_hss(n, p)`` has condition number `kappa`."""
    lam = laplace_eigenvalues(n)
    return math.log(kappa) / math.log(lam[0] / lam[-1])


def sweep_rhs(Q):
    """``Q S Q^T`` with ``S_ii = ((i - 1) / (n - 1))**10``.

    With the decreasing eigenvalue order of :func:`laplace_eigenvalues` the
    weight concentrates on the smallest eigenvalues.
    """
    n = Q.shape[0]
    s = (np.arange(n) / max(n - 1, 1)) ** 10
    return (Q * s) @ Q.T


def laplace_eigenvectors(n):
    """Orthonormal eigenvectors of the 1D Laplacian, ordered like :func:`laplace_eigenvalues`."""
    i = np.arange(1, n + 1)
    # column j belongs to 2 + 2 cos(pi j / (n + 1)) = 2 - 2 cos(pi (n + 1 - j) / (n + 1))
    return np.sqrt(2.0 / (n + 1)) * np.sin(np.outer(i, i[::-1]) * np.pi / (n + 1))


def _require_spd(A, what):
    lo = sla.eigvalsh(A, subset_by_index=(0, 0))[0]
    if lo <= 0:
        raise ValueError(f"{what}: generated matrix is not positive definite (min eigenvalue {lo:.3e})")


def make_coefficient(kind, n, n_min=64, order=1.5, p=1.0, band=8, seed=0, shift=0.0,
                     scale=1.0, tol=1e-12):
    """Generate one coefficient as an :class:`HMatrix`."""
    if kind == "laplace1d":
        return hmatrix_from_banded(laplace1d(n), n_min=n_min)
    if kind == "shifted_laplace":
        return hmatrix_from_banded(shifted_laplace(n, shift), n_min=n_min)
    if kind == "fractional_gl":
        return hmatrix_from_dense(fractional_gl(n, order, scale), n_min=n_min, tol=tol)
    if kind == "random_spd_hss":
        A, _ = random_spd_hss(n, p, band, seed)
        _require_spd(A, "random_spd_hss")
        return hmatrix_from_dense(A, n_min=n_min, tol=tol)
    raise ValueError(f"unknown generator {kind!r}; choose from {KINDS}")


__all__ = ["KINDS", "laplace_eigenvalues", "laplace_eigenvectors", "laplace1d",
           "shifted_laplace", "shift_for_condition", "gl_weights", "fractional_gl",
           "random_spd_hss", "power_for_condition", "sweep_rhs", "make_coefficient",
           "band_from_dense"]
