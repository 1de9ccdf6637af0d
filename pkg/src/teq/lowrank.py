"""Factored low-rank matrices ``U @ V.T`` and QR-SVD recompression."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla


@dataclass
class LowRank:
    """The matrix ``U @ V.T`` stored through its factors."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=float)
        self.V = np.asarray(self.V, dtype=float)
        if self.U.ndim != 2 or self.V.ndim != 2 or self.U.shape[1] != self.V.shape[1]:
            raise ValueError(f"incompatible factors {self.U.shape} and {self.V.shape}")

    @classmethod
    def zeros(cls, m, n):
        return cls(np.zeros((m, 0)), np.zeros((n, 0)))

    @property
    def shape(self):
        return (self.U.shape[0], self.V.shape[0])

    @property
    def rank(self):
        return self.U.shape[1]

    def dense(self):
        return self.U @ self.V.T

    def norm(self):
        """Frobenius norm, computed from the factors."""
        if self.rank == 0:
            return 0.0
        Ru = np.linalg.qr(self.U, mode="r")
        Rv = np.linalg.qr(self.V, mode="r")
        return float(np.linalg.norm(Ru @ Rv.T))

    def __add__(self, other):
        return LowRank(np.hstack([self.U, other.U]), np.hstack([self.V, other.V]))

    def __neg__(self):
        return LowRank(-self.U, self.V)

    def T(self):
        return LowRank(self.V, self.U)


def _thin_qr(M):
    Q, R = sla.qr(M, mode="economic", check_finite=False)
    return Q, R


def recompress(L, tol=0.0, max_rank=None):
    """Recompress ``U V^T`` to the minimal rank meeting a relative tolerance.

    Thin QR factorizations of both factors are followed by an SVD of the small
    core.  Singular values are discarded from the tail as long as the discarded
    part stays below ``tol * ||U V^T||_F``.  The returned ``V`` has orthonormal
    columns.
    """
    m, n = L.shape
    if L.rank == 0:
        return LowRank.zeros(m, n)
    Qu, Ru = _thin_qr(L.U)
    Qv, Rv = _thin_qr(L.V)
    W, sv, Zt = sla.svd(Ru @ Rv.T, full_matrices=False, lapack_driver="gesdd", check_finite=False)
    total = np.sqrt(np.sum(sv ** 2))
    if total == 0.0:
        return LowRank.zeros(m, n)
    # tail[r] = norm of the singular values r, r+1, ...
    tail = np.sqrt(np.cumsum(sv[::-1] ** 2))[::-1]
    keep = int(np.count_nonzero(tail > tol * total))
    if max_rank is not None:
        keep = min(keep, max_rank)
    U = Qu @ (W[:, :keep] * sv[:keep])
    V = Qv @ Zt[:keep].T
    return LowRank(U, V)


def orthonormalize_right(L):
    """Thin QR of V with the triangular factor folded into U (same product)."""
    if L.rank == 0:
        return L
    Q, R = _thin_qr(L.V)
    return LowRank(L.U @ R.T, Q)
