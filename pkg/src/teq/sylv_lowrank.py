"""Solvers for Sylvester equations ``A1 X + X A2 = U V^T`` with low-rank right-hand side.

The coefficients are passed as operators exposing ``n``, ``matvec(X)`` and
``solve(B, sigma)`` (which solves ``(A + sigma I) X = B``).  :class:`HMatrix`
objects qualify directly; dense arrays are wrapped by :func:`as_operator`.

Shift convention: zeros ``p_j`` live in the spectral interval of ``A1`` and
poles ``q_j`` in the negated interval of ``A2``, so every shifted system
``A1 - q_j I`` and ``A2 + p_j I`` is SPD.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .lowrank import LowRank, orthonormalize_right, recompress

DEFLATION_TOL = 1e-12


class SolverFailure(RuntimeError):
    """A shifted solve failed inside a low-rank iteration."""

    def __init__(self, step, cause):
        self.step = step
        super().__init__(f"shifted solve failed at step {step}: {cause}")


class DenseOperator:
    """Dense symmetric matrix with a cached eigendecomposition for shifted solves."""

    def __init__(self, A):
        self.A = np.asarray(A, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise ValueError("a square matrix is required")
        self._eig = None

    @property
    def n(self):
        return self.A.shape[0]

    def dense(self):
        return self.A

    def matvec(self, X):
        return self.A @ X

    def eigh(self):
        if self._eig is None:
            self._eig = np.linalg.eigh(self.A)
        return self._eig

    def solve(self, B, sigma=0.0):
        w, S = self.eigh()
        d = w + sigma
        if np.min(d) <= 0:
            raise np.linalg.LinAlgError(f"shifted matrix is not positive definite (min {np.min(d):.3e})")
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            return S @ ((S.T @ B) / d)
        return S @ ((S.T @ B) / d[:, None])


def as_operator(A):
    if hasattr(A, "solve") and hasattr(A, "matvec"):
        return A
    return DenseOperator(A)


def _solve(op, B, sigma, step):
    try:
        return op.solve(B, sigma)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverFailure(step, exc) from exc


def _check_rhs(A1, A2, rhs):
    if rhs.shape != (A1.n, A2.n):
        raise ValueError(f"right-hand side of shape {rhs.shape} for coefficients "
                         f"of sizes {A1.n} and {A2.n}")


# ---------------------------------------------------------------- fADI

def _y_sequence(A2, V, shifts):
    p, q = shifts.p, shifts.q
    Y = -_solve(A2, V, p[0], 1)
    out = [Y]
    for j in range(1, shifts.s):
        Y = Y + (q[j - 1] - p[j]) * _solve(A2, Y, p[j], j + 1)
        out.append(Y)
    return out


def _assemble(Ws, Ys, shifts):
    w = shifts.q - shifts.p
    U = np.hstack([wj * Wj for wj, Wj in zip(w, Ws)])
    V = np.hstack(Ys)
    return LowRank(U, V)


def fadi(A1, A2, rhs, shifts, tol=None, orthonormalize=True):
    """Factored ADI for ``A1 X + X A2 = rhs``.

    Parameters
    ----------
    A1, A2 : operators or dense arrays
    rhs : LowRank
    shifts : ShiftSet
    tol : float, optional
        If given, the result is recompressed to this relative accuracy.
    orthonormalize : bool
        Orthonormalize ``rhs.V`` first (does not change the product).

    Returns
    -------
    LowRank
        ``sum_j (q_j - p_j) W_j Y_j^T`` before optional recompression, so its
        rank is at most ``s * rank(rhs)``.
    """
    A1, A2 = as_operator(A1), as_operator(A2)
    _check_rhs(A1, A2, rhs)
    if rhs.rank == 0:
        return LowRank.zeros(*rhs.shape)
    if orthonormalize:
        rhs = orthonormalize_right(rhs)
    p, q = shifts.p, shifts.q
    W = _solve(A1, rhs.U, -q[0], 1)
    Ws = [W]
    for j in range(1, shifts.s):
        W = W + (q[j] - p[j - 1]) * _solve(A1, W, -q[j], j + 1)
        Ws.append(W)
    X = _assemble(Ws, _y_sequence(A2, rhs.V, shifts), shifts)
    return recompress(X, tol) if tol is not None else X


def fadi_residual_exact(A1, A2, rhs, shifts=None):
    """Frobenius norm of the closed-form fADI residual ``r_s(A1) U V^T r_s(-A2)^{-1}``.

    Dense diagnostic; ``shifts=None`` means zero steps.
    """
    A1 = np.asarray(A1.dense() if hasattr(A1, "dense") else A1, dtype=float)
    A2 = np.asarray(A2.dense() if hasattr(A2, "dense") else A2, dtype=float)
    C = rhs.dense()
    if shifts is None or shifts.s == 0:
        return float(np.linalg.norm(C))
    w1, S1 = np.linalg.eigh(A1)
    w2, S2 = np.linalg.eigh(A2)
    left = S1 @ (shifts.evaluate(w1)[:, None] * (S1.T @ C))
    R = (left @ S2) / shifts.evaluate(-w2)[None, :] @ S2.T
    return float(np.linalg.norm(R))


@dataclass
class InexactnessProbe:
    """Perturbation injector for the ``W`` recursion of fADI.

    Each shifted solve for ``A1`` is replaced by the exact solve of a
    right-hand side perturbed by ``eta_j`` with ``||eta_j||_F = eps_inject * ||U||_F``.
    """

    eps_inject: float
    seed: int = 0
    eta_norms: list = field(default_factory=list)
    W: list = field(default_factory=list)

    def __post_init__(self):
        if self.eps_inject < 0:
            raise ValueError("eps_inject must be nonnegative")
        self._rng = np.random.default_rng(self.seed)

    def perturbation(self, shape, scale):
        if self.eps_inject == 0:
            eta = np.zeros(shape)
        else:
            eta = self._rng.standard_normal(shape)
            eta *= self.eps_inject * scale / np.linalg.norm(eta)
        self.eta_norms.append(float(np.linalg.norm(eta)))
        return eta


def fadi_inexact(A1, A2, rhs, shifts, probe, tol=None):
    """fADI whose ``A1`` solves are perturbed as ``(A1 - q_{j+1} I) W_{j+1} = (A1 - p_j I) W_j + eta_{j+1}``.

    The ``A2`` recursion is exact.  Returns the low-rank solution and the
    probe, whose ``W`` list holds the perturbed iterates.
    """
    A1, A2 = as_operator(A1), as_operator(A2)
    _check_rhs(A1, A2, rhs)
    if rhs.rank == 0:
        return LowRank.zeros(*rhs.shape), probe
    rhs = orthonormalize_right(rhs)
    U = rhs.U
    scale = np.linalg.norm(U)
    p, q = shifts.p, shifts.q
    if probe.eps_inject == 0:
        # same arithmetic as the exact recursion
        W = _solve(A1, U, -q[0], 1)
        Ws = [W]
        for j in range(1, shifts.s):
            W = W + (q[j] - p[j - 1]) * _solve(A1, W, -q[j], j + 1)
            Ws.append(W)
        probe.eta_norms.extend([0.0] * shifts.s)
    else:
        W = _solve(A1, U + probe.perturbation(U.shape, scale), -q[0], 1)
        Ws = [W]
        for j in range(1, shifts.s):
            rhs_j = A1.matvec(W) - p[j - 1] * W + probe.perturbation(U.shape, scale)
            W = _solve(A1, rhs_j, -q[j], j + 1)
            Ws.append(W)
    probe.W = Ws
    X = _assemble(Ws, _y_sequence(A2, rhs.V, shifts), shifts)
    return (recompress(X, tol) if tol is not None else X), probe


# ---------------------------------------------------------------- projection methods

def _extend_basis(Q, block):
    """Orthogonalize `block` against `Q` (twice) and append the surviving directions."""
    if block.shape[1] == 0:
        return Q, block
    ref = max(np.linalg.norm(block, axis=0).max(), np.finfo(float).tiny)
    if Q.shape[1]:
        for _ in range(2):
            block = block - Q @ (Q.T @ block)
    Z, R, _ = sla.qr(block, mode="economic", pivoting=True, check_finite=False)
    keep = int(np.count_nonzero(np.abs(np.diag(R)) > DEFLATION_TOL * ref))
    Z = Z[:, :keep]
    if Q.shape[1] and keep:
        Z = Z - Q @ (Q.T @ Z)
        Z, _ = np.linalg.qr(Z)
    return np.hstack([Q, Z]), Z


def _projected_solve(A1p, A2p, C):
    """Dense Sylvester solve ``A1p Y + Y A2p = C`` by diagonalization."""
    w1, S1 = np.linalg.eigh(0.5 * (A1p + A1p.T))
    w2, S2 = np.linalg.eigh(0.5 * (A2p + A2p.T))
    return S1 @ ((S1.T @ C @ S2) / (w1[:, None] + w2[None, :])) @ S2.T


def _galerkin(A1, A2, Q1, Q2, rhs):
    AQ1 = A1.matvec(Q1)
    AQ2 = A2.matvec(Q2)
    C = (Q1.T @ rhs.U) @ (Q2.T @ rhs.V).T
    Y = _projected_solve(Q1.T @ AQ1, Q2.T @ AQ2, C)
    return Y, AQ1, AQ2


def _galerkin_residual(AQ1, AQ2, Q1, Q2, Y, rhs):
    res = LowRank(np.hstack([AQ1 @ Y, Q1 @ Y, -rhs.U]),
                  np.hstack([Q2, AQ2, rhs.V]))
    return res.norm()


def rk_solve(A1, A2, rhs, shifts, tol=None):
    """Rational Krylov (Galerkin) solver for ``A1 X + X A2 = rhs``.

    The left space is spanned by ``U`` and ``(A1 - q_j I)^{-1} U``, the right
    one by ``V`` and ``(A2 + p_j I)^{-1} V``, with full reorthogonalization and
    deflation of dependent directions.
    """
    A1, A2 = as_operator(A1), as_operator(A2)
    _check_rhs(A1, A2, rhs)
    if rhs.rank == 0:
        return LowRank.zeros(*rhs.shape)
    Q1, Z1 = _extend_basis(np.zeros((A1.n, 0)), rhs.U)
    Q2, Z2 = _extend_basis(np.zeros((A2.n, 0)), rhs.V)
    for j in range(shifts.s):
        if Z1.shape[1]:
            Q1, Z1 = _extend_basis(Q1, _solve(A1, Z1, -shifts.q[j], j + 1))
        if Z2.shape[1]:
            Q2, Z2 = _extend_basis(Q2, _solve(A2, Z2, shifts.p[j], j + 1))
    Y, _, _ = _galerkin(A1, A2, Q1, Q2, rhs)
    X = LowRank(Q1 @ Y, Q2)
    return recompress(X, tol) if tol is not None else X


@dataclass
class EKResult:
    solution: LowRank
    converged: bool
    residuals: list
    iterations: int


def ek_solve(A1, A2, rhs, tol=1e-8, max_iter=50, recompress_tol=None):
    """Extended Krylov solver (shifts alternating between 0 and infinity).

    The residual of the Galerkin solution is computed from low-rank factors at
    every iteration; the iteration stops once it drops below ``tol * ||rhs||``.

    Returns
    -------
    EKResult
        ``converged`` is False if `max_iter` was reached first; the solution
        is then the iterate with the smallest residual.
    """
    A1, A2 = as_operator(A1), as_operator(A2)
    _check_rhs(A1, A2, rhs)
    if rhs.rank == 0:
        return EKResult(LowRank.zeros(*rhs.shape), True, [0.0], 0)
    rhs = orthonormalize_right(rhs)
    nrm = rhs.norm()
    Q1, P1 = _extend_basis(np.zeros((A1.n, 0)), rhs.U)
    Q2, P2 = _extend_basis(np.zeros((A2.n, 0)), rhs.V)
    N1, N2 = P1, P2
    residuals = []
    best = None
    for it in range(1, max_iter + 1):
        # one inverse and one direct block per side
        if N1.shape[1]:
            Q1, N1 = _extend_basis(Q1, _solve(A1, N1, 0.0, it))
        if P1.shape[1]:
            Q1, P1 = _extend_basis(Q1, A1.matvec(P1))
        if N2.shape[1]:
            Q2, N2 = _extend_basis(Q2, _solve(A2, N2, 0.0, it))
        if P2.shape[1]:
            Q2, P2 = _extend_basis(Q2, A2.matvec(P2))
        Y, AQ1, AQ2 = _galerkin(A1, A2, Q1, Q2, rhs)
        res = _galerkin_residual(AQ1, AQ2, Q1, Q2, Y, rhs) / nrm
        residuals.append(res)
        if best is None or res <= best[0]:
            best = (res, Q1 @ Y, Q2)
        if res <= tol:
            break
        if not (N1.shape[1] or P1.shape[1]) and not (N2.shape[1] or P2.shape[1]):
            break
    X = LowRank(best[1], best[2])
    if recompress_tol is not None:
        X = recompress(X, recompress_tol)
    return EKResult(X, best[0] <= tol, residuals, it)
