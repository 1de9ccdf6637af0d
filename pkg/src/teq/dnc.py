"""Divide-and-conquer solvers for ``sum_t X x_t A_t = B`` with HODLR coefficients.

Every recursion step splits the dominant modes in two, solves the ``2**r``
block-diagonal subproblems recursively and corrects the result with one
low-rank update equation per split mode.  The update for mode ``j`` reads
``A_j dX + dX (sum_{t != j} A_t) = -A_j^off X_(j)``; its second coefficient
is a Kronecker sum, whose shifted systems are solved by the same recursion
with one mode fewer.

Internally the tensors carry one extra trailing "batch" axis whose
coefficient is the zero matrix.  It is never split, and it lets all the
columns of a nested shifted solve travel through the recursion together.
"""

import math
import os
import threading
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .hmatrix import DENSE_SPECTRUM_BELOW, HMatrix, hmatrix_from_dense, estimate_spectra
from .lowrank import LowRank, recompress
from .sylv_lowrank import ek_solve, fadi, rk_solve
from .tensor import DimensionError, matricize
from .zolotarev import (IntervalPair, shift_count_adi, shift_count_rk,
                        shift_count_tensor, zolotarev_shifts)

BACKENDS = ("fadi", "rk", "ek")
SHIFT_POLICIES = ("a_priori", "fixed_s")
MAX_RECURSION = 200
RHS_RECOMPRESS_TOL = 1e-14


class SingularOperatorError(np.linalg.LinAlgError):
    """The Kronecker-sum operator has a nonpositive eigenvalue."""


@dataclass
class SolverConfig:
    """Parameters of the divide-and-conquer solvers.

    Attributes
    ----------
    eps : float
        Target relative residual of every update equation.
    n_min : int
        Blocks of at most this size are solved densely.
    backend : {"fadi", "rk", "ek"}
        Low-rank solver for the update equations.
    parallel : bool
        Run independent subproblems of the outermost level on a thread pool
        (size capped by the ``TEQ_THREADS`` environment variable).
    shift_policy : {"a_priori", "fixed_s"}
        ``a_priori`` picks the shift count per update equation from its
        spectral intervals; ``fixed_s`` uses `fixed_s` steps everywhere (or
        the tensor shift count when `fixed_s` is None).
    recompress_factor : float
        Update solutions are truncated so that the residual moves by at
        most ``recompress_factor * eps`` relative to the update right-hand side.
    nested_dense_below : int
        Shifted Kronecker-sum solves nested inside an update whose modes all
        have at most this size use the diagonalization of every mode instead
        of further recursion. 0 recurses down to `n_min` everywhere.
    """

    eps: float = 1e-6
    n_min: int = 64
    backend: str = "fadi"
    parallel: bool = False
    shift_policy: str = "a_priori"
    fixed_s: int = None
    recompress_factor: float = 0.1
    nested_dense_below: int = DENSE_SPECTRUM_BELOW

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.n_min < 2:
            raise ValueError(f"n_min must be at least 2, got {self.n_min}")
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        if self.shift_policy not in SHIFT_POLICIES:
            raise ValueError(f"unknown shift policy {self.shift_policy!r}")
        if self.fixed_s is not None and self.fixed_s < 1:
            raise ValueError("fixed_s must be positive")
        if not 0 < self.recompress_factor <= 1:
            raise ValueError("recompress_factor must lie in (0, 1]")
        if self.nested_dense_below < 0:
            raise ValueError("nested_dense_below must be nonnegative")

    @property
    def recompress_tol(self):
        return self.eps * self.recompress_factor


@dataclass
class SylvesterProblem:
    """Coefficients, right-hand side and cached spectra of a tensor Sylvester equation."""

    coeffs: list
    rhs: np.ndarray
    spectra: list = None

    def __post_init__(self):
        self.rhs = np.asarray(self.rhs, dtype=float)
        if len(self.coeffs) != self.rhs.ndim:
            raise DimensionError(f"{len(self.coeffs)} coefficients for a {self.rhs.ndim}-mode tensor")
        for t, A in enumerate(self.coeffs):
            n = A.n if hasattr(A, "n") else np.shape(A)[0]
            if n != self.rhs.shape[t]:
                raise DimensionError(f"mode {t}: coefficient of size {n}, right-hand side size {self.rhs.shape[t]}")

    @property
    def d(self):
        return self.rhs.ndim

    @property
    def dims(self):
        return self.rhs.shape

    def prepare(self, n_min=64):
        """Convert dense coefficients and estimate all block spectra."""
        self.coeffs = [_as_hmatrix(A, n_min) for A in self.coeffs]
        if self.spectra is None:
            self.spectra = [estimate_spectra(A) for A in self.coeffs]
        return self


@dataclass
class SolveStats:
    """Counters and per-phase wall times of one solve."""

    phases: dict = field(default_factory=lambda: {"dense": 0.0, "lowrank": 0.0,
                                                  "rhs": 0.0, "spectra": 0.0})
    total: float = 0.0
    updates: int = 0
    max_update_rank: int = 0
    max_solution_rank: int = 0
    shift_counts: list = field(default_factory=list)
    max_depth: int = 0
    warnings: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add_time(self, phase, dt):
        with self._lock:
            self.phases[phase] += dt

    def as_dict(self):
        return {"phases": dict(self.phases), "total": self.total, "updates": self.updates,
                "max_update_rank": self.max_update_rank,
                "max_solution_rank": self.max_solution_rank,
                "shift_counts": sorted(set(self.shift_counts)), "max_depth": self.max_depth,
                "warnings": list(self.warnings)}


class _Context:
    def __init__(self, cfg, stats, record, executor=None):
        self.cfg = cfg
        self.stats = stats
        self.record = record
        self.executor = executor

    def nested(self):
        return _Context(self.cfg, self.stats, False, None)

    def timer(self, phase):
        return _Timer(self, phase)


class _Timer:
    def __init__(self, ctx, phase):
        self.ctx, self.phase = ctx, phase

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        if self.ctx.record:
            self.ctx.stats.add_time(self.phase, time.perf_counter() - self.t0)


def thread_count():
    env = os.environ.get("TEQ_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"TEQ_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _as_hmatrix(A, n_min):
    if isinstance(A, HMatrix):
        return A
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return hmatrix_from_dense(A, n_min=n_min, tol=1e-14)


# ---------------------------------------------------------------- dense base case

def _eig(A):
    if isinstance(A, HMatrix):
        return A.eigh()
    return np.linalg.eigh(np.asarray(A, dtype=float))


def _as3(X, t):
    """View of a C-ordered tensor as ``(before, n_t, after)``."""
    sh = X.shape
    return X.reshape(math.prod(sh[:t]), sh[t], -1)


def _mode_mul(M, X, t):
    """Mode-`t` product of a C-contiguous tensor (batched matmul, no transposes)."""
    sh = list(X.shape)
    X3 = _as3(X, t)
    pre, n, post = X3.shape
    sh[t] = M.shape[0]
    if pre == 1:
        return (M @ X3[0]).reshape(sh)
    if post == 1:
        return (X3[:, :, 0] @ M.T).reshape(sh)
    if post >= n:
        return np.matmul(M, X3).reshape(sh)
    # few trailing entries: one large product is faster than many small ones
    Y = X3.transpose(0, 2, 1).reshape(pre * post, n) @ M.T
    return np.ascontiguousarray(Y.reshape(pre, post, -1).transpose(0, 2, 1)).reshape(sh)


def _diag_solve(coeffs, B):
    """Base case on a tensor with a trailing batch axis."""
    d = len(coeffs)
    eig = [_eig(A) for A in coeffs]
    X = B
    for t, (_, S) in enumerate(eig):
        X = _mode_mul(S.T, X, t)
    D = np.zeros(B.shape[:d] + (1,))
    for t, (w, _) in enumerate(eig):
        shape = [1] * (d + 1)
        shape[t] = len(w)
        D = D + w.reshape(shape)
    low = sum(float(w[0]) for w, _ in eig)
    if low <= 0:
        raise SingularOperatorError(f"eigenvalue sum {low:.3e} is not positive")
    X = X / D
    for t, (_, S) in enumerate(eig):
        X = _mode_mul(S, X, t)
    return np.ascontiguousarray(X)


def lyapnd_diag(coeffs, B):
    """Solve ``sum_t X x_t A_t = B`` by diagonalizing every coefficient.

    Parameters
    ----------
    coeffs : list of symmetric matrices (dense arrays or HMatrix)
    B : ndarray with ``len(coeffs)`` modes

    Raises
    ------
    SingularOperatorError
        If some sum of eigenvalues is not positive.
    """
    B = np.asarray(B, dtype=float)
    if len(coeffs) != B.ndim:
        raise DimensionError(f"{len(coeffs)} coefficients for a {B.ndim}-mode tensor")
    for t, A in enumerate(coeffs):
        n = A.n if isinstance(A, HMatrix) else np.shape(A)[0]
        if n != B.shape[t]:
            raise DimensionError(f"mode {t}: coefficient of size {n}, tensor size {B.shape[t]}")
    return _diag_solve(coeffs, B[..., None])[..., 0]


# ---------------------------------------------------------------- operators

def _apply(coeffs, X):
    """``sum_t X x_t A_t`` on a tensor with a trailing batch axis."""
    out = np.zeros_like(X)
    for t, A in enumerate(coeffs):
        X3 = _as3(X, t)
        if t == 0:
            out += A.matvec(X3[0]).reshape(X.shape)
        else:
            # bring mode t to the rows, apply, and put it back
            Y = A.matvec(X3.transpose(1, 0, 2).reshape(X3.shape[1], -1))
            out += Y.reshape(X3.shape[1], X3.shape[0], -1).transpose(1, 0, 2).reshape(X.shape)
    return out


class _KronSumOperator:
    """``sum_{t} A_t`` (plus a zero batch coefficient) acting on matricized columns."""

    def __init__(self, coeffs, dims, batch, ctx):
        self.coeffs = coeffs
        self.dims = tuple(dims)
        self.batch = batch
        self.ctx = ctx
        self.n = int(np.prod(self.dims)) * batch

    def _tensor(self, B):
        r = B.shape[1]
        return np.ascontiguousarray(B.reshape(self.dims + (self.batch * r,)))

    def matvec(self, B):
        return _apply(self.coeffs, self._tensor(B)).reshape(self.n, -1)

    def solve(self, B, sigma=0.0):
        X = _shifted_dnc(self.coeffs, sigma, self._tensor(B), self.ctx)
        return X.reshape(self.n, -1)

    def interval(self):
        lo = sum(A.interval()[0] for A in self.coeffs)
        hi = sum(A.interval()[1] for A in self.coeffs)
        return lo, hi


def _absorb_shift(coeffs, sigma):
    if sigma == 0.0:
        return list(coeffs)
    lows = [A.interval()[0] for A in coeffs]
    k = lows.index(max(lows))
    out = list(coeffs)
    out[k] = out[k].shifted(sigma)
    return out


def _shifted_dnc(coeffs, sigma, B, ctx, depth=0):
    if len(coeffs) == 1:
        n = B.shape[0]
        return coeffs[0].solve(B.reshape(n, -1), sigma).reshape(B.shape)
    coeffs = _absorb_shift(coeffs, sigma)
    if all(A.n <= ctx.cfg.nested_dense_below for A in coeffs):
        # small nested systems: cached eigendecompositions beat further recursion
        return _diag_solve(coeffs, B)
    return _dnc(coeffs, B, ctx.nested(), depth)


# ---------------------------------------------------------------- shifts

def _shift_count(pair, cfg, d_eff):
    if cfg.shift_policy == "fixed_s":
        if cfg.fixed_s is not None:
            return cfg.fixed_s
        alpha = min(pair.a1, pair.a2)
        beta = max(pair.b1, pair.b2)
        return shift_count_tensor(cfg.eps, max(d_eff, 3), alpha, beta)
    if cfg.backend == "rk":
        return shift_count_rk(cfg.eps, pair)
    return shift_count_adi(cfg.eps, pair)


@dataclass
class PlanEntry:
    level: int
    modes: tuple
    block: tuple
    pair: IntervalPair
    shifts: object

    @property
    def s(self):
        return self.shifts.s


def _update_pair(A, K_interval):
    a1, b1 = A.interval()
    a2, b2 = K_interval
    return IntervalPair(a1, b1, a2, b2)


# ---------------------------------------------------------------- recursion

def _splittable(A, n_min):
    return A.n > n_min and not A.is_leaf


def _split_modes(coeffs, n_min, balanced):
    cand = [t for t, A in enumerate(coeffs) if _splittable(A, n_min)]
    if not cand:
        return []
    if balanced:
        return cand
    nmax = max(coeffs[t].n for t in cand)
    # stable order: larger modes first, ties by mode index
    dom = [t for t in cand if 2 * coeffs[t].n >= nmax]
    return sorted(dom, key=lambda t: (-coeffs[t].n, t))


def _subproblems(coeffs, split):
    """Child coefficient lists and index slices for every block combination."""
    parts = []
    for t, A in enumerate(coeffs):
        if t in split:
            c1, c2 = A.children
            parts.append([(c1, slice(0, c1.n)), (c2, slice(c1.n, A.n))])
        else:
            parts.append([(A, slice(0, A.n))])
    out = []
    for combo in product(*parts):
        out.append(([c for c, _ in combo], tuple(s for _, s in combo)))
    return out


def _truncate(sol, rhs, pair, cfg):
    """Recompress an update so that it moves the residual by at most ``eps/10 * ||rhs||``.

    Since ``||A1 E + E A2|| <= (b1 + b2) ||E||``, truncating ``E`` to an
    absolute Frobenius error of ``eps/10 * ||rhs|| / (b1 + b2)`` is enough.
    """
    m, n = sol.shape
    if 2 * sol.rank >= min(m, n):
        # no storage or densification cost to save
        return sol
    nrm = sol.norm()
    if nrm == 0.0:
        return sol
    tol = cfg.recompress_tol * rhs.norm() / ((pair.b1 + pair.b2) * nrm)
    return recompress(sol, min(tol, 1.0))


def _offdiag_left(H):
    # A^off = [[0, U V^T], [V U^T, 0]]
    U, V = H.offdiag
    m, r = H.split, U.shape[1]
    left = np.zeros((H.n, 2 * r))
    left[:m, :r] = -U
    left[m:, r:] = -V
    return left


def _matrix_rhs(M, H):
    """``-A^off M`` in factored form for a matrix `M` (any strides)."""
    U, V = H.offdiag
    m, r = H.split, U.shape[1]
    right = np.empty((M.shape[1], 2 * r))
    right[:, :r] = (V.T @ M[m:]).T
    right[:, r:] = (U.T @ M[:m]).T
    return LowRank(_offdiag_left(H), right)


def _mode_rhs(X, H, j, compress=True):
    """``-A_j^off X_(j)`` in factored form.

    Columns are ordered like ``moveaxis(X, j, 0).reshape(n_j, -1)``.
    """
    U, V = H.offdiag
    m, r = H.split, U.shape[1]
    left = _offdiag_left(H)
    X3 = _as3(X, j)
    R = np.empty((X3.shape[0], 2 * r, X3.shape[2]))
    R[:, :r] = np.matmul(V.T, X3[:, m:])
    R[:, r:] = np.matmul(U.T, X3[:, :m])
    right = R.transpose(0, 2, 1).reshape(-1, 2 * r)
    L = LowRank(left, right)
    return recompress(L, RHS_RECOMPRESS_TOL) if compress else L


def _solve_update(A1, A2, rhs, pair, ctx, d_eff):
    cfg = ctx.cfg
    if cfg.backend == "ek":
        res = ek_solve(A1, A2, rhs, tol=cfg.eps, max_iter=50)
        s = res.iterations
        sol = res.solution
    else:
        s = _shift_count(pair, cfg, d_eff)
        shifts = zolotarev_shifts(s, pair)
        if cfg.backend == "rk":
            sol = rk_solve(A1, A2, rhs, shifts)
        else:
            sol = fadi(A1, A2, rhs, shifts)
    sol = _truncate(sol, rhs, pair, cfg)
    if ctx.record:
        st = ctx.stats
        with st._lock:
            st.updates += 1
            st.shift_counts.append(s)
            st.max_update_rank = max(st.max_update_rank, rhs.rank)
            st.max_solution_rank = max(st.max_solution_rank, sol.rank)
    return sol


def _dnc(coeffs, B, ctx, depth=0, balanced=False, out=None):
    """Solve with a trailing batch axis on `B` (shape ``dims + (m,)``).

    Sub-solutions are written into views of `out`, so the recursion does
    not copy the tensor once per level.
    """
    if depth > MAX_RECURSION:
        raise RecursionError("divide-and-conquer recursion is too deep")
    if ctx.record:
        ctx.stats.max_depth = max(ctx.stats.max_depth, depth)
    cfg = ctx.cfg
    d = len(coeffs)
    split = _split_modes(coeffs, cfg.n_min, balanced)
    X = np.empty_like(B) if out is None else out
    if not split:
        with ctx.timer("dense"):
            X[...] = _diag_solve(coeffs, B)
        return X

    # block-diagonal part
    subs = _subproblems(coeffs, split)

    def _run(sub):
        cs, sl = sub
        _dnc(cs, B[sl], ctx, depth + 1, balanced, X[sl])

    if ctx.executor is not None and depth == 0:
        list(ctx.executor.map(_run, subs))
    else:
        for sub in subs:
            _run(sub)

    active = [j for j in split if coeffs[j].rank > 0]
    if not active:
        return X

    batch = B.shape[-1]
    if d == 2 and batch == 1 and len(active) == 2:
        # one update for both modes: A1 dX + dX A2 = -(A1off X + X A2off)
        with ctx.timer("rhs"):
            X2 = X[:, :, 0]
            r1 = _matrix_rhs(X2, coeffs[0])
            r2 = _matrix_rhs(X2.T, coeffs[1])
            rhs = recompress(r1 + r2.T(), RHS_RECOMPRESS_TOL)
        pair = _update_pair(coeffs[0], coeffs[1].interval())
        with ctx.timer("lowrank"):
            sol = _solve_update(coeffs[0], coeffs[1], rhs, pair, ctx, 2)
        with ctx.timer("rhs"):
            X2 += sol.U @ sol.V.T
        return X

    # the per-mode updates below reshape X, which needs contiguous storage
    Xv = X
    if not X.flags.c_contiguous:
        X = np.ascontiguousarray(X)

    def _update(j):
        rest = [A for t, A in enumerate(coeffs) if t != j]
        dims = tuple(A.n for A in rest)
        with ctx.timer("rhs"):
            rhs = _mode_rhs(X, coeffs[j], j, compress=False)
        if rhs.rank == 0:
            return j, None
        K = _KronSumOperator(rest, dims, batch, ctx)
        pair = _update_pair(coeffs[j], K.interval())
        with ctx.timer("lowrank"):
            sol = _solve_update(coeffs[j], K, rhs, pair, ctx, d)
        return j, sol

    if ctx.executor is not None and depth == 0:
        updates = list(ctx.executor.map(_update, active))
    else:
        updates = [_update(j) for j in active]
    with ctx.timer("rhs"):
        for j, sol in updates:
            if sol is None or sol.rank == 0:
                continue
            X3 = _as3(X, j)
            X3 += (sol.U @ sol.V.T).reshape(X3.shape[1], X3.shape[0], -1).transpose(1, 0, 2)
    if X is not Xv:
        Xv[...] = X
    return Xv


# ---------------------------------------------------------------- public API

def _check_accuracy_conditions(coeffs, cfg, stats):
    lo = sum(A.interval()[0] for A in coeffs)
    hi = sum(A.interval()[1] for A in coeffs)
    kappa = hi / lo
    ell = max(A.depth for A in coeffs)
    msgs = []
    if kappa * cfg.eps >= 1:
        msgs.append(f"kappa*eps = {kappa * cfg.eps:.2e} >= 1: the residual bound does not apply")
    elif ell > 0 and kappa * cfg.eps >= 2.0 / ell:
        msgs.append(f"kappa*eps = {kappa * cfg.eps:.2e} >= 2/depth: the residual bound does not apply")
    for m in msgs:
        warnings.warn(m, RuntimeWarning, stacklevel=3)
        stats.warnings.append(m)
    return kappa


def _solve_entry(coeffs, B, cfg, stats, balanced=False):
    cfg = cfg or SolverConfig()
    stats = stats if stats is not None else SolveStats()
    B = np.asarray(B, dtype=float)
    if len(coeffs) != B.ndim:
        raise DimensionError(f"{len(coeffs)} coefficients for a {B.ndim}-mode tensor")
    t0 = time.perf_counter()
    coeffs = [_as_hmatrix(A, cfg.n_min) for A in coeffs]
    for t, A in enumerate(coeffs):
        if A.n != B.shape[t]:
            raise DimensionError(f"mode {t}: coefficient of size {A.n}, tensor size {B.shape[t]}")

    # size-one modes only contribute a scalar shift
    keep = [t for t, A in enumerate(coeffs) if A.n > 1]
    sigma = sum(float(A.dense()[0, 0]) for t, A in enumerate(coeffs) if A.n == 1)
    if not keep:
        X = B / sigma if sigma > 0 else None
        if X is None:
            raise SingularOperatorError("operator is not positive definite")
        stats.total = time.perf_counter() - t0
        return X
    active = [coeffs[t] for t in keep]
    Bk = np.ascontiguousarray(B.reshape(tuple(B.shape[t] for t in keep) + (1,)))

    ts = time.perf_counter()
    for A in active:
        estimate_spectra(A)
    stats.add_time("spectra", time.perf_counter() - ts)
    if sigma:
        active = _absorb_shift(active, sigma)
    _check_accuracy_conditions(active, cfg, stats)

    executor = None
    if cfg.parallel and thread_count() > 1:
        executor = ThreadPoolExecutor(max_workers=thread_count())
    try:
        ctx = _Context(cfg, stats, True, executor)
        if len(active) == 1:
            with ctx.timer("dense"):
                X = active[0].solve(Bk[..., 0])[..., None]
        else:
            X = _dnc(active, Bk, ctx, 0, balanced)
    finally:
        if executor is not None:
            executor.shutdown()
    stats.total = time.perf_counter() - t0
    return X.reshape(B.shape)


def lyapnd_dnc(coeffs, B=None, cfg=None, stats=None):
    """Divide-and-conquer solver for ``sum_t X x_t A_t = B``.

    Parameters
    ----------
    coeffs : list of HMatrix or dense SPD arrays, or a SylvesterProblem
        One coefficient per mode.  Dense arrays are compressed with
        ``cfg.n_min`` as leaf size.
    B : ndarray
        Right-hand side (ignored when a SylvesterProblem is passed).
    cfg : SolverConfig, optional
    stats : SolveStats, optional
        Filled with timings, ranks and shift counts.

    Returns
    -------
    ndarray
        Approximate solution with the shape of `B`.
    """
    if isinstance(coeffs, SylvesterProblem):
        B = coeffs.rhs
        coeffs = coeffs.coeffs
    return _solve_entry(list(coeffs), B, cfg, stats)


def lyap2d_dnc(A1, A2, B, cfg=None, stats=None):
    """Solve ``A1 X + X A2 = B``; unbalanced sizes split the larger mode alone."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise DimensionError("a matrix right-hand side is required")
    return _solve_entry([A1, A2], B, cfg, stats)


def lyap2d_dnc_balanced(A1, A2, B, cfg=None, stats=None):
    """Solve ``A1 X + X A2 = B`` splitting both modes at every level."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise DimensionError("a matrix right-hand side is required")
    return _solve_entry([A1, A2], B, cfg, stats, balanced=True)


def nested_shifted_solve(coeffs, sigma, rhs, cfg=None):
    """Solve ``(A_1 (+) ... (+) A_k + sigma I) x = rhs`` for each column of `rhs`.

    Columns are column-major vectorizations of tensors of shape
    ``(A_1.n, ..., A_k.n)``.  The shift is added to the coefficient with the
    largest lower spectral bound.
    """
    cfg = cfg or SolverConfig()
    coeffs = [_as_hmatrix(A, cfg.n_min) for A in coeffs]
    rhs = np.asarray(rhs, dtype=float)
    vector = rhs.ndim == 1
    R = rhs[:, None] if vector else rhs
    dims = tuple(A.n for A in coeffs)
    N = int(np.prod(dims))
    if R.shape[0] != N:
        raise DimensionError(f"right-hand side has {R.shape[0]} rows, operator size is {N}")
    for A in coeffs:
        estimate_spectra(A)
    if sigma < 0 and sum(A.interval()[0] for A in coeffs) + sigma <= 0:
        raise SingularOperatorError("shifted operator is not positive definite")
    # column-major vec -> tensor with trailing batch axis
    T = np.ascontiguousarray(R.reshape(dims[::-1] + (R.shape[1],)).transpose(
        tuple(range(len(dims) - 1, -1, -1)) + (len(dims),)))
    ctx = _Context(cfg, SolveStats(), False)
    X = _shifted_dnc(coeffs, sigma, T, ctx)
    out = X.transpose(tuple(range(len(dims) - 1, -1, -1)) + (len(dims),)).reshape(N, -1)
    return out[:, 0] if vector else out


def update_rhs_assembly(X1, H, j):
    """Factored right-hand side ``-A_j^off X1_(j)`` of the mode-`j` update equation.

    Columns follow :func:`teq.tensor.matricize`.  The result is recompressed
    and its ``V`` factor has orthonormal columns.
    """
    X1 = np.asarray(X1, dtype=float)
    if H.n != X1.shape[j]:
        raise DimensionError(f"mode {j}: coefficient of size {H.n}, tensor size {X1.shape[j]}")
    if H.is_leaf:
        return LowRank.zeros(H.n, X1.size // H.n)
    off = _top_factor(H)
    Xj = matricize(X1, j)
    return recompress(LowRank(-off.U, Xj.T @ off.V), RHS_RECOMPRESS_TOL)


def _top_factor(H):
    from .hmatrix import top_offdiag_factor
    return top_offdiag_factor(H)


def level_shift_plan(problem, cfg=None):
    """Shift sets of every update equation of the outermost recursion.

    Returns a list of :class:`PlanEntry`, ordered by recursion level.  The
    intervals come from the cached block spectra.
    """
    cfg = cfg or SolverConfig()
    if isinstance(problem, SylvesterProblem):
        coeffs = problem.coeffs
    else:
        coeffs = problem
    coeffs = [_as_hmatrix(A, cfg.n_min) for A in coeffs]
    out = []

    def _walk(cs, offsets, level):
        split = _split_modes(cs, cfg.n_min, False)
        if not split:
            return
        block = tuple((o, o + A.n) for o, A in zip(offsets, cs))
        active = [j for j in split if cs[j].rank > 0]
        if len(cs) == 2 and len(active) == 2:
            pair = _update_pair(cs[0], cs[1].interval())
            out.append(PlanEntry(level, (0, 1), block, pair,
                                 zolotarev_shifts(_shift_count(pair, cfg, 2), pair)))
        else:
            for j in active:
                rest = [A for t, A in enumerate(cs) if t != j]
                K = (sum(A.interval()[0] for A in rest), sum(A.interval()[1] for A in rest))
                pair = _update_pair(cs[j], K)
                out.append(PlanEntry(level, (j,), block, pair,
                                     zolotarev_shifts(_shift_count(pair, cfg, len(cs)), pair)))
        for sub, sl in _subproblems(cs, split):
            _walk(sub, [o + s.start for o, s in zip(offsets, sl)], level + 1)

    _walk(coeffs, [0] * len(coeffs), 0)
    out.sort(key=lambda e: e.level)
    return out


def solve(problem, cfg=None):
    """Solve a :class:`SylvesterProblem`; returns ``(X, SolveStats)``."""
    stats = SolveStats()
    X = lyapnd_dnc(problem.coeffs, problem.rhs, cfg, stats)
    return X, stats


__all__ = ["SolverConfig", "SylvesterProblem", "SolveStats", "PlanEntry",
           "SingularOperatorError", "lyapnd_diag", "lyap2d_dnc", "lyap2d_dnc_balanced",
           "lyapnd_dnc", "nested_shifted_solve", "update_rhs_assembly", "level_shift_plan",
           "solve", "thread_count"]
