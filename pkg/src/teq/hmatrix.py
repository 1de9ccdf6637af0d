"""Hierarchical off-diagonal low-rank (HODLR) representation of SPD matrices.

Every internal node of a halving cluster tree stores its upper off-diagonal
block as ``A12 = U @ V.T`` (the lower block is ``V @ U.T`` by symmetry) and the
leaves store dense diagonal blocks.  Matrices built from a band also keep the
band of every diagonal block, which is used for banded Cholesky solves.

An :class:`HMatrix` is an immutable view ``A + shift * I`` of a node; shifting
is free and shares all structure and caches with the unshifted matrix.
"""

import threading
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .lowrank import LowRank

LANCZOS_STEPS = 30
WIDEN_LOW = 0.95
WIDEN_HIGH = 1.05
DENSE_SPECTRUM_BELOW = 64


class IndefiniteError(np.linalg.LinAlgError):
    """A shifted block turned out not to be positive definite."""

    def __init__(self, block, value):
        self.block = block
        self.value = value
        super().__init__(f"block {block[0]}:{block[1]} is not positive definite "
                         f"(smallest shifted eigenvalue {value:.3e})")


# ---------------------------------------------------------------- cluster trees

@dataclass
class ClusterNode:
    start: int
    stop: int
    level: int
    index: int
    children: tuple = ()

    @property
    def size(self):
        return self.stop - self.start

    @property
    def is_leaf(self):
        return not self.children


@dataclass
class ClusterTree:
    n: int
    n_min: int
    root: ClusterNode

    @property
    def depth(self):
        def _depth(node):
            return 0 if node.is_leaf else 1 + max(_depth(c) for c in node.children)
        return _depth(self.root)

    def leaves(self):
        out = []

        def _walk(node):
            if node.is_leaf:
                out.append(node)
            else:
                for c in node.children:
                    _walk(c)
        _walk(self.root)
        return out

    def level(self, h):
        """Nodes at level `h`; branches that end earlier contribute their leaf."""
        out = []

        def _walk(node):
            if node.level == h or node.is_leaf:
                out.append(node)
            else:
                for c in node.children:
                    _walk(c)
        _walk(self.root)
        return out


def build_cluster_tree(n, n_min):
    """Halving cluster tree: leaves have at most `n_min` indices."""
    if n < 1 or n_min < 1:
        raise ValueError("n and n_min must be positive")

    def _build(start, stop, level, index):
        node = ClusterNode(start, stop, level, index)
        if stop - start > n_min:
            mid = start + (stop - start + 1) // 2
            node.children = (_build(start, mid, level + 1, 2 * index),
                             _build(mid, stop, level + 1, 2 * index + 1))
        return node

    return ClusterTree(n, n_min, _build(0, n, 0, 0))


# ---------------------------------------------------------------- storage

@dataclass(eq=False)
class _Node:
    cluster: ClusterNode
    children: tuple = ()
    U: np.ndarray = None
    V: np.ndarray = None
    D: np.ndarray = None
    band: np.ndarray = None
    cache: dict = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def n(self):
        return self.cluster.size


def _band_matvec(ab, X):
    Y = ab[0][:, None] * X
    for k in range(1, ab.shape[0]):
        d = ab[k, :-k][:, None]
        Y[k:] += d * X[:-k]
        Y[:-k] += d * X[k:]
    return Y


def _band_to_dense(ab):
    n = ab.shape[1]
    A = np.diag(ab[0]).astype(float)
    for k in range(1, ab.shape[0]):
        A += np.diag(ab[k, :n - k], -k) + np.diag(ab[k, :n - k], k)
    return A


def _sub_band(ab, start, stop):
    sub = np.array(ab[:, start:stop], copy=True)
    m = stop - start
    for k in range(1, ab.shape[0]):
        sub[k, max(m - k, 0):] = 0.0
    return sub


class HMatrix:
    """Symmetric HODLR matrix, optionally shifted by a multiple of the identity."""

    __slots__ = ("_node", "shift", "tree", "truncated")

    def __init__(self, node, shift=0.0, tree=None, truncated=False):
        self._node = node
        self.shift = float(shift)
        self.tree = tree
        self.truncated = truncated

    def __repr__(self):
        kind = "banded" if self.is_banded else "hodlr"
        return (f"HMatrix(n={self.n}, depth={self.depth}, rank={self.hss_rank}, "
                f"{kind}, shift={self.shift:g})")

    # ---- structure
    @property
    def n(self):
        return self._node.n

    @property
    def start(self):
        return self._node.cluster.start

    @property
    def level(self):
        return self._node.cluster.level

    @property
    def index(self):
        return self._node.cluster.index

    @property
    def is_leaf(self):
        return not self._node.children

    @property
    def is_banded(self):
        return self._node.band is not None

    @property
    def children(self):
        return tuple(HMatrix(c, self.shift) for c in self._node.children)

    @property
    def split(self):
        """Size of the first child."""
        return self._node.children[0].n

    @property
    def offdiag(self):
        """Factors ``(U, V)`` of the upper off-diagonal block ``U @ V.T``."""
        return self._node.U, self._node.V

    @property
    def rank(self):
        return 0 if self.is_leaf else self._node.U.shape[1]

    @property
    def depth(self):
        if self.is_leaf:
            return 0
        return 1 + max(c.depth for c in self.children)

    @property
    def hss_rank(self):
        if self.is_leaf:
            return 0
        return max(self.rank, *(c.hss_rank for c in self.children))

    def shifted(self, sigma):
        """The matrix ``self + sigma * I``."""
        return HMatrix(self._node, self.shift + sigma, self.tree, self.truncated)

    @property
    def key(self):
        """Identity of the underlying block (ignores the shift)."""
        return id(self._node)

    # ---- dense algebra
    def _dense_unshifted(self):
        node = self._node
        if node.D is not None:
            return node.D
        if node.band is not None:
            return _band_to_dense(node.band)
        c1, c2 = node.children
        A11 = HMatrix(c1)._dense_unshifted()
        A22 = HMatrix(c2)._dense_unshifted()
        A12 = node.U @ node.V.T
        return np.block([[A11, A12], [A12.T, A22]])

    def dense(self):
        A = np.array(self._dense_unshifted(), dtype=float, copy=True)
        if self.shift:
            A[np.diag_indices_from(A)] += self.shift
        return A

    def matvec(self, X):
        """``(A + shift I) @ X`` for a vector or a block of columns."""
        X = np.asarray(X, dtype=float)
        vector = X.ndim == 1
        X2 = X[:, None] if vector else X
        if X2.shape[0] != self.n:
            raise ValueError(f"operand has {X2.shape[0]} rows, matrix has size {self.n}")
        Y = self._matvec(X2)
        if self.shift:
            Y += self.shift * X2
        return Y[:, 0] if vector else Y

    def _matvec(self, X):
        node = self._node
        if node.band is not None:
            return _band_matvec(node.band, X)
        if node.D is not None:
            return node.D @ X
        m = self.split
        c1, c2 = node.children
        Y = np.empty_like(X)
        Y[:m] = HMatrix(c1)._matvec(X[:m]) + node.U @ (node.V.T @ X[m:])
        Y[m:] = HMatrix(c2)._matvec(X[m:]) + node.V @ (node.U.T @ X[:m])
        return Y

    def eigh(self):
        """Eigendecomposition ``(w, S)`` of the shifted block (cached, dense)."""
        w, S, _ = self._eig()
        return w + self.shift, S

    def _eig(self):
        node = self._node
        ev = node.cache.get("eigh")
        if ev is None:
            with node.lock:
                ev = node.cache.get("eigh")
                if ev is None:
                    w, S = sla.eigh(self._dense_unshifted(), check_finite=False)
                    ev = (w, S, np.ascontiguousarray(S.T))
                    node.cache["eigh"] = ev
        return ev

    # ---- solves
    def solve(self, B, sigma=0.0):
        """Solve ``(A + shift I + sigma I) X = B``.

        Blocks of at most ``DENSE_SPECTRUM_BELOW`` rows use their cached
        eigendecomposition, which is cheapest when many shifts are applied.
        Larger banded matrices use a banded Cholesky factorization; otherwise
        the hierarchy is eliminated recursively with a Woodbury correction for
        the off-diagonal coupling.
        """
        B = np.asarray(B, dtype=float)
        vector = B.ndim == 1
        B2 = B[:, None] if vector else B
        if B2.shape[0] != self.n:
            raise ValueError(f"right-hand side has {B2.shape[0]} rows, matrix has size {self.n}")
        tau = self.shift + sigma
        if self.n <= DENSE_SPECTRUM_BELOW:
            X = self._eig_solve(B2, tau)
        elif self._node.band is not None:
            X = self._band_solve(B2, tau)
        else:
            X = self._hodlr_solve(B2, tau)
        return X[:, 0] if vector else X

    def _band_solve(self, B, tau):
        ab = np.array(self._node.band, copy=True)
        ab[0] += tau
        try:
            c = sla.cholesky_banded(ab, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            lo = float(np.min(sla.eigvals_banded(ab, lower=True, select="i", select_range=(0, 0))))
            raise IndefiniteError((self.start, self.start + self.n), lo) from None
        return sla.cho_solve_banded((c, True), B, check_finite=False)

    def _eig_solve(self, B, tau):
        w, S, St = self._eig()
        d = w + tau
        if d[0] <= 0:
            raise IndefiniteError((self.start, self.start + self.n), float(d[0]))
        return S @ ((St @ B) / d[:, None])

    def _hodlr_solve(self, B, tau):
        node = self._node
        if node.D is not None or self.n <= DENSE_SPECTRUM_BELOW:
            return self._eig_solve(B, tau)
        m = self.split
        U, V = node.U, node.V
        c1, c2 = node.children
        r = U.shape[1]
        k = B.shape[1]
        Z1 = HMatrix(c1)._hodlr_solve(np.hstack([B[:m], U]), tau)
        Z2 = HMatrix(c2)._hodlr_solve(np.hstack([B[m:], V]), tau)
        if r == 0:
            return np.vstack([Z1, Z2])
        Z1B, Z1U = Z1[:, :k], Z1[:, k:]
        Z2B, Z2V = Z2[:, :k], Z2[:, k:]
        C = np.eye(2 * r)
        C[:r, r:] += V.T @ Z2V
        C[r:, :r] += U.T @ Z1U
        rhs = np.vstack([V.T @ Z2B, U.T @ Z1B])
        y = np.linalg.solve(C, rhs)
        return np.vstack([Z1B - Z1U @ y[:r], Z2B - Z2V @ y[r:]])

    # ---- spectra
    def interval(self):
        """Enclosure ``(alpha, beta)`` of the spectrum of the shifted block."""
        node = self._node
        with node.lock:
            iv = node.cache.get("interval")
        if iv is None:
            iv = _estimate_interval(HMatrix(node))
            with node.lock:
                node.cache["interval"] = iv
        return iv[0] + self.shift, iv[1] + self.shift


def _gershgorin(A):
    r = np.sum(np.abs(A), axis=1) - np.abs(np.diag(A))
    return float(np.min(np.diag(A) - r)), float(np.max(np.diag(A) + r))


def _lanczos_top(apply, n, steps, rng):
    """Largest Ritz value and its residual bound; ``None`` on breakdown."""
    steps = min(steps, n)
    Q = np.zeros((n, steps + 1))
    alpha = np.zeros(steps)
    beta = np.zeros(steps)
    q = rng.standard_normal(n)
    Q[:, 0] = q / np.linalg.norm(q)
    m = steps
    for j in range(steps):
        w = apply(Q[:, j])
        alpha[j] = Q[:, j] @ w
        w -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ w)
        w -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] <= 1e-12 * max(abs(alpha[j]), 1e-300):
            m = j + 1
            if m < n:
                return None
            break
        Q[:, j + 1] = w / beta[j]
    theta, Y = sla.eigh_tridiagonal(alpha[:m], beta[:m - 1])
    res = abs(beta[m - 1] * Y[-1, -1]) if m < n else 0.0
    return float(theta[-1]), float(res)


def _estimate_interval(H):
    n = H.n
    if n <= DENSE_SPECTRUM_BELOW or H.is_leaf:
        w = H.eigh()[0]
        lo, hi = float(w[0]), float(w[-1])
    else:
        rng = np.random.default_rng(1_000_003 * H.level + H.index + 17)
        top = _lanczos_top(lambda x: H.matvec(x), n, LANCZOS_STEPS, rng)
        inv = _lanczos_top(lambda x: H.solve(x), n, LANCZOS_STEPS, rng)
        if top is None or inv is None:
            glo, ghi = _gershgorin(H.dense())
        if top is None:
            hi = ghi
        else:
            hi = top[0] + top[1]
        if inv is None:
            lo = glo if glo > 0 else float(sla.eigvalsh(H.dense(), subset_by_index=(0, 0))[0])
        else:
            lo = 1.0 / (inv[0] + inv[1])
    if lo <= 0:
        raise IndefiniteError((H.start, H.start + n), lo)
    return WIDEN_LOW * lo, WIDEN_HIGH * hi


@dataclass(frozen=True)
class SpectralInterval:
    alpha: float
    beta: float

    def __post_init__(self):
        if not 0 < self.alpha <= self.beta:
            raise ValueError(f"invalid spectral interval [{self.alpha}, {self.beta}]")

    def __iter__(self):
        return iter((self.alpha, self.beta))


def estimate_spectra(H):
    """Spectral enclosures for every diagonal block of every level.

    Returns a dict keyed by ``(level, index)``.  The intervals are also cached
    on the blocks, so later solver calls reuse them.
    """
    out = {}

    def _walk(node):
        out[(node.level, node.index)] = SpectralInterval(*node.interval())
        for c in node.children:
            _walk(c)
    _walk(H)
    return out


# ---------------------------------------------------------------- construction

def _truncated_svd(A, tol, max_rank):
    if not np.any(A):
        return np.zeros((A.shape[0], 0)), np.zeros((A.shape[1], 0)), False
    W, s, Zt = sla.svd(A, full_matrices=False, check_finite=False)
    r = int(np.count_nonzero(s >= tol * s[0]))
    cut = False
    if max_rank is not None and r > max_rank:
        r, cut = max_rank, True
    return W[:, :r] * s[:r], Zt[:r].T, cut


def hmatrix_from_dense(A, tree=None, tol=1e-12, max_rank=None, n_min=64):
    """Compress a dense symmetric matrix.

    Off-diagonal blocks keep the singular values ``s_i >= tol * s_1``, capped at
    `max_rank`; if the cap forces a larger error the result has
    ``truncated=True``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("a square matrix is required")
    scale = max(np.linalg.norm(A, ord=np.inf), np.finfo(float).tiny)
    if np.linalg.norm(A - A.T, ord=np.inf) > 1e-13 * scale:
        raise ValueError("matrix is not symmetric")
    if tree is None:
        tree = build_cluster_tree(A.shape[0], n_min)
    if tree.n != A.shape[0]:
        raise ValueError(f"cluster tree of size {tree.n} for a {A.shape[0]} matrix")
    A = 0.5 * (A + A.T)
    truncated = False

    def _build(c):
        nonlocal truncated
        if c.is_leaf:
            return _Node(c, D=np.array(A[c.start:c.stop, c.start:c.stop]))
        c1, c2 = c.children
        U, V, cut = _truncated_svd(A[c1.start:c1.stop, c2.start:c2.stop], tol, max_rank)
        truncated |= cut
        return _Node(c, children=(_build(c1), _build(c2)), U=U, V=V)

    root = _build(tree.root)
    return HMatrix(root, tree=tree, truncated=truncated)


def hmatrix_from_banded(ab, tree=None, n_min=64):
    """Exact representation of a symmetric band matrix.

    `ab` is the lower band in LAPACK storage: ``ab[k, j] = A[j + k, j]``.
    """
    ab = np.atleast_2d(np.asarray(ab, dtype=float))
    n = ab.shape[1]
    bw = ab.shape[0] - 1
    if tree is None:
        tree = build_cluster_tree(n, n_min)
    if tree.n != n:
        raise ValueError(f"cluster tree of size {tree.n} for a band matrix of size {n}")

    def _build(c, band):
        if c.is_leaf:
            return _Node(c, D=_band_to_dense(band), band=band)
        c1, c2 = c.children
        m = c1.size
        # A12 is supported on the trailing bw rows and leading bw columns
        w = min(bw, m, c2.size)
        corner = np.zeros((w, w))
        for k in range(1, bw + 1):
            for j in range(max(0, m - k), m):
                i = j + k
                if i - m < w and m - 1 - j < w and i < band.shape[1]:
                    corner[j - (m - w), i - m] = band[k, j]
        U = np.zeros((m, 0))
        V = np.zeros((c2.size, 0))
        if np.any(corner):
            W, s, Zt = np.linalg.svd(corner)
            r = int(np.count_nonzero(s > 1e-15 * s[0]))
            U = np.zeros((m, r))
            V = np.zeros((c2.size, r))
            U[m - w:] = W[:, :r] * s[:r]
            V[:w] = Zt[:r].T
        start = c.start
        return _Node(c, children=(_build(c1, _sub_band(band, c1.start - start, c1.stop - start)),
                                  _build(c2, _sub_band(band, c2.start - start, c2.stop - start))),
                     U=U, V=V, band=band)

    root = _build(tree.root, _sub_band(ab, 0, n))
    return HMatrix(root, tree=tree)


def band_from_dense(A, bandwidth):
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    ab = np.zeros((bandwidth + 1, n))
    for k in range(bandwidth + 1):
        ab[k, :n - k] = np.diag(A, -k)
    return ab


# ---------------------------------------------------------------- splitting

def top_offdiag_factor(H):
    """Factors of ``A - blockdiag(A11, A22)`` (rank twice the block rank)."""
    if H.is_leaf:
        raise ValueError("a leaf block has no off-diagonal part")
    U, V = H.offdiag
    m, r = H.split, U.shape[1]
    Uh = np.zeros((H.n, 2 * r))
    Vh = np.zeros((H.n, 2 * r))
    Uh[:m, :r] = U
    Uh[m:, r:] = V
    Vh[m:, :r] = V
    Vh[:m, r:] = U
    return LowRank(Uh, Vh)


def level_split(H, h):
    """Block-diagonal part at level `h` and the off-diagonal blocks above it.

    Returns ``(diag, off)`` where `diag` lists the diagonal sub-matrices of
    level `h` (with their row offsets available as ``.start - H.start``) and
    `off` lists ``(rows, cols, LowRank)`` triples for every off-diagonal block
    uncovered at levels ``1..h``, both triangles included.
    """
    if not 0 <= h <= H.depth:
        raise ValueError(f"level {h} outside 0..{H.depth}")
    base = H.start
    diag, off = [], []

    def _walk(node, lev):
        if lev == h or node.is_leaf:
            diag.append(node)
            return
        U, V = node.offdiag
        m = node.split
        s = node.start - base
        rows = (s, s + m)
        cols = (s + m, s + node.n)
        off.append((rows, cols, LowRank(U, V)))
        off.append((cols, rows, LowRank(V, U)))
        for c in node.children:
            _walk(c, lev + 1)

    _walk(H, 0)
    return diag, off


def shifted_solve(H, sigma, B):
    return H.solve(B, sigma)


def matvec(H, X):
    return H.matvec(X)
