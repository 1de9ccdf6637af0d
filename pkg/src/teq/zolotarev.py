"""Optimal rational (Zolotarev) shifts for two disjoint real intervals.

The extremal rational function of degree ``(s, s)`` for the third Zolotarev
problem on ``E = [a1, b1]`` (positive) and ``F = [-b2, -a2]`` (negative) is
obtained by mapping the configuration with a Moebius transformation onto the
symmetric pair ``[-b, -1] U [1, b]``.  On the symmetric pair the zeros are the
classical ADI parameters ``b * dn((2j - 1) K(k') / (2s), k')`` with
``k' = sqrt(1 - 1/b**2)``, and the poles are their negatives.

The cross ratio of the four endpoints fixes ``b``: ``(b + 1)**2 / (4 b) = gamma``
where ``gamma = (a1 + b2)(a2 + b1) / ((a1 + a2)(b1 + b2))``.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


def _agm(a, b, tol=1e-16):
    a, b = float(a), float(b)
    for _ in range(64):
        if abs(a - b) <= tol * a:
            break
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def elliptic_K(k, kc=None):
    """Complete elliptic integral of the first kind ``K(k)`` (modulus `k`).

    Evaluated with the arithmetic-geometric mean.  When the complementary
    modulus ``kc = sqrt(1 - k**2)`` is tiny it should be passed explicitly to
    avoid cancellation.
    """
    if kc is None:
        if not 0 <= k < 1:
            raise ValueError(f"modulus must lie in [0, 1), got {k}")
        kc = math.sqrt((1.0 - k) * (1.0 + k))
    elif not 0 < kc <= 1:
        raise ValueError(f"complementary modulus must lie in (0, 1], got {kc}")
    return math.pi / (2.0 * _agm(1.0, kc))


def jacobi_dn(u, k, kc=None):
    """Jacobi elliptic function ``dn(u, k)`` via descending Landen steps.

    Vectorized over `u`.  As for :func:`elliptic_K`, pass `kc` when `k` is
    close to one.
    """
    u = np.asarray(u, dtype=float)
    if kc is None:
        if not 0 <= k < 1:
            raise ValueError(f"modulus must lie in [0, 1), got {k}")
        kc = math.sqrt((1.0 - k) * (1.0 + k))
        c = float(k)
    else:
        c = math.sqrt((1.0 - kc) * (1.0 + kc)) if k is None else float(k)
    if c == 0.0:
        return np.ones_like(u)
    a, b = 1.0, float(kc)
    a_seq, c_seq = [a], [c]
    while abs(c) > 1e-16 * a and len(a_seq) < 64:
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        a_seq.append(a)
        c_seq.append(c)
    N = len(a_seq) - 1
    phi = (2.0 ** N) * a_seq[N] * u
    phis = [phi]
    for i in range(N, 0, -1):
        phi = 0.5 * (phi + np.arcsin(np.clip(c_seq[i] / a_seq[i] * np.sin(phi), -1.0, 1.0)))
        phis.append(phi)
    # phi0 = am(u); dn**2 = kc**2 + k**2 cos(am u)**2 has no cancellation
    phi0 = phis[-1]
    k = math.sqrt((1.0 - kc) * (1.0 + kc)) if k is None else float(k)
    return np.sqrt(kc * kc + (k * np.cos(phi0)) ** 2)


@dataclass(frozen=True)
class IntervalPair:
    """``E = [a1, b1]`` on the positive axis and ``F = [-b2, -a2]`` on the negative one."""

    a1: float
    b1: float
    a2: float
    b2: float

    def __post_init__(self):
        if not (0 < self.a1 <= self.b1 and 0 < self.a2 <= self.b2):
            raise ValueError(f"invalid interval pair: E=[{self.a1}, {self.b1}], "
                             f"F=[{-self.b2}, {-self.a2}]")
        if not all(map(math.isfinite, (self.a1, self.b1, self.a2, self.b2))):
            raise ValueError("interval endpoints must be finite")

    @classmethod
    def from_spectra(cls, spec1, spec2):
        """Pair for ``A1 X + X A2 = C`` from the spectral intervals of A1 and A2."""
        return cls(float(spec1[0]), float(spec1[1]), float(spec2[0]), float(spec2[1]))

    @property
    def E(self):
        return (self.a1, self.b1)

    @property
    def F(self):
        return (-self.b2, -self.a2)

    @property
    def gamma(self):
        return ((self.a1 + self.b2) * (self.a2 + self.b1)
                / ((self.a1 + self.a2) * (self.b1 + self.b2)))

    @property
    def kappa(self):
        return (self.b1 + self.b2) / (self.a1 + self.a2)

    def scaled(self, c):
        return IntervalPair(c * self.a1, c * self.b1, c * self.a2, c * self.b2)


@dataclass(frozen=True)
class ShiftSet:
    """Zeros `p` and poles `q` of ``r_s(z) = prod (z - p_j) / (z - q_j)``.

    Zeros lie in E, poles in F, so ``A1 - q_j I`` and ``A2 + p_j I`` stay SPD.
    """

    p: np.ndarray
    q: np.ndarray
    source: IntervalPair = field(compare=False)

    @property
    def s(self):
        return len(self.p)

    def __len__(self):
        return len(self.p)

    def evaluate(self, z):
        """Evaluate ``r_s`` at the points `z`."""
        z = np.asarray(z, dtype=float)[..., None]
        with np.errstate(divide="ignore"):
            # infinite at the poles
            return np.prod((z - self.p) / (z - self.q), axis=-1)


def _symmetric_b(gamma):
    g = max(gamma, 1.0)
    return 2.0 * g - 1.0 + 2.0 * math.sqrt(g * (g - 1.0))


def _mobius_back(w, b, pair):
    """Map points of the symmetric configuration back to the original one.

    The map sends -b, -1, 1, b to -b2, -a2, a1, b1; three distinct pairs fix it.
    """
    if pair.a2 < pair.b2:
        ws, zs = (-b, -1.0, 1.0), (-pair.b2, -pair.a2, pair.a1)
    else:
        ws, zs = (-1.0, 1.0, b), (-pair.a2, pair.a1, pair.b1)
    w1, w2, w3 = ws
    z1, z2, z3 = zs
    w = np.asarray(w, dtype=float)
    # cross ratio sending (w1, w2, w3) -> (0, 1, inf), then invert the z-side one
    mu = (w - w1) * (w2 - w3) / ((w - w3) * (w2 - w1))
    return (z1 * (z2 - z3) - mu * z3 * (z2 - z1)) / ((z2 - z3) - mu * (z2 - z1))


@lru_cache(maxsize=4096)
def _shifts_cached(s, a1, b1, a2, b2):
    pair = IntervalPair(a1, b1, a2, b2)
    if a1 == b1 and a2 == b2:
        # both intervals are points: r(z) = (z - a1) / (z + a2) is exact
        return np.full(s, a1), np.full(s, -a2)
    b = _symmetric_b(pair.gamma)
    if b <= 1.0 + 1e-15:
        return np.full(s, math.sqrt(a1 * b1)), np.full(s, -math.sqrt(a2 * b2))
    kc = 1.0 / b
    K = elliptic_K(None, kc=kc)
    u = (2.0 * np.arange(1, s + 1) - 1.0) * K / (2.0 * s)
    psym = b * jacobi_dn(u, None, kc=kc)
    p = _mobius_back(psym, b, pair)
    q = _mobius_back(-psym, b, pair)
    # roundoff can push the extreme shifts marginally outside the intervals
    p = np.clip(p, a1, b1)
    q = np.clip(q, -b2, -a2)
    order = np.argsort(np.abs(p), kind="stable")
    return p[order], q[order]


def zolotarev_shifts(s, pair):
    """Zeros and poles of the extremal rational function for ``Z_s(E, F)``.

    Returns a :class:`ShiftSet`, ordered by increasing ``|p_j|``.
    """
    s = int(s)
    if s < 1:
        raise ValueError("at least one shift is required")
    p, q = _shifts_cached(s, float(pair.a1), float(pair.b1), float(pair.a2), float(pair.b2))
    return ShiftSet(p.copy(), q.copy(), pair)


def zolotarev_bound(j, pair):
    """Upper bound ``4 exp(-pi**2 j / log(16 gamma))`` on ``Z_j(E, F)``."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    return 4.0 * math.exp(-math.pi ** 2 * j / math.log(16.0 * pair.gamma))


def rational_ratio(shifts, n_grid=10_000):
    """``max_E |r_s| / min_F |r_s|`` on logarithmic grids of both intervals."""
    pair = shifts.source
    zE = _log_grid(pair.a1, pair.b1, n_grid)
    zF = -_log_grid(pair.a2, pair.b2, n_grid)
    return float(np.max(np.abs(shifts.evaluate(zE))) / np.min(np.abs(shifts.evaluate(zF))))


def _log_grid(a, b, n):
    if a == b:
        return np.array([a])
    return np.geomspace(a, b, n)


def _ceil_count(x):
    return max(1, math.ceil(x))


def shift_count_adi(eps, pair):
    """A priori number of fADI steps for relative residual `eps`."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    return _ceil_count(math.log(4.0 / eps) * math.log(16.0 * pair.gamma) / math.pi ** 2)


def shift_count_rk(eps, pair):
    """A priori number of rational Krylov steps for relative residual `eps`."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    a1, b1, a2, b2 = pair.a1, pair.b1, pair.a2, pair.b2
    lead = math.log(8.0 * (a1 + a2 + b1 + b2) / (eps * (a1 + a2)))
    return _ceil_count(lead * math.log(16.0 * pair.gamma) / math.pi ** 2)


def shift_count_tensor(eps, d, alpha, beta):
    """Constant fADI step count that controls a d-mode nested solve (d >= 3)."""
    if d < 3:
        raise ValueError("the tensor shift count is defined for d >= 3")
    if not 0 < alpha <= beta:
        raise ValueError("need 0 < alpha <= beta")
    kappa = beta / alpha
    lead = math.log(2.0 * d * kappa / eps)
    geom = math.log(8.0 * (alpha + (d - 1) * beta) * (alpha + beta) / (d * alpha * beta))
    return _ceil_count(lead * geom / math.pi ** 2)
