import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from teq.zolotarev import (IntervalPair, elliptic_K, jacobi_dn, rational_ratio, shift_count_adi,
                           shift_count_rk, shift_count_tensor, zolotarev_bound, zolotarev_shifts)

SYM = IntervalPair(1.0, 100.0, 1.0, 100.0)
GEOMETRIES = {
    "symmetric": SYM,
    "skewed": IntervalPair(0.5, 40.0, 2.0, 300.0),
    "kappa1e6": IntervalPair(1e-3, 1e3, 1e-3, 1e3),
}


# ---- elliptic functions (mpmath as the independent oracle)

def test_elliptic_K_values():
    assert elliptic_K(0.0) == pytest.approx(math.pi / 2, rel=1e-15)
    assert elliptic_K(0.5) == pytest.approx(1.6857503548125961, rel=1e-14)
    with mpmath.workdps(40):
        for k in (0.1, 0.9, 0.999999):
            assert elliptic_K(k) == pytest.approx(float(mpmath.ellipk(mpmath.mpf(k) ** 2)), rel=1e-14)


def test_elliptic_K_small_complement():
    kc = 1e-9
    with mpmath.workdps(40):
        ref = float(mpmath.ellipk(1 - mpmath.mpf(kc) ** 2))
    assert elliptic_K(None, kc=kc) == pytest.approx(ref, rel=1e-13)


def test_elliptic_K_monotone_and_domain():
    ks = np.linspace(0, 0.99, 50)
    vals = [elliptic_K(k) for k in ks]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        elliptic_K(1.0)


def test_jacobi_dn_identities():
    for k in (0.3, 0.8, 0.99):
        assert jacobi_dn(0.0, k) == pytest.approx(1.0, abs=1e-15)
        K = elliptic_K(k)
        assert jacobi_dn(K, k) == pytest.approx(math.sqrt(1 - k * k), rel=1e-12)


def test_jacobi_dn_against_mpmath():
    for k in (0.2, 0.7, 0.999):
        for u in (0.01, 0.4, 1.3, elliptic_K(k)):
            ref = float(mpmath.ellipfun("dn", u, m=k * k))
            assert jacobi_dn(u, k) == pytest.approx(ref, rel=1e-13)
    # small u: dn(u) = 1 - k^2 u^2 / 2 + O(u^4)
    k, u = 0.6, 1e-4
    assert jacobi_dn(u, k) == pytest.approx(1 - k * k * u * u / 2, rel=1e-15)


# ---- shifts

def test_single_shift_symmetric_geometric_mean():
    b = 100.0
    S = zolotarev_shifts(1, IntervalPair(1.0, b, 1.0, b))
    assert S.p[0] == pytest.approx(math.sqrt(b), rel=1e-12)
    assert S.q[0] == pytest.approx(-math.sqrt(b), rel=1e-12)
    # grid minimax over symmetric single shifts finds the same optimum
    cands = np.geomspace(1.0, b, 2001)
    zE = np.geomspace(1.0, b, 2000)
    vals = [np.max(np.abs((zE - c) / (zE + c))) for c in cands]
    assert cands[int(np.argmin(vals))] == pytest.approx(math.sqrt(b), rel=5e-3)


@pytest.mark.parametrize("s", [1, 3, 7])
def test_scaling_covariance(s):
    pair = GEOMETRIES["skewed"]
    S = zolotarev_shifts(s, pair)
    for c in (0.01, 3.0, 1e4):
        Sc = zolotarev_shifts(s, pair.scaled(c))
        np.testing.assert_allclose(Sc.p, c * S.p, rtol=1e-12)
        np.testing.assert_allclose(Sc.q, c * S.q, rtol=1e-12)


@pytest.mark.parametrize("name", list(GEOMETRIES))
@pytest.mark.parametrize("s", range(1, 13))
def test_ratio_below_bound(name, s):
    pair = GEOMETRIES[name]
    S = zolotarev_shifts(s, pair)
    assert S.s == s
    assert np.all((S.p >= pair.a1) & (S.p <= pair.b1))
    assert np.all((S.q >= -pair.b2) & (S.q <= -pair.a2))
    assert np.all(np.diff(np.abs(S.p)) >= 0)
    assert rational_ratio(S) <= zolotarev_bound(s, pair) * (1 + 1e-8)


@pytest.mark.parametrize("s", range(1, 13))
def test_per_factor_property_symmetric(s):
    # |z - p_j| <= |z - q_j| for every z in E and every factor
    for pair in (SYM, GEOMETRIES["kappa1e6"]):
        S = zolotarev_shifts(s, pair)
        z = np.geomspace(pair.a1, pair.b1, 10_000)[:, None]
        assert np.all(np.abs(z - S.p) <= np.abs(z - S.q) * (1 + 1e-12))


@pytest.mark.parametrize("name", list(GEOMETRIES))
def test_product_property(name):
    pair = GEOMETRIES[name]
    for s in range(1, 13):
        S = zolotarev_shifts(s, pair)
        z = np.geomspace(pair.a1, pair.b1, 10_000)
        assert np.max(np.abs(S.evaluate(z))) <= 1.0


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1.0, 1e6), st.floats(1e-3, 1e3), st.floats(1.0, 1e6),
       st.integers(1, 10))
def test_bound_random_geometries(a1, r1, a2, r2, s):
    pair = IntervalPair(a1, a1 * r1, a2, a2 * r2)
    S = zolotarev_shifts(s, pair)
    assert rational_ratio(S, 2000) <= zolotarev_bound(s, pair) * (1 + 1e-8)


def test_point_intervals_exact():
    pair = IntervalPair(2.0, 2.0, 3.0, 3.0)
    S = zolotarev_shifts(1, pair)
    assert S.evaluate(np.array([2.0]))[0] == 0.0


def test_invalid_inputs():
    with pytest.raises(ValueError):
        IntervalPair(2.0, 1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        IntervalPair(0.0, 1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        zolotarev_shifts(0, SYM)


# ---- bound and shift counts

def test_bound_values():
    assert zolotarev_bound(0, SYM) == 4.0
    assert SYM.gamma == pytest.approx(101.0 ** 2 / 400.0)
    assert SYM.gamma == pytest.approx(25.5025)
    expected = 4 * math.exp(-math.pi ** 2 * 5 / math.log(16 * 25.5025))
    assert zolotarev_bound(5, SYM) == pytest.approx(expected, rel=1e-14)
    assert zolotarev_bound(5, SYM) == pytest.approx(1.09e-3, rel=1e-2)
    vals = [zolotarev_bound(j, SYM) for j in range(20)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_shift_count_adi_values():
    assert shift_count_adi(1e-6, SYM) == math.ceil(math.log(4e6) * math.log(16 * 25.5025) / math.pi ** 2)
    assert shift_count_adi(1e-6, SYM) == 10
    # tiny gamma makes the formula vanish; at least one step is taken
    assert shift_count_adi(0.99, IntervalPair(1.0, 1.0001, 1.0, 1.0001)) == 1
    with pytest.raises(ValueError):
        shift_count_adi(4.0, SYM)


def test_shift_count_adi_log_growth():
    step = math.ceil(math.log(2) * math.log(16 * SYM.gamma) / math.pi ** 2)
    for e in (1e-2, 1e-5, 1e-9):
        assert shift_count_adi(e / 2, SYM) - shift_count_adi(e, SYM) <= step


def test_shift_count_adi_achieves_bound():
    for e in (1e-3, 1e-8):
        s = shift_count_adi(e, SYM)
        assert zolotarev_bound(s, SYM) <= e


def test_shift_count_rk():
    lead = math.log(8 * 202 / (1e-6 * 2))
    assert shift_count_rk(1e-6, SYM) == math.ceil(lead * math.log(16 * SYM.gamma) / math.pi ** 2)
    for pair in GEOMETRIES.values():
        for e in (1e-2, 1e-6, 1e-10):
            assert shift_count_rk(e, pair) >= shift_count_adi(e, pair)


def test_shift_count_tensor():
    eps = 1e-6
    alpha, beta, d = 1.0, 1.0, 3
    geom = 8 * (alpha + (d - 1) * beta) * (alpha + beta) / (d * alpha * beta)
    assert geom == 16.0
    expected = math.ceil(math.log(2 * d / eps) * math.log(geom) / math.pi ** 2)
    assert shift_count_tensor(eps, 3, 1.0, 1.0) == expected
    counts = [shift_count_tensor(e, 3, 1.0, 50.0) for e in (1e-2, 1e-4, 1e-8)]
    assert counts == sorted(counts)
    with pytest.raises(ValueError):
        shift_count_tensor(eps, 2, 1.0, 2.0)
