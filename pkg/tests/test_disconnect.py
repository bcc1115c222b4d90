import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special, stats

from cylwalk import disconnect as dc
from cylwalk.lattice import Geometry, Region, h_scale, make_slab


def slab(N, z=0):
    return make_slab(Geometry.cylinder(2, N), z, z)


def test_connectivity_basics():
    assert dc.is_disconnected(slab(4))
    assert not dc.is_disconnected(Region(Geometry.cylinder(2, 4), frozenset()))
    holed = Region(slab(4).geometry, slab(4).vertices - {(1, 2, 0)})
    assert not dc.is_disconnected(holed)


def test_disconnected_window_independent():
    assert dc.is_disconnected(slab(5, 3), heights=(-10, 10))
    # a vertical column does not separate
    g = Geometry.cylinder(2, 5)
    col = Region.from_points([(0, 0, z) for z in range(-5, 6)], g)
    assert not dc.is_disconnected(col)


def test_disconnection_time_certified():
    rng = np.random.default_rng(0)
    for _ in range(10):
        res = dc.disconnection_time(4, 2, rng)
        assert 0 < res.T_N < math.inf
        assert res.certify()
        assert dc.star_witness(res.trace_at(res.T_N)) is not None


def test_disconnection_finite_over_replicates():
    rng = np.random.default_rng(1)
    T = np.array([dc.disconnection_time(4, 2, rng).T_N for _ in range(100)])
    assert np.all(T > 0)
    assert np.isfinite(np.median(T / 4**4))


def test_disconnection_step_cap():
    with pytest.raises(dc.StepCapExceeded):
        dc.disconnection_time(6, 2, np.random.default_rng(2), cap=100)


def test_star_witness_on_slab():
    N = 9
    w = dc.star_witness(slab(N, 2))
    assert w is not None and w.z_star == 2
    s = math.isqrt(N)
    assert w.path[0] == (0, 0, 2)
    end = w.path[-1]
    assert max(abs(end[0]), abs(end[-1] - 2)) == s
    for a, b in zip(w.path, w.path[1:]):
        assert max(abs(x - y) for x, y in zip(a, b)) == 1
    assert dc.star_witness(Region(slab(N).geometry, frozenset())) is None


# ---------------------------------------------------------------- Bessel and zeta


def test_bessel_values():
    assert dc.bessel_i(0, 0.0) == 1.0 and dc.bessel_i(1, 0.0) == 0.0
    assert dc.bessel_i(0, 0.5) == pytest.approx(1.0634833, abs=1e-7)
    for x in (0.1, 0.5, 2.0, 10.0, 29.0):
        assert dc.bessel_i(0, x) == pytest.approx(special.i0(x), rel=1e-12)
        assert dc.bessel_i(1, x) == pytest.approx(special.i1(x), rel=1e-12)
    with pytest.raises(ValueError):
        dc.bessel_i(0, 31.0)
    with pytest.raises(ValueError):
        dc.bessel_i(2, 1.0)


@given(st.floats(0.5, 25.0))
def test_bessel_derivative(x):
    eps = 1e-5
    deriv = (dc.bessel_i(0, x + eps) - dc.bessel_i(0, x - eps)) / (2 * eps)
    assert deriv == pytest.approx(dc.bessel_i(1, x), rel=1e-6)


def laplace_oracle(theta, u):
    x = theta * u
    return x / np.sinh(x / 2) ** 2 * special.iv(1, x / 2) / special.iv(0, x / 2)


def test_laplace_closed_form():
    assert dc.zeta_laplace_closed(1.0, 1.0) == pytest.approx(0.8931, abs=1e-4)
    for theta, u in ((1.0, 1.0), (2.0, 0.5), (0.3, 3.0), (5.0, 2.0)):
        assert dc.zeta_laplace_closed(theta, u) == pytest.approx(laplace_oracle(theta, u), rel=1e-10)
    assert dc.zeta_laplace_closed(0.0, 1.0) == 1.0
    assert dc.zeta_laplace_closed(1e-6, 1.0) == pytest.approx(1.0, abs=1e-11)


def test_zeta_zero_level():
    z = dc.zeta_sample(0.0, 1000, reps=5)
    assert np.all(z.values == 0)


def test_zeta_nonnegative_and_increasing():
    rng = np.random.default_rng(3)
    means = [dc.zeta_sample(u, 2000, rng, 3000).values.mean() for u in (0.5, 1.0, 2.0)]
    assert means[0] > 0
    assert means[0] < means[1] < means[2]


def test_zeta_scaling_matched_grids():
    # zeta(2) at scale n and 4 zeta(1) at scale 4n count the same visit threshold
    rng = np.random.default_rng(4)
    a = dc.zeta_sample(2.0, 2500, rng, 4000).values
    b = 4 * dc.zeta_sample(1.0, 10_000, rng, 4000).values
    assert stats.ks_2samp(a, b).pvalue > 1e-3


def test_zeta_laplace_small_theta():
    c = dc.zeta_laplace_check(1e-3, 1.0, 2000, 1000, np.random.default_rng(5))
    assert c.closed == pytest.approx(1.0, abs=1e-6)
    assert c.mc == pytest.approx(1.0, abs=1e-4)


# ---------------------------------------------------------------- visits and D^z_K


def test_return_probability_exact():
    for N in (4, 10, 16):
        h = h_scale(N)
        assert abs(dc.return_probability(h) - (1 - 1 / h)) <= 1e-12


def test_geometric_visits():
    rep = dc.geometric_visits(10, 10_000, np.random.default_rng(6))
    assert rep.h == 73
    assert rep.counts.min() >= 1
    assert abs(rep.mean - 73) <= 3 * math.sqrt((1 - 1 / 73) * 73**2 / 10_000)
    assert rep.pvalue > 0.01


def test_dk_degenerate_K():
    rep = dc.dk_scaling(8, 2, 0.01, 5, np.random.default_rng(7))
    assert rep.status == "degenerate-K" and rep.sample.K == 0


def test_dk_fixed_level_report():
    rep = dc.dk_scaling(6, 2, 3.0, 100, np.random.default_rng(8), fixed_z=True, ref_reps=2000)
    censor = 3 * 3.0**2 * 50
    assert rep.status == "ok" and rep.sample.K == 3
    assert np.all((rep.sample.values > 0) & (rep.sample.values <= censor))
    assert rep.reference.max() <= censor
    assert 0 <= rep.ks <= 1


def test_visits_before_departure_exact_law():
    # oracle: Geometric(1/h) visits in the first excursion; each later one
    # reaches 0 w.p. (h - r)/h and then adds Geometric(1/h) visits
    N, alpha, n = 8, 5.0, 20_000
    r, h = N, h_scale(N)
    K = int(alpha * N**2 / h)
    v = dc.visits_before_departure(N, alpha, 2, n, np.random.default_rng(13))
    rng = np.random.default_rng(14)
    ref = rng.geometric(1 / h, n) + (
        (rng.random((n, K - 1)) < (h - r) / h) * rng.geometric(1 / h, (n, K - 1))).sum(axis=1)
    assert stats.ks_2samp(v, ref).pvalue > 1e-3
    assert abs(v.mean() - (h + (K - 1) * (h - r))) <= 3 * v.std() / np.sqrt(n)
    capped = dc.visits_before_departure(N, alpha, 2, 1000, np.random.default_rng(13), limit=50)
    assert capped.max() <= 50


def test_dk_infimum_below_fixed_level():
    rng1, rng2 = np.random.default_rng(9), np.random.default_rng(9)
    a = dc.departure_times(6, 2, 3.0, 50, rng1, censor=500.0)
    b = dc.departure_times(6, 2, 3.0, 50, rng2, fixed_z=True, censor=500.0)
    # same randomness: the infimum over z is at most the value at z = 0
    assert np.all(a.values <= b.values + 1e-15)


def test_early_departure_monotone():
    res = dc.early_departure(8, 5.0, [0.01, 0.05, 0.2, 1.0], reps=4000, rng=np.random.default_rng(10))
    vals = [res[a] for a in sorted(res)]
    assert all(x <= y for x, y in zip(vals, vals[1:]))


def test_tightness_small():
    rep = dc.tightness_report((4, 6), 20, np.random.default_rng(11))
    assert rep.finite
    for N in rep.Ns:
        q = rep.quantiles(N)
        qi = rep.quantiles(N, inverse=True)
        assert np.all(q > 0) and np.all(np.isfinite(qi))
    assert rep.spread >= 1


def test_tightness_csv(tmp_path):
    rep = dc.tightness_report((4,), 3, np.random.default_rng(12))
    rep.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "N,rep,T_N,T_N_scaled"
