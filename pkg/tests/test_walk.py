import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from cylwalk.domination import DominationParams
from cylwalk.lattice import Geometry, Region, h_scale, make_box, make_slab, r_scale
from cylwalk.rng import RngStream
from cylwalk.walk import (
    EnterHeights, ExitHeights, HittingTime, PathSample, StepCapExceeded, StepCount,
    conditioned_excursion, excursions, gamma_level_time, run_until, sample_initial,
    special_excursion, vertical_skeleton,
)


def test_exit_slab_lands_on_boundary(rng):
    g = Geometry.cylinder(2, 4)
    h = h_scale(4)
    for _ in range(20):
        p = run_until((0, 0, 0), ExitHeights(-h + 1, h - 1), g, rng)
        assert abs(p.end[-1]) == h
        assert np.all(np.abs(p.heights[:-1]) < h)
        assert p.is_nearest_neighbour()


def test_hitting_time_has_positive_length(rng):
    g = Geometry.cylinder(2, 3)
    K = Region.from_points([(0, 0, 0)], g)
    p = run_until((0, 0, 0), HittingTime(K), g, rng)
    assert p.length >= 1 and p.end == (0, 0, 0)


def test_exit_side_gamblers_ruin():
    # 1D walk from z exits (-h, h) at +h with probability (z + h) / 2h
    g = Geometry.lattice(1)
    h, z, n = 5, 2, 100_000
    rng = np.random.default_rng(11)
    up = sum(run_until((z,), ExitHeights(-h + 1, h - 1), g, rng).end[0] == h for _ in range(n))
    p = (z + h) / (2 * h)
    assert abs(up / n - p) <= 3 * np.sqrt(p * (1 - p) / n)


def test_step_cap():
    g = Geometry.cylinder(2, 4)
    with pytest.raises(StepCapExceeded):
        run_until((0, 0, 0), ExitHeights(-10**6, 10**6), g, np.random.default_rng(0), cap=1000)


def test_step_count_rule(rng):
    g = Geometry.lattice(3)
    assert run_until((0, 0, 0), StepCount(17), g, rng).length == 17


def test_initial_laws(rng):
    g = Geometry.cylinder(2, 5)
    assert all(sample_initial("q_z", g, rng, z=7)[-1] == 7 for _ in range(100))
    draws = [sample_initial("q", g, rng) for _ in range(10_000)]
    hs = np.array([p[-1] for p in draws])
    assert set(np.unique(hs)) == {-5, 5}
    up = int((hs == 5).sum())
    assert stats.chisquare([up, len(hs) - up]).pvalue > 1e-3
    tor = np.array([p[0] * 5 + p[1] for p in draws])
    assert stats.chisquare(np.bincount(tor, minlength=25)).pvalue > 1e-3
    with pytest.raises(ValueError):
        sample_initial("nope", g, rng)


def test_excursions_start_inside(rng):
    g = Geometry.cylinder(2, 4)
    ex, path = excursions((1, 1, 2), 0, 3, g, rng)
    assert ex.returns[0] == 0
    assert ex.count == 3 and ex.check()


def test_excursion_count_formula():
    params = DominationParams(2, 10, 5.0, 20.0)
    assert params.h == 73
    assert params.K == 500 // 73 == 6


def test_heights_between_departure_and_return(rng):
    g = Geometry.cylinder(2, 4)
    r = r_scale(4)
    ex, path = excursions((0, 0, 0), 0, 4, g, rng)
    H = path.heights
    for D, R in zip(ex.departures[:-1], ex.returns[1:]):
        assert np.all(np.abs(H[D:R]) > r)


def test_excursions_from_short_path():
    g = Geometry.cylinder(2, 4)
    p = PathSample(np.array([[0, 0, 0], [0, 0, 1]]), g)
    with pytest.raises(ValueError):
        excursions(p, 0, 1)


def test_special_excursion_endpoints(rng):
    g = Geometry.cylinder(2, 4)
    r, h = r_scale(4), h_scale(4)
    for _ in range(20):
        p = special_excursion(g, rng)
        assert abs(p.start[-1]) == r and abs(p.end[-1]) == h


def test_conditioned_excursion_acceptance():
    g = Geometry.cylinder(2, 4)
    h = h_scale(4)
    z1, z2 = 4, -h
    rng = np.random.default_rng(3)
    m = 4000
    trials = []
    for _ in range(m):
        p, t = conditioned_excursion(z1, z2, g, rng)
        assert p.end[-1] == z2 and p.start[-1] == z1
        trials.append(t)
    acc = (h + z1 * np.sign(z2)) / (2 * h)
    mean, se = 1 / acc, np.sqrt((1 - acc) / acc**2 / m)
    assert abs(np.mean(trials) - mean) <= 3 * se


def test_conditioned_excursion_bad_args():
    g = Geometry.cylinder(2, 4)
    with pytest.raises(ValueError):
        conditioned_excursion(0, 3, g)
    with pytest.raises(ValueError):
        conditioned_excursion(15, 15, g)


def test_vertical_skeleton(rng):
    g = Geometry.cylinder(2, 4)
    p = run_until((0, 0, 0), StepCount(30_000), g, rng)
    sk = vertical_skeleton(p)
    assert sk.rho[0] == 0
    assert np.all(np.abs(np.diff(sk.zhat)) == 1)
    gaps = np.diff(sk.rho)
    # geometric gaps with success probability 1/(d+1): mean 3, variance 6
    assert abs(gaps.mean() - 3) <= 3 * np.sqrt(6 / len(gaps))
    L = sk.local_time_profile(0)
    assert L[0] == 0 and set(np.unique(np.diff(L))) <= {0, 1}
    assert sk.local_time(0, 10) == L[10]


def test_height_move_rate(rng):
    g = Geometry.cylinder(2, 5)
    p = run_until((0, 0, 0), StepCount(100_000), g, rng)
    moved = int(np.count_nonzero(np.diff(p.heights)))
    n = p.length
    assert stats.chisquare([moved, n - moved], [n / 3, 2 * n / 3]).pvalue > 1e-3


def test_gamma_level_time(rng):
    g = Geometry.cylinder(2, 4)
    p = run_until((0, 0, 2), StepCount(5000), g, rng)
    sk = vertical_skeleton(p)
    assert gamma_level_time(p, 2, 0) == 0
    # L^z_k counts m < k, so one visit is recorded once the first vertical move is made
    assert gamma_level_time(p, 2, 1) == sk.rho[1]
    prof = sk.local_time_profile(2)
    for u in (1, 2, 5, 10):
        t = gamma_level_time(p, 2, u, sk)
        if t is None:
            continue
        k = int(np.searchsorted(sk.rho, t))
        assert prof[k] >= u and prof[k - 1] < u
    assert gamma_level_time(p, 10**6, 1) is None


def test_determinism():
    g = Geometry.cylinder(2, 6)
    a = run_until((0, 0, 0), StepCount(2000), g, RngStream(7, 3))
    b = run_until((0, 0, 0), StepCount(2000), g, RngStream(7, 3))
    c = run_until((0, 0, 0), StepCount(2000), g, RngStream(7, 4))
    assert a.points.tobytes() == b.points.tobytes()
    assert a.points.tobytes() != c.points.tobytes()


def test_path_csv(tmp_path, rng):
    g = Geometry.cylinder(2, 4)
    p = run_until((0, 0, 0), StepCount(5), g, rng)
    f = tmp_path / "p.csv"
    p.to_csv(f)
    lines = f.read_text().splitlines()
    assert lines[0] == "step,coord_1,coord_2,coord_3" and len(lines) == 7


@given(st.integers(0, 10**6), st.integers(3, 5), st.integers(-3, 3), st.integers(1, 3))
def test_excursion_ordering(seed, N, z, K):
    g = Geometry.cylinder(2, N)
    ex, path = excursions((0, 0, 0), z, K, g, np.random.default_rng(seed))
    assert ex.check()
    assert path.is_nearest_neighbour()
    assert path.length == ex.departures[-1]
