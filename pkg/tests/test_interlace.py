import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from cylwalk import interlace as il
from cylwalk.lattice import Geometry, Region, boundaries, make_box
from cylwalk.potential import whole_space_exact

WATSON_G0 = 1.516386059151978
G3 = Geometry.lattice(3)


def box(r, c=(0, 0, 0)):
    return make_box(c, r, G3)


def test_zero_level_is_empty(rng):
    cloud = il.sample_cloud(box(1), 0.0, rng)
    assert cloud.trajectories == [] and len(il.trace(cloud, box(1))) == 0


def test_negative_level_rejected(rng):
    with pytest.raises(ValueError):
        il.sample_cloud(box(1), -1.0, rng)


def test_empty_cloud_probability():
    K = box(1)
    rep = il.vacant_check(K, K, 0.5, 100_000, np.random.default_rng(2))
    assert abs(rep.empty_frequency - rep.empty_target) <= 3 * math.sqrt(
        rep.empty_target * (1 - rep.empty_target) / rep.reps)
    # with K' = K, avoiding K' is the same event as an empty cloud
    assert rep.frequency == rep.empty_frequency
    assert abs(rep.z) <= 3


def test_start_points_follow_equilibrium_measure():
    K = box(1)
    eq = whole_space_exact(K)
    cloud = il.sample_cloud(K, 10_000 / eq.capacity, np.random.default_rng(4))
    starts = [t.start for t in cloud.trajectories]
    _, inner = boundaries(K)
    assert all(s in inner for s in starts)
    idx = {p: i for i, p in enumerate(map(tuple, eq.points.tolist()))}
    obs = np.bincount([idx[s] for s in starts], minlength=len(idx))
    exp = eq.values / eq.values.sum() * len(starts)
    keep = exp > 0
    assert obs[~keep].sum() == 0
    assert stats.chisquare(obs[keep], exp[keep]).pvalue > 1e-3


def test_trajectories_are_walks(rng):
    cloud = il.sample_cloud(box(1), 2.0, rng)
    for t in cloud.trajectories:
        assert t.is_nearest_neighbour()
        assert np.abs(t.points).max() <= 1


def test_trace_of_single_trajectory(rng):
    K = box(2)
    cloud = il.sample_cloud(K, 3.0, rng)
    while len(cloud.trajectories) < 1:
        cloud = il.sample_cloud(K, 3.0, rng)
    one = il.TrajectoryCloud(cloud.u, K, cloud.capacity, cloud.trajectories[:1], cloud.labels[:1],
                             cloud.window, cloud.mode, cloud.R_kill, cloud.leakage, cloud.capacity_error)
    A = box(1)
    want = {tuple(p) for p in cloud.trajectories[0].points.tolist()} & A.vertices
    assert il.trace(one, A).vertices == want
    far = box(0, (50, 50, 50))
    assert len(il.trace(cloud, far)) == 0


def test_vacant_origin_in_box():
    # K' = {0} in K = B(0, 2), u = 1: exp(-cap({0})) = exp(-1 / G(0)) ~ 0.5171
    target = math.exp(-1 / WATSON_G0)
    assert target == pytest.approx(0.5171, abs=1e-4)
    K_sub = Region.from_points([(0, 0, 0)], G3)
    rep = il.vacant_check(K_sub, box(2), 1.0, 100_000, np.random.default_rng(8))
    assert rep.target == pytest.approx(target, abs=1e-6)
    assert abs(rep.frequency - target) <= 3 * math.sqrt(target * (1 - target) / rep.reps)


def test_vacant_frequency_decreases_in_level():
    K_sub = box(1)
    freqs = [il.vacant_check(K_sub, box(2), u, 20_000, np.random.default_rng(9)).frequency
             for u in (0.1, 0.5, 1.0, 3.0)]
    assert all(a > b for a, b in zip(freqs, freqs[1:]))
    assert freqs[-1] < 0.01


def test_vacant_requires_subset():
    with pytest.raises(ValueError):
        il.vacant_check(box(2), box(1), 1.0, 10)


def test_superposition_monotone(rng):
    K = box(1)
    for _ in range(30):
        cloud = il.sample_cloud(K, 2.0, rng)
        prev = set()
        for u in (0.25, 0.5, 1.0, 2.0):
            cur = il.trace(cloud.at_level(u), K).vertices
            assert prev <= cur
            prev = cur
    with pytest.raises(ValueError):
        cloud.at_level(3.0)


def test_leakage_decreases_with_kill_radius():
    K = box(1)
    vals = [il.leakage_bound(K, R) for R in (3, 5, 8, 12)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[0] < 1


def test_truncated_mode_reports_leakage(rng):
    cloud = il.sample_cloud(box(1), 1.0, rng, mode="truncated", R_kill=5)
    assert cloud.R_kill == 5
    # walks die on stepping onto S(0, R_kill + 1)
    assert cloud.leakage == pytest.approx(il.leakage_bound(box(1), 6))
    for t in cloud.trajectories:
        assert np.abs(t.points).max() <= 6


def test_translation_invariance():
    s = np.array([3, -2, 1])
    K0, K1 = box(1), box(1, tuple(s))
    _, f0, _ = il.coverage(K0, 0.4, 20_000, np.random.default_rng(12))
    _, f1, _ = il.coverage(K1, 0.4, 20_000, np.random.default_rng(13))
    # rows of K.array are sorted, and a translation keeps the order
    se = np.sqrt(f0 * (1 - f0) / 20_000 + f1 * (1 - f1) / 20_000)
    assert np.all(np.abs(f0 - f1) <= 3.5 * se + 1e-12)


def test_star_decay():
    zero = il.planar_star_decay(0.0, [1, 3], 100)
    assert np.all(zero.p_hat == 0)
    tab = il.planar_star_decay(0.05, [3, 6, 10], 10_000, np.random.default_rng(14))
    assert np.all(np.diff(tab.p_hat) <= 0)
    assert tab.p_hat[0] - tab.p_hat[-1] > 3 * math.hypot(tab.stderr[0], tab.stderr[-1])


def test_cloud_json(tmp_path, rng):
    cloud = il.sample_cloud(box(1), 1.0, rng)
    doc = json.loads(cloud.to_json(tmp_path / "c.json"))
    assert set(doc) >= {"u", "cap", "leakage", "trajectories"}
    assert len(doc["trajectories"]) == len(cloud.trajectories)


def test_decay_csv(tmp_path):
    il.planar_star_decay(0.0, [1, 2], 10).to_csv(tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "L,p_hat,stderr,reps"


@given(st.integers(0, 2**31), st.floats(0.1, 3.0))
def test_cloud_count_and_starts(seed, u):
    K = box(1)
    cloud = il.sample_cloud(K, u, np.random.default_rng(seed))
    _, inner = boundaries(K)
    assert all(t.start in inner for t in cloud.trajectories)
    assert len(cloud.labels) == len(cloud.trajectories)
    assert np.all((cloud.labels >= 0) & (cloud.labels <= u))


def test_count_is_poisson():
    K = box(1)
    rng = np.random.default_rng(15)
    lam = 1.5 * whole_space_exact(K).capacity
    counts = np.array([len(il.sample_cloud(K, 1.5, rng).trajectories) for _ in range(3000)])
    assert abs(counts.mean() - lam) <= 3 * math.sqrt(lam / len(counts))
    # dispersion index near 1
    disp = counts.var(ddof=1) * (len(counts) - 1) / counts.mean()
    assert stats.chi2.sf(disp, len(counts) - 1) > 1e-3 and stats.chi2.cdf(disp, len(counts) - 1) > 1e-3
