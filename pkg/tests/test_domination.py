import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cylwalk import domination as dm
from cylwalk.lattice import Geometry, Region, boundaries, embed_region

PAIRS = dm.PAIRS


def params(N, alpha=1.0, ratio=2.0, eps=0.5, d=2):
    return dm.DominationParams.with_ratio(d, N, alpha, ratio, eps)


# ---------------------------------------------------------------- scales


def test_param_validation():
    with pytest.raises(ValueError):
        dm.DominationParams(2, 10, 1.0, 3.0)  # v must exceed (d+1) alpha
    with pytest.raises(ValueError):
        dm.DominationParams(2, 10, 0.0, 1.0)
    with pytest.raises(ValueError):
        dm.DominationParams(2, 10, 1.0, 4.0, epsilon=1.0)


@given(st.integers(2, 40), st.floats(0.01, 50.0), st.floats(1.001, 5.0), st.floats(0.05, 0.95))
def test_scale_invariants(N, alpha, ratio, eps):
    p = dm.DominationParams.with_ratio(2, N, alpha, ratio, eps)
    assert 0 < p.delta <= 1
    assert p.K <= p.K_hat <= p.K_prime
    assert p.lam > p.lam_prime > 0
    assert p.lam / p.lam_prime == pytest.approx((1 + 4 * p.delta / 5) / (1 + 3 * p.delta / 5))
    assert p.lam_prime == pytest.approx((1 + 3 * p.delta / 5) * alpha * 3 * (1 - p.r / p.h))


def test_nested_regions():
    p = params(16)
    assert p.nested
    regs = p.regions()
    assert regs["A"].issubset(regs["C_tilde"]) and regs["C_tilde"].issubset(regs["B_tilde"])
    assert len(regs["A"]) == 729


def test_M_value():
    # M = [exp(sqrt(ln 16))] + 1 = [e^1.6651] + 1 = 6
    assert math.exp(math.sqrt(math.log(16))) == pytest.approx(5.2863, abs=1e-4)
    assert params(16).M == 6


# ---------------------------------------------------------------- key identity


def test_key_identity_small():
    p = params(4)
    g = p.geometry
    rng = np.random.default_rng(0)
    for _ in range(3):
        pts = {(int(rng.integers(4)), int(rng.integers(4)), int(rng.integers(-3, 4))) for _ in range(3)}
        res = dm.key_identity(Region.from_points(pts, g), p)
        assert res.residual <= 1e-9
        assert res.sum_residual <= 1e-9
        assert res.factor == pytest.approx(3 * (15 - 4) / 16)


def test_key_identity_empty():
    p = params(4)
    assert dm.key_identity_residual(Region(p.geometry, frozenset()), p) == 0.0


# ---------------------------------------------------------------- homogenization


def test_homogenization_translation_and_side():
    res = dm.homogenization_tv(params(4))
    h = 15
    up = res.points[:, -1] == h
    assert np.allclose(res.tv[up], res.tv[up][0], atol=1e-15)
    assert np.allclose(res.tv[~up], res.tv[up][0], atol=1e-15)
    assert np.all(np.sign(res.entry_heights) == np.sign(res.points[:, -1]))
    assert np.all(np.abs(res.entry_heights) == 4)
    assert res.law.sum() == pytest.approx(1.0, abs=1e-12)


def test_homogenization_decreases():
    t4 = dm.homogenization_tv(params(4)).sup_tv
    t6 = dm.homogenization_tv(params(6)).sup_tv
    assert 0 < t6 < t4


def test_homogenization_engines_agree():
    a = dm.homogenization_tv(params(4), "fourier").tv
    b = dm.homogenization_tv(params(4), "solve").tv
    assert np.abs(a - b).max() <= 1e-12


def test_coupling():
    cp = dm.couple_excursions(params(4), np.random.default_rng(1), K=3001)
    assert cp.attempts == 3000
    assert cp.exits_match
    assert cp.frequency <= cp.sup_tv + 3 * cp.stderr


# ---------------------------------------------------------------- type chain


def test_type_chain_exact():
    rep = dm.type_chain(params(10), exact=True)
    assert rep.p == Fraction(83, 146)
    assert float(rep.p) == pytest.approx(0.568493, abs=1e-6)
    assert abs(rep.p - Fraction(1, 2)) == Fraction(10, 2 * 73)
    st_ = rep.stationary
    assert st_[0] + st_[1] == Fraction(1, 2)
    assert all(sum(row) == 1 for row in rep.matrix)
    # stationarity, exactly
    assert all(sum(st_[i] * rep.matrix[i, j] for i in range(4)) == st_[j] for j in range(4))


def test_type_chain_simulated():
    rep = dm.type_chain(params(10), n=20_000, rng=np.random.default_rng(2))
    assert rep.pvalue > 1e-3
    c = rep.counts
    assert sum(c.counts().values()) == c.n - 1
    assert c.pair_measure().sum() == pytest.approx(1.0)
    assert c.types[0, 0] == c.r  # first entry level is +r by convention


# ---------------------------------------------------------------- rate function


def test_rate_zeros():
    assert dm.rate_function(np.full(4, 0.25), limit=True) == 0.0
    p = params(10).p
    assert dm.rate_function(dm.zero_measure(p), p=p) == pytest.approx(0.0, abs=1e-15)
    assert np.abs(dm.rate_minimizer(p) - dm.zero_measure(p)).max() <= 1e-6


def test_rate_unequal_marginals():
    assert dm.rate_function(np.array([0, 1.0, 0, 0]), limit=True) == math.inf


def test_rate_rejects_non_probability():
    with pytest.raises(ValueError):
        dm.rate_function(np.array([0.5, 0.5, 0.5, 0.0]), limit=True)


@given(st.floats(0.0, 1.0), st.floats(0.0, 0.5), st.floats(0.5, 0.9))
def test_rate_nonnegative(A, b, p):
    if A + 2 * b > 1:
        return
    mu = np.array([[A, b], [b, 1 - A - 2 * b]])
    assert dm.rate_function(mu, p=p) >= 0


@given(st.sampled_from(PAIRS), st.floats(0.0, 0.95))
def test_psi_monotone_in_v(gamma, v):
    p = params(10).p
    a, _ = dm.psi(gamma, v, p)
    b, _ = dm.psi(gamma, min(v + 0.05, 1.0), p)
    assert b >= a - 1e-9


# ---------------------------------------------------------------- LD bound


def test_ld_v_above_one():
    c = dm.ld_check((1, 1), 1.2, 8, params(10))
    assert c.lhs == 0 and c.holds


def test_ld_small_v_trivial():
    c = dm.ld_check((1, -1), 0.2, 8, params(10))
    assert c.psi == pytest.approx(0.0, abs=1e-12)
    assert float(c.bound) == pytest.approx(1.0, abs=1e-12)
    assert c.holds


def test_ld_example_case():
    c = dm.ld_check((1, 1), 0.6, 12, params(10))
    assert c.holds and c.psi > 0 and c.lhs > 0


def test_ld_n_limit():
    with pytest.raises(ValueError):
        dm.ld_check((1, 1), 0.5, 21, params(10))


def test_occupation_tail_brute_force():
    # oracle: enumerate all 4 * 2^n paths of the pair chain
    import itertools
    p = Fraction(3, 5)
    n, v, gamma = 6, 0.5, (1, -1)
    tail = dm.occupation_tail(gamma, v, n, p)
    T = dm.transfer_matrix(p)
    for s0 in range(4):
        total = Fraction(0)
        for moves in itertools.product((0, 1), repeat=n):
            s, w, hits = s0, Fraction(1), 0
            for m in moves:
                b = PAIRS[s][1]
                t = PAIRS.index((b, b) if m == 0 else (b, -b))
                w *= T[s, t]
                hits += PAIRS[t] == gamma
                s = t
            if hits >= v * n:
                total += w
        assert tail[PAIRS[s0]] == total


@given(st.sampled_from(PAIRS), st.sampled_from([0.3, 0.45, 0.5, 0.65, 0.8]), st.integers(2, 12),
       st.sampled_from([6, 10, 20]))
def test_ld_bound_holds(gamma, v, n, N):
    assert dm.ld_check(gamma, v, n, params(N)).holds


# ---------------------------------------------------------------- good event


def test_good_event_large_scale():
    rep = dm.good_event_frequency(params(10, alpha=2000.0), 1000, np.random.default_rng(3))
    assert rep.K <= rep.K_hat <= rep.K_prime
    assert rep.frequency >= 0.99


def test_trial_success():
    f, exact = dm.trial_success(params(10), 20_000, np.random.default_rng(4))
    assert exact >= 0.2
    assert abs(f - exact) <= 3 * math.sqrt(exact * (1 - exact) / 20_000)


# ---------------------------------------------------------------- excursion measures


def test_poissonize_atoms_and_entry_law():
    p = params(12)
    rng = np.random.default_rng(5)
    _, inner = boundaries(embed_region(p.regions()["A"], p.regions()["C_tilde"]))
    entries = []
    for _ in range(150):
        mu, I = dm.poissonize(p, rng)
        assert mu.n_atoms <= mu.count
        for at in mu.atoms:
            assert at.entry in inner
        entries.append(mu.entry_points())
        assert I.vertices <= embed_region(p.regions()["A"], p.regions()["C_tilde"]).vertices
    entries = np.concatenate(entries)
    chi2, dof, pval = dm.entry_law_test(p, entries, bins=5)
    assert pval > 1e-3


def test_atom_counts_poisson():
    p = params(12)
    rng = np.random.default_rng(6)
    counts = np.array([dm.poissonize(p, rng)[0].count for _ in range(2000)])
    lam = p.mean_J_prime
    assert abs(counts.mean() - lam) <= 3 * math.sqrt(lam / len(counts))
    assert abs(counts.var(ddof=1) / counts.mean() - 1) <= 0.1


def test_count_tail_decays():
    rng = np.random.default_rng(7)
    tails = [dm.count_tail(params(12, alpha=a), 10_000, rng) for a in (20.0, 100.0, 500.0)]
    assert tails[0] > tails[1] > tails[2]
    assert tails[2] < 1e-3


def test_truncation_and_sprinkling():
    p = params(12)
    rng = np.random.default_rng(8)
    c = p.c_tilde
    for _ in range(50):
        base, _ = dm.poissonize(p, rng)
        mu, I = dm.truncate_sprinkle(p, rng, base)
        assert mu.count >= base.count
        assert mu.intensity > base.intensity
        for at in mu.atoms:
            assert np.abs(at.path).max() <= c + 1
        for at in base.atoms:
            inside = dm._in_box_index(at.path, p.a)
            assert set(inside.tolist()) <= set(at.trace.tolist())


def test_sprinkling_degenerate_at_16():
    assert dm.sprinkling_ratio(params(16)).status == "degenerate-scale"


def test_sprinkling_ratio_decreases():
    t24 = dm.sprinkling_ratio(params(24, eps=0.9))
    t48 = dm.sprinkling_ratio(params(48, eps=0.9))
    for t in (t24, t48):
        assert t.status == "ok"
        r = t.ratio
        assert np.all(np.isfinite(r) & (r >= 0))
    assert t48.max_ratio < t24.max_ratio


# ---------------------------------------------------------------- intensity and domination


def test_intensity_domination():
    p = dm.DominationParams(2, 16, 0.05, 10 * 3 * 0.05, 0.5)
    rep = dm.intensity_domination(p)
    assert rep.chain_holds
    assert rep.status == "pass" and rep.certified_margin > 0
    low = float(np.min(rep.lam * rep.e_AB / rep.e_A)) * 0.5
    assert dm.intensity_domination(p, v_test=low).status == "fail"


def test_domination_huge_v():
    p = dm.DominationParams(2, 12, 1.0, 60.0, 0.5)
    rep = dm.domination_experiment(p, 100, np.random.default_rng(9))
    assert rep.passed


def test_domination_zero_K():
    p = dm.DominationParams(2, 12, 0.1, 0.6, 0.5)
    assert p.K == 0
    rep = dm.domination_experiment(p, 50, np.random.default_rng(10))
    assert rep.status == "degenerate-K"
    assert all(s.walk == 0 for s in rep.point_stats)
    assert rep.passed
