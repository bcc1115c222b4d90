"""The acceptance suite as callable checks.

Each ``criterion_k(seed, scale)`` runs one check and returns an
``OpResult`` whose status is "pass" or "fail" at the stated tolerance.
``scale="full"`` uses the stated sample sizes; ``scale="quick"`` shrinks
them for smoke runs and the reproducibility rerun.  Criterion k draws its
randomness from stream k of the run seed.  ``tol`` multiplies the stated
tolerances (1 keeps them; 0 turns every tolerance check into a failure).
"""
from __future__ import annotations

import filecmp
import math
import os
import tempfile
import time
from fractions import Fraction

import numpy as np

from . import disconnect as dc
from . import domination as dm
from . import interlace as il
from .lattice import Geometry, Region, boundaries, h_scale, make_box, make_slab, r_scale
from .potential import equilibrium, hit_prob, solve_killed
from .report import OpResult, RunReport, Table, exact, mc, windowed
from .rng import RngStream

SCALES = ("full", "quick")


def _rng(seed: int, k: int):
    return RngStream(int(seed), k).generator()


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _check_scale(scale: str):
    if scale not in SCALES:
        raise ValueError(f"scale must be one of {SCALES}")


def random_target_set(g: Geometry, r: int, rng, max_size: int = 5) -> Region:
    """A few uniform points of T x (-r, r)."""
    n = int(rng.integers(1, max_size + 1))
    pts = []
    for _ in range(n):
        y = rng.integers(0, g.N, size=g.d)
        z = int(rng.integers(-r + 1, r))
        pts.append(tuple(int(c) for c in y) + (z,))
    return Region.from_points(pts, g)


def random_instance(rng) -> tuple:
    """(x, K, U): U a random blob in Z^3 or a random cylinder slab, K a subset, x in U."""
    if rng.random() < 0.5:
        g = Geometry.lattice(3)
        R = int(rng.integers(1, 4))
        box = make_box((0, 0, 0), R, g).sorted_points()
        keep = [p for p in box if rng.random() < 0.85]
        U = Region.from_points(keep or box[:1], g)
    else:
        g = Geometry.cylinder(2, int(rng.integers(3, 6)))
        L = int(rng.integers(0, 3))
        U = make_slab(g, -L, L)
    pts = U.sorted_points()
    m = int(rng.integers(1, min(8, len(pts)) + 1))
    K = Region.from_points([pts[i] for i in rng.choice(len(pts), m, replace=False)], g)
    x = pts[int(rng.integers(len(pts)))]
    return x, K, U


# ---------------------------------------------------------------- 1


def criterion_1(seed: int = 0, scale: str = "full", tol: float = 1.0) -> OpResult:
    """Hitting law from q equals (d+1)(h-r)/N^d e_{K,B~}, pointwise and summed."""
    _check_scale(scale)
    rng = _rng(seed, 1)
    Ns, nsets = ((4, 5, 6), 5) if scale == "full" else ((4,), 2)
    rows, worst_pt, worst_sum = [], 0.0, 0.0
    for N in Ns:
        params = dm.DominationParams(2, N, 1.0, 3.5)
        for i in range(nsets):
            K = random_target_set(params.geometry, params.r, rng)
            res = dm.key_identity(K, params)
            worst_pt = max(worst_pt, res.residual)
            worst_sum = max(worst_sum, res.sum_residual)
            rows.append([N, i, len(K), res.capacity, res.residual, res.sum_residual])
    ok = worst_pt <= 1e-9 * tol and worst_sum <= 1e-9 * tol
    return OpResult(
        "key_identity", {"d": 2, "N": list(Ns), "sets": nsets},
        {"max_residual": exact(worst_pt), "max_sum_residual": exact(worst_sum)},
        _status(ok), tables={"residuals": Table(["N", "set", "size", "capacity", "residual", "sum_residual"], rows)},
    )


# ---------------------------------------------------------------- 2


def criterion_2(seed: int = 0, scale: str = "full", tol: float = 1.0) -> OpResult:
    """Green symmetry, last-exit vs direct hitting probabilities, sandwich bounds, e support and cap <= |K|."""
    _check_scale(scale)
    rng = _rng(seed, 2)
    n = 20 if scale == "full" else 6
    rows = []
    sym = cross = 0.0
    bounds_ok = support_ok = cap_ok = True
    for i in range(n):
        x, K, U = random_instance(rng)
        S = solve_killed(U)
        G = S.green
        s = float(np.abs(G - G.T).max())
        hp = hit_prob(x, K, U, S)
        eq = equilibrium(K, U)
        _, inner = boundaries(K)
        supp = [tuple(p) for p, v in zip(eq.points.tolist(), eq.values) if v > 0]
        b_ok = hp.lower <= hp.value + 1e-12 and hp.value <= hp.upper + 1e-12
        s_ok = all(p in inner for p in supp) and bool(np.all(eq.values >= 0))
        c_ok = eq.capacity <= len(K)
        sym, cross = max(sym, s), max(cross, hp.discrepancy)
        bounds_ok &= b_ok
        support_ok &= s_ok
        cap_ok &= c_ok
        rows.append([i, U.geometry.kind, len(U), len(K), s, hp.value, hp.direct, hp.lower, hp.upper,
                     eq.capacity, b_ok, s_ok, c_ok])
    ok = sym <= 1e-10 * tol and cross <= 1e-9 * tol and bounds_ok and support_ok and cap_ok
    return OpResult(
        "potential_identities", {"instances": n},
        {"max_asymmetry": exact(sym), "max_cross_method": exact(cross),
         "bounds_hold": exact(bounds_ok), "support_ok": exact(support_ok), "cap_le_size": exact(cap_ok)},
        _status(ok),
        tables={"instances": Table(
            ["instance", "geometry", "size_U", "size_K", "asymmetry", "last_exit", "direct",
             "lower", "upper", "capacity", "bounds_ok", "support_ok", "cap_ok"], rows)},
    )


# ---------------------------------------------------------------- 3


def criterion_3(seed: int = 0, scale: str = "full", tol: float = 1.0) -> OpResult:
    """e_{A,B~} <= e_{A,C~} pointwise and lambda e_{A,B~} <= v e_A with certified margin, v = 10(d+1) alpha."""
    _check_scale(scale)
    alpha = 0.05
    params = dm.DominationParams(2, 16, alpha, 10 * 3 * alpha, 0.5)
    rep = dm.intensity_domination(params)
    ok = rep.chain_holds and rep.status == "pass" and rep.certified_margin > 0 and tol > 0
    rows = [[*p, ab, ac, a, rep.v * a - rep.lam * ab]
            for p, ab, ac, a in zip(rep.points.tolist(), rep.e_AB, rep.e_AC, rep.e_A)]
    return OpResult(
        "intensity_domination", params.as_dict(),
        {"margin": windowed(rep.margin, rep.v * rep.e_A_error),
         "certified_margin": exact(rep.certified_margin),
         "lambda": exact(rep.lam), "chain_holds": exact(rep.chain_holds)},
        _status(ok),
        tables={"margins": Table(["x_1", "x_2", "x_3", "e_A_Btilde", "e_A_Ctilde", "e_A", "margin"], rows)},
    )


# ---------------------------------------------------------------- 4


VACANT_CONFIGS = (
    # (K' radius or None for {0}, K radius, u)
    (None, 2, 1.0),
    (1, 2, 0.2),
)


def criterion_4(seed: int = 0, scale: str = "full", tol: float = 1.0) -> OpResult:
    """Void frequencies of K' within 3 sigma of exp(-u cap(K')), and I^u nested in u."""
    _check_scale(scale)
    rng = _rng(seed, 4)
    reps = 10**5 if scale == "full" else 5000
    nsup = 200 if scale == "full" else 20
    g = Geometry.lattice(3)
    rows, zs = [], []
    for sub, rad, u in VACANT_CONFIGS:
        K = make_box((0, 0, 0), rad, g)
        K_sub = Region.from_points([(0, 0, 0)], g) if sub is None else make_box((0, 0, 0), sub, g)
        rep = il.vacant_check(K_sub, K, u, reps, rng)
        zs.append(rep.z)
        rows.append([len(K_sub), len(K), u, reps, rep.frequency, rep.stderr, rep.target, rep.cap_sub, rep.z])
    K = make_box((0, 0, 0), 1, g)
    levels = (0.5, 1.0, 1.5, 2.0)
    nested = True
    for _ in range(nsup):
        cloud = il.sample_cloud(K, levels[-1], rng)
        traces = [il.trace(cloud.at_level(u), K).vertices for u in levels]
        nested &= all(a <= b for a, b in zip(traces[:-1], traces[1:]))
    ok = all(abs(z) <= 3 * tol for z in zs) and nested
    return OpResult(
        "vacant_law", {"reps": reps, "superposition_samples": nsup},
        {"z_scores": [mc(z, 1.0) for z in zs], "superposition_nested": exact(nested)},
        _status(ok),
        tables={"void": Table(["size_K_sub", "size_K", "u", "reps", "frequency", "stderr",
                               "target", "cap_K_sub", "z"], rows)},
    )


# ---------------------------------------------------------------- 5


def criterion_5(seed: int = 0, scale: str = "full", tol: float = 1.0) -> OpResult:
    """Exact occupation tail <= exp(-n Psi_N) for every type, v and n; rate zero at the product measure."""
    _check_scale(scale)
    vs = (0.3, 0.5, 0.7)
    ns = (8, 12, 16) if scale == "full" else (8,)
    rows, all_hold, zero_err, zero_val = [], True, 0.0, 0.0
    for N in (10, 20):
        p = Fraction(h_scale(N) + r_scale(N), 2 * h_scale(N))
        zero_err = max(zero_err, float(np.abs(dm.rate_minimizer(p) - dm.zero_measure(p)).max()))
        zero_val = max(zero_val, abs(dm.rate_function(dm.zero_measure(p), p=p)))
        for gamma in dm.PAIRS:
            for v in vs:
                for n in ns:
                    c = dm.ld_check(gamma, v, n, p=p)
                    all_hold &= c.holds
                    rows.append([N, f"{gamma[0]:+d}{gamma[1]:+d}", v, n, float(c.lhs), c.psi,
                                 float(c.bound), c.certificate, c.holds])
    ok = all_hold and zero_err <= 1e-6 * tol and zero_val <= 1e-12 * tol and tol > 0
    return OpResult(
        "ld_bound", {"N": [10, 20], "v": list(vs), "n": list(ns)},
        {"all_hold": exact(all_hold), "cases": exact(len(rows)),
         "minimizer_error": exact(zero_err), "rate_at_zero": exact(zero_val)},
        _status(ok),
        tables={"cases": Table(["N", "gamma", "v", "n", "lhs", "psi", "bound", "certificate", "holds"], rows)},
    )


# ---------------------------------------------------------------- 6


LAPLACE_CONFIGS = ((1.0, 1.0), (2.0, 0.5))


def criterion_6(seed: int = 0, scale: str = "full", tol: float = 1.0) -> OpResult:
    """Laplace transform of zeta(u) against the Bessel form, and zeta(2) vs 4 zeta(1) in law."""
    _check_scale(scale)
    rng = _rng(seed, 6)
    reps, n = (10**5, 10**4) if scale == "full" else (4000, 10**3)
    ks_reps = 2 * 10**4 if scale == "full" else 2000
    rows, zs = [], []
    for theta, u in LAPLACE_CONFIGS:
        c = dc.zeta_laplace_check(theta, u, reps, n, rng)
        zs.append(c.z)
        rows.append([theta, u, n, reps, c.closed, c.mc, c.mc_se, c.mc_fine, c.mc_fine_se,
                     c.corrected, c.corrected_se, c.allowance, c.z_raw, c.z])
    ks = dc.zeta_scaling_ks(n, ks_reps, rng)
    laplace_ok = all(abs(z) <= 3 * tol for z in zs)
    ok = laplace_ok and ks <= 0.02 * tol
    return OpResult(
        "zeta", {"reps": reps, "n": n, "ks_reps": ks_reps},
        {"z_scores": [mc(z, 1.0) for z in zs], "laplace_ok": exact(laplace_ok),
         "scaling_ks": mc(ks, 1.36 * math.sqrt(2 / ks_reps))},
        _status(ok),
        tables={"laplace": Table(["theta", "u", "n", "reps", "closed", "mc", "mc_se", "mc_16n", "mc_16n_se",
                                  "corrected", "corrected_se", "allowance", "z_raw", "z"], rows),
                "scaling": Table(["n", "reps", "ks"], [[n, ks_reps, ks]])},
    )


# ---------------------------------------------------------------- 7


def criterion_7(seed: int = 0, scale: str = "full", tol: float = 1.0) -> OpResult:
    """Visits to the start before leaving (-h, h) are Geometric(1/h); return probability 1 - 1/h."""
    _check_scale(scale)
    rng = _rng(seed, 7)
    reps = 10**4 if scale == "full" else 2000
    N = 10
    rep = dc.geometric_visits(N, reps, rng)
    err = abs(rep.return_probability - (1 - 1 / rep.h))
    ok = rep.pvalue * tol > 0.01 and err <= 1e-12 * tol
    return OpResult(
        "geometric_visits", {"N": N, "h": rep.h, "reps": reps},
        {"pvalue": mc(rep.pvalue, None), "chi2": mc(rep.chi2, None),
         "mean_visits": mc(rep.mean, rep.stderr), "return_probability_error": exact(err)},
        _status(ok),
        tables={"visits": Table(["rep", "visits"], [[i, int(c)] for i, c in enumerate(rep.counts)])},
    )


# ---------------------------------------------------------------- 8


def criterion_8(seed: int = 0, scale: str = "full", tol: float = 1.0) -> OpResult:
    """Walk trace in A dominated by I^v in A for coverage, size and small-set statistics.

    The stated configuration (alpha = 0.1) has K = 0 at N = 12; a second run
    at alpha = 1 (K = 1) exercises a non-empty walk trace.
    """
    _check_scale(scale)
    rng = _rng(seed, 8)
    reps = 1000 if scale == "full" else 100
    rows, statuses, values = [], [], {}
    for alpha in (0.1, 1.0):
        params = dm.DominationParams(2, 12, alpha, 2 * 3 * alpha, 0.5)
        rep = dm.domination_experiment(params, reps, rng, sigmas=3 * tol)
        statuses.append(rep.passed)
        tag = f"alpha={alpha}"
        values[tag] = {
            "K": exact(rep.K), "status": rep.status,
            "point_pass_fraction": mc(rep.point_pass_fraction, None),
            "size_walk": mc(rep.size_stat.walk, rep.size_stat.walk_se),
            "size_interlacement": mc(rep.size_stat.interlacement, rep.size_stat.interlacement_se),
        }
        rows += [[alpha, *r] for r in rep.rows()]
    return OpResult(
        "domination", {"d": 2, "N": 12, "epsilon": 0.5, "v_over_alpha": 6, "reps": reps},
        values, _status(all(statuses)),
        tables={"statistics": Table(["alpha", "statistic", "walk", "walk_se", "interlacement",
                                     "interlacement_se", "passed"], rows)},
    )


# ---------------------------------------------------------------- 9


DK_ALPHA = 5.0


def criterion_9(seed: int = 0, scale: str = "full", tol: float = 1.0) -> OpResult:
    """KS distance of inf_z D^z_K / N^4 to (d+1) zeta(alpha) decreases from N = 8 to N = 12."""
    _check_scale(scale)
    rng = _rng(seed, 9)
    reps = 200 if scale == "full" else 50
    ref_reps, ref_n = (2000, 10**6) if scale == "full" else (300, 10**5)
    ref = dc.dk_reference(2, DK_ALPHA, ref_reps, rng, ref_n)
    rows, ks = [], {}
    for N in (8, 12):
        rep = dc.dk_scaling(N, 2, DK_ALPHA, reps, rng, reference=ref)
        ks[N] = rep.ks
        rows.append([N, rep.sample.K, reps, float(np.median(rep.sample.values)), float(np.median(ref)),
                     rep.ks, rep.pvalue])
    ok = 3 <= min(r[1] for r in rows) and max(r[1] for r in rows) <= 10 and ks[12] < ks[8] and tol > 0
    se = 1.36 * math.sqrt(1 / reps + 1 / ref_reps)
    return OpResult(
        "dk_scaling", {"d": 2, "alpha": DK_ALPHA, "reps": reps, "ref_reps": ref_reps, "ref_n": ref_n},
        {"ks_N8": mc(ks[8], se), "ks_N12": mc(ks[12], se)},
        _status(ok),
        tables={"ks": Table(["N", "K", "reps", "median", "reference_median", "ks", "pvalue"], rows)},
    )


# ---------------------------------------------------------------- 10


def criterion_10(seed: int = 0, scale: str = "full", tol: float = 1.0) -> OpResult:
    """Medians of T_N / N^4 within a factor 4 over N in {4, 6, 8}; N^4 / T_N finite."""
    _check_scale(scale)
    rng = _rng(seed, 10)
    reps = 100 if scale == "full" else 20
    rep = dc.tightness_report((4, 6, 8), reps, rng, factor=4.0 * tol)
    rows = [[N, i, int(t), t / N**4] for N in rep.Ns for i, t in enumerate(rep.samples[N])]
    return OpResult(
        "tightness", {"d": 2, "N": [4, 6, 8], "reps": reps},
        {"medians": {str(N): mc(m, None) for N, m in rep.medians.items()},
         "spread": mc(rep.spread, None), "finite": exact(rep.finite)},
        _status(rep.passed),
        tables={"samples": Table(["N", "rep", "T_N", "T_N_scaled"], rows)},
    )


# ---------------------------------------------------------------- 11


def criterion_11(seed: int = 0, scale: str = "full", tol: float = 1.0) -> OpResult:
    """Exact sup-TV of the return position decreases in N; coupling mismatches match it."""
    _check_scale(scale)
    rng = _rng(seed, 11)
    K = 20001 if scale == "full" else 2001
    tvs, rows = {}, []
    for N in (4, 6):
        params = dm.DominationParams(2, N, 1.0, 3.5)
        res = dm.homogenization_tv(params)
        tvs[N] = res.sup_tv
        rows.append([N, params.h - params.r, res.sup_tv])
    p4 = dm.DominationParams(2, 4, 1.0, 3.5)
    cross = float(np.abs(dm.homogenization_tv(p4, "solve").tv - dm.homogenization_tv(p4).tv).max())
    cp = dm.couple_excursions(p4, rng, K)
    ok = tvs[6] < tvs[4] and abs(cp.z) <= 3 * tol and cp.exits_match
    return OpResult(
        "homogenization", {"d": 2, "N": [4, 6], "excursions": K},
        {"sup_tv_N4": exact(tvs[4]), "sup_tv_N6": exact(tvs[6]), "solve_vs_fourier": exact(cross),
         "mismatch_frequency": mc(cp.frequency, cp.stderr), "mismatch_z": mc(cp.z, 1.0),
         "expected_mismatch": exact(cp.expected)},
        _status(ok),
        tables={"sup_tv": Table(["N", "gap", "sup_tv"], rows),
                "coupling": Table(["attempts", "mismatches", "frequency", "sup_tv", "z"],
                                  [[cp.attempts, cp.mismatches, cp.frequency, cp.sup_tv, cp.z]])},
    )


# ---------------------------------------------------------------- 12

CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
    11: criterion_11,
}


def run_criteria(seed: int = 0, scale: str = "full", which=None, config: dict | None = None,
                 tol: float = 1.0) -> RunReport:
    """Criteria 1-11 (or ``which``) in order, each timed.

    ``tol`` multiplies every tolerance; 0 forces failures.
    """
    report = RunReport("suite", dict(config or {"seed": seed, "scale": scale}))
    t0 = time.perf_counter()
    for k in sorted(which or CRITERIA):
        t = time.perf_counter()
        res = CRITERIA[k](seed, scale, tol)
        res.op = f"c{k:02d}_{res.op}"
        res.wall_time = time.perf_counter() - t
        report.results.append(res)
    report.wall_time = time.perf_counter() - t0
    return report


def csv_files(outdir) -> list:
    return sorted(f for f in os.listdir(outdir) if f.endswith(".csv"))


def compare_csv(dir_a, dir_b) -> tuple:
    """(identical, differing files) over the CSVs of two run directories."""
    fa, fb = csv_files(dir_a), csv_files(dir_b)
    if fa != fb:
        return False, sorted(set(fa) ^ set(fb))
    _, mismatch, errors = filecmp.cmpfiles(dir_a, dir_b, fa, shallow=False)
    bad = mismatch + errors
    return not bad, bad


def criterion_12(seed: int = 0, scale: str = "quick", which=None, first_dir=None) -> OpResult:
    """Rerun criteria 1-11 with the same seed; every CSV must be byte-identical.

    ``first_dir`` holds a finished run to compare against; otherwise the
    criteria run twice.
    """
    _check_scale(scale)
    with tempfile.TemporaryDirectory() as tmp:
        dirs = []
        for i in range(1 if first_dir else 2):
            d = os.path.join(tmp, f"run{i}")
            run_criteria(seed, scale, which).write(d)
            dirs.append(d)
        a, b = (first_dir, dirs[0]) if first_dir else dirs
        same, bad = compare_csv(a, b)
        n = len(csv_files(b))
    return OpResult(
        "reproducibility", {"seed": seed, "scale": scale},
        {"csv_files": exact(n), "identical": exact(same)},
        _status(same and n > 0), notes=("differing: " + ", ".join(bad)) if bad else "",
    )
