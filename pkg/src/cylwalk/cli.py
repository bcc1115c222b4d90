"""Command-line experiment runner.

    cylwalk <subcommand> [--config FILE] [--key value ...]

Keys come from an optional INI file (flat ``key = value`` lines, an optional
section header is ignored) and are overridden by flags.  Each run echoes its
full config, writes ``report.json`` and CSV tables to ``<out>/<subcommand>/``
(``out`` defaults to $CYLWALK_OUT, else ./cylwalk-out) and exits with

    0 pass, 2 fail, 3 inconclusive, 64 usage error or unknown subcommand,
    65 invalid config, 70 step budget exceeded.

Nothing is written unless the run completes.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy import stats

from . import acceptance
from . import disconnect as dc
from . import domination as dm
from . import interlace as il
from . import walk
from .lattice import Geometry, Region, make_box, make_slab
from .potential import equilibrium, hit_prob, solve_killed, whole_space_exact
from .report import OpResult, RunReport, Table, exact, mc, windowed
from .rng import RngStream

EXIT_USAGE, EXIT_CONFIG, EXIT_BUDGET = 64, 65, 70
ENV_OUT = "CYLWALK_OUT"


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class BudgetExceeded(Exception):
    pass


# ---------------------------------------------------------------- config


def _ints(s) -> list:
    return [int(x) for x in str(s).replace(" ", "").split(",") if x]


def _floats(s) -> list:
    return [float(x) for x in str(s).replace(" ", "").split(",") if x]


KEYS = {
    "d": (int, "cylinder dimension d (the lattice is Z^(d+1))"),
    "N": (_ints, "side length, or a comma list"),
    "alpha": (float, "excursion level alpha"),
    "v": (_floats, "interlacement level v (ld-check: comma list of occupation levels)"),
    "epsilon": (float, "A = B(0, N^(1-epsilon))"),
    "u": (float, "interlacement or local-time level u"),
    "theta": (float, "Laplace variable theta"),
    "seed": (int, "run seed"),
    "reps": (int, "replicates"),
    "budget": (int, "step cap per walk"),
    "out": (str, "output directory"),
    "R_kill": (int, "kill radius of truncated interlacement trajectories"),
    "Z_max": (int, "restrict inf_z D^z_K to |z| <= Z_max"),
    "n": (_ints, "scale or sample size (ld-check: comma list of lengths)"),
    "tol": (float, "tolerance override (suite: multiplier of all tolerances)"),
    "radius": (int, "radius of the base box K"),
    "sub_radius": (int, "radius of the sub-box K' (-1 for {0})"),
    "Ls": (_ints, "comma list of star-path distances"),
    "scale": (str, "suite scale: full or quick"),
    "check": (str, "dominate: experiment or intensity"),
    "workers": (int, "worker processes for replicated runs"),
}

COMMON = {"seed": 0}

COMMANDS = {
    # name: (required keys, defaults)
    "potential-check": (("d", "N"), {"reps": 20, "tol": 1e-9}),
    "identity": (("d", "N"), {"reps": 5, "tol": 1e-9}),
    "homogenize": (("d", "N"), {"reps": 0}),
    "type-chain": (("d", "N"), {"n": [10**5], "tol": 0.01}),
    "ld-check": (("N",), {"v": [0.3, 0.5, 0.7], "n": [8, 12, 16]}),
    "poissonize": (("d", "N", "alpha", "v"), {"epsilon": 0.5, "reps": 200}),
    "sprinkle": (("d", "N", "epsilon"), {"alpha": 1.0, "v": None}),
    "dominate": (("d", "N", "alpha", "v"), {"epsilon": 0.5, "reps": 1000, "check": "experiment"}),
    "interlace": (("u",), {"d": 2, "radius": 1, "reps": 10**4}),
    "vacant": (("u",), {"d": 2, "radius": 1, "sub_radius": -1, "reps": 10**5, "tol": 3.0}),
    "star-decay": (("u",), {"Ls": [1, 2, 3, 4, 6], "reps": 2000}),
    "disconnect": (("d", "N"), {"reps": 10, "budget": dc.DEFAULT_CAP, "workers": 1}),
    "zeta": (("u", "theta"), {"reps": 10**5, "n": [10**4], "tol": 3.0}),
    "dk-scaling": (("d", "N", "alpha"), {"reps": 200, "budget": dc.DEFAULT_CAP, "Z_max": None}),
    "tightness": (("d", "N"), {"reps": 100, "tol": 4.0}),
    "suite": ((), {"scale": "full", "tol": 1.0}),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cylwalk", description="Cylinder walk and random interlacement experiments.")
    sub = p.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    sub.required = True
    for name, (req, defaults) in COMMANDS.items():
        sp = sub.add_parser(name, help=(HANDLERS[name].__doc__ or "").strip().splitlines()[0])
        sp.add_argument("--config", help="INI file with key = value lines")
        for key, (_, helptext) in KEYS.items():
            flag = "--" + key.replace("_", "-")
            aliases = [flag] + (["--" + key] if "_" in key else [])
            if key == "reps":
                aliases.append("--replicates")
            extra = " (required)" if key in req else ""
            sp.add_argument(*aliases, dest=key, default=None, help=helptext + extra)
    return p


def read_config_file(path: str) -> dict:
    if not os.path.isfile(path):
        raise CliError(EXIT_CONFIG, f"config file not found: {path}")
    with open(path) as fh:
        text = fh.read()
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=", ":"))
    cp.optionxform = str
    try:
        cp.read_string("[__flat__]\n" + text)
    except configparser.Error as e:
        raise CliError(EXIT_CONFIG, f"cannot parse {path}: {e}") from e
    out = {}
    for sec in cp.sections():
        for k, v in cp.items(sec):
            out[k] = v
    return out


def resolve_config(command: str, file_cfg: dict, flags: dict) -> dict:
    """Merge defaults < file < flags, convert types and check required keys."""
    req, defaults = COMMANDS[command]
    raw = {**COMMON, **defaults}
    unknown = sorted(set(file_cfg) - set(KEYS))
    if unknown:
        raise CliError(EXIT_CONFIG, f"unknown config keys: {', '.join(unknown)}")
    raw.update(file_cfg)
    raw.update({k: v for k, v in flags.items() if v is not None})
    missing = [k for k in req if raw.get(k) is None]
    if missing:
        raise CliError(EXIT_CONFIG, f"missing required key(s) for {command}: {', '.join(missing)}")
    cfg = {}
    for k, v in raw.items():
        if v is None or not isinstance(v, str):
            cfg[k] = v
            continue
        conv = KEYS[k][0]
        try:
            cfg[k] = conv(v)
        except ValueError as e:
            raise CliError(EXIT_CONFIG, f"bad value for {k}: {v!r}") from e
    if cfg.get("out") is None:
        cfg["out"] = os.environ.get(ENV_OUT, "cylwalk-out")
    _validate(command, cfg)
    return cfg


def _single(cfg: dict, key: str):
    v = cfg[key]
    if isinstance(v, list):
        if len(v) != 1:
            raise CliError(EXIT_CONFIG, f"{key} must be a single value here")
        return v[0]
    return v


def _validate(command: str, cfg: dict):
    d = cfg.get("d")
    if d is not None and d < 1:
        raise CliError(EXIT_CONFIG, "d must be >= 1")
    for N in cfg.get("N") or []:
        if N < 2:
            raise CliError(EXIT_CONFIG, "N must be >= 2")
    if cfg.get("reps") is not None and cfg["reps"] < 0:
        raise CliError(EXIT_CONFIG, "reps must be >= 0")
    if cfg.get("budget") is not None and cfg["budget"] < 1:
        raise CliError(EXIT_CONFIG, "budget must be positive")
    if command in ("poissonize", "dominate", "dk-scaling", "sprinkle", "homogenize", "identity", "type-chain"):
        alpha = cfg.get("alpha") or 1.0
        v = cfg.get("v")
        v = _single(cfg, "v") if v is not None else (d + 1) * alpha + 0.5
        try:
            for N in cfg["N"]:
                dm.DominationParams(d, N, alpha, v, cfg.get("epsilon") or 0.5)
        except ValueError as e:
            raise CliError(EXIT_CONFIG, f"invalid parameters: {e}") from e
    if command == "suite" and cfg["scale"] not in acceptance.SCALES:
        raise CliError(EXIT_CONFIG, f"scale must be one of {acceptance.SCALES}")
    if command == "dominate" and cfg["check"] not in ("experiment", "intensity"):
        raise CliError(EXIT_CONFIG, "check must be experiment or intensity")


def _params(cfg: dict, N: int | None = None) -> dm.DominationParams:
    d = cfg["d"]
    alpha = cfg.get("alpha") or 1.0
    v = _single(cfg, "v") if cfg.get("v") is not None else (d + 1) * alpha + 0.5
    return dm.DominationParams(d, N if N is not None else _single(cfg, "N"), alpha, v, cfg.get("epsilon") or 0.5)


def _rng(cfg: dict, stream: int = 0):
    return RngStream(cfg["seed"], stream).generator()


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


# ---------------------------------------------------------------- handlers


def cmd_potential_check(cfg: dict) -> list:
    """Green symmetry, hitting-probability identity and sandwich bounds on random regions."""
    d, N = cfg["d"], _single(cfg, "N")
    rng = _rng(cfg)
    rows, sym, cross, bounds = [], 0.0, 0.0, True
    for i in range(cfg["reps"]):
        if i % 2 == 0:
            g = Geometry.lattice(d + 1)
            box = make_box((0,) * (d + 1), int(rng.integers(1, 3)), g).sorted_points()
            keep = [p for p in box if rng.random() < 0.85] or box[:1]
            U = Region.from_points(keep, g)
        else:
            g = Geometry.cylinder(d, N)
            L = int(rng.integers(0, 3))
            U = make_slab(g, -L, L)
        pts = U.sorted_points()
        m = int(rng.integers(1, min(8, len(pts)) + 1))
        K = Region.from_points([pts[j] for j in rng.choice(len(pts), m, replace=False)], g)
        x = pts[int(rng.integers(len(pts)))]
        S = solve_killed(U)
        G = S.green
        s = float(np.abs(G - G.T).max())
        hp = hit_prob(x, K, U, S)
        eq = equilibrium(K, U)
        ok_b = hp.lower <= hp.value + 1e-12 and hp.value <= hp.upper + 1e-12 and eq.capacity <= len(K)
        sym, cross, bounds = max(sym, s), max(cross, hp.discrepancy), bounds and ok_b
        rows.append([i, g.kind, len(U), len(K), s, hp.value, hp.direct, hp.lower, hp.upper, eq.capacity])
    tol = cfg["tol"]
    ok = sym <= tol / 10 and cross <= tol and bounds
    return [OpResult("potential", {"d": d, "N": N, "instances": cfg["reps"]},
                     {"max_asymmetry": exact(sym), "max_cross_method": exact(cross), "bounds_hold": exact(bounds)},
                     _status(ok), tables={"instances": Table(
                         ["instance", "geometry", "size_U", "size_K", "asymmetry", "last_exit", "direct",
                          "lower", "upper", "capacity"], rows)})]


def cmd_identity(cfg: dict) -> list:
    """Hitting law from q against (d+1)(h-r)/N^d times e_{K,B~}."""
    rng = _rng(cfg)
    out = []
    for N in cfg["N"]:
        params = _params(cfg, N)
        rows, worst = [], 0.0
        for i in range(cfg["reps"]):
            K = acceptance.random_target_set(params.geometry, params.r, rng)
            res = dm.key_identity(K, params)
            worst = max(worst, res.residual, res.sum_residual)
            rows.append([N, i, len(K), res.capacity, res.residual, res.sum_residual])
        out.append(OpResult(f"identity_N{N}", {"d": params.d, "N": N, "sets": cfg["reps"]},
                            {"max_residual": exact(worst)}, _status(worst <= cfg["tol"]),
                            tables={"residuals": Table(["N", "set", "size", "capacity", "residual",
                                                        "sum_residual"], rows)}))
    return out


def cmd_homogenize(cfg: dict) -> list:
    """Exact sup-TV of the return position from uniform; with --reps, coupled excursions at the first N."""
    rows, tvs = [], []
    for N in cfg["N"]:
        params = _params(cfg, N)
        res = dm.homogenization_tv(params)
        tvs.append(res.sup_tv)
        rows.append([N, params.h - params.r, res.sup_tv])
    ok = all(b < a for a, b in zip(tvs[:-1], tvs[1:]))
    values = {f"sup_tv_N{N}": exact(t) for N, t in zip(cfg["N"], tvs)}
    tables = {"sup_tv": Table(["N", "gap", "sup_tv"], rows)}
    if cfg["reps"]:
        cp = dm.couple_excursions(_params(cfg, cfg["N"][0]), _rng(cfg), cfg["reps"] + 1)
        values["mismatch_frequency"] = mc(cp.frequency, cp.stderr)
        values["mismatch_z"] = mc(cp.z, 1.0)
        ok = ok and abs(cp.z) <= 3 and cp.exits_match
        tables["coupling"] = Table(["attempts", "mismatches", "frequency", "sup_tv", "z"],
                                   [[cp.attempts, cp.mismatches, cp.frequency, cp.sup_tv, cp.z]])
    return [OpResult("homogenize", {"d": cfg["d"], "N": cfg["N"], "excursions": cfg["reps"]},
                     values, _status(ok), tables=tables)]


def cmd_type_chain(cfg: dict) -> list:
    """Exit-sign chain: exact transfer matrix and a chi-square test of simulated exits."""
    params = _params(cfg)
    n = _single(cfg, "n")
    rep = dm.type_chain(params, n, _rng(cfg))
    counts = rep.counts.counts(n - 1) if n > 2 else {}
    rows = [[f"{a:+d}{b:+d}", int(counts.get((a, b), 0))] for a, b in dm.PAIRS]
    return [OpResult("type_chain", {"d": params.d, "N": params.N, "n": n, "p": str(rep.p)},
                     {"p": exact(rep.p), "chi2": mc(rep.chi2), "pvalue": mc(rep.pvalue),
                      "repeat_frequency": mc(rep.repeat_frequency, math.sqrt(float(rep.p * (1 - rep.p)) / n))},
                     _status(rep.pvalue > cfg["tol"]),
                     tables={"pair_counts": Table(["pair", "count"], rows),
                             "transfer": Table(["from", *[f"{a:+d}{b:+d}" for a, b in dm.PAIRS]],
                                               [[f"{a:+d}{b:+d}", *map(float, row)]
                                                for (a, b), row in zip(dm.PAIRS, rep.matrix)])})]


def cmd_ld_check(cfg: dict) -> list:
    """Exact occupation tails against exp(-n Psi_N) for every pair type."""
    rows, ok = [], True
    for N in cfg["N"]:
        params = dm.DominationParams(2, N, 1.0, 3.5)
        for gamma in dm.PAIRS:
            for v in cfg["v"]:
                for n in cfg["n"]:
                    c = dm.ld_check(gamma, v, n, p=params.p)
                    ok &= c.holds
                    rows.append([N, f"{gamma[0]:+d}{gamma[1]:+d}", v, n, float(c.lhs), c.psi, float(c.bound),
                                 c.certificate, c.holds])
    return [OpResult("ld_check", {"N": cfg["N"], "v": cfg["v"], "n": cfg["n"]},
                     {"all_hold": exact(ok), "cases": exact(len(rows))}, _status(ok),
                     tables={"cases": Table(["N", "gamma", "v", "n", "lhs", "psi", "bound", "certificate",
                                             "holds"], rows)})]


def cmd_poissonize(cfg: dict) -> list:
    """Poissonized excursions: count tail, entry law of the atoms, truncation and sprinkling surplus."""
    params = _params(cfg)
    rng = _rng(cfg)
    reps = cfg["reps"]
    rows, entries, contained = [], [], True
    for i in range(reps):
        mu1, I1 = dm.poissonize(params, rng)
        mu, I = dm.truncate_sprinkle(params, rng, base=mu1)
        for at in mu.atoms:
            contained &= bool(np.abs(at.path).max() <= params.c_tilde + 1)
        entries.append(mu1.entry_points())
        rows.append([i, mu1.count, mu1.n_atoms, len(I1), mu.count, mu.n_atoms])
    ent = np.concatenate(entries) if entries else np.zeros((0, params.d + 1), dtype=np.int64)
    chi2, dof, pval = dm.entry_law_test(params, ent) if len(ent) else (float("nan"), 0, float("nan"))
    tail_reps = 10**5
    tail = dm.count_tail(params, tail_reps, rng)
    surplus = params.lam / params.lam_prime
    if len(ent) < 50:
        status = "inconclusive"
    else:
        status = _status(pval > 0.01 and contained and surplus > 1)
    return [OpResult("poissonize", params.as_dict() | {"reps": reps},
                     {"atoms": exact(len(ent)), "entry_chi2": mc(chi2), "entry_pvalue": mc(pval),
                      "count_tail": mc(tail, math.sqrt(tail * (1 - tail) / tail_reps)),
                      "paths_in_C_tilde": exact(contained), "sprinkling_surplus": exact(surplus)},
                     status,
                     tables={"samples": Table(["rep", "J_prime", "atoms_prime", "size_I_prime", "J", "atoms"], rows),
                             "entries": Table([f"x_{k + 1}" for k in range(params.d + 1)], ent.tolist())})]


def cmd_sprinkle(cfg: dict) -> list:
    """Exact ratios of hitting A after leaving C~ to hitting A inside C~."""
    params = _params(cfg)
    t = dm.sprinkling_ratio(params)
    if t.status != "ok":
        return [OpResult("sprinkle", params.as_dict(), {"status": t.status}, "inconclusive", notes=t.reason)]
    rows = []
    for i, x in enumerate(t.starts.tolist()):
        for j, y in enumerate(t.targets.tolist()):
            rows.append([*x, *y, t.lhs[i, j], t.rhs[i, j]])
    D = params.d + 1
    header = [f"x_{k + 1}" for k in range(D)] + [f"y_{k + 1}" for k in range(D)] + ["after_exit", "inside"]
    return [OpResult("sprinkle", params.as_dict(),
                     {"max_ratio": exact(t.max_ratio), "constant": exact(t.constant(params.N, params.d))},
                     _status(math.isfinite(t.max_ratio)), tables={"ratios": Table(header, rows)})]


def cmd_dominate(cfg: dict) -> list:
    """Walk trace in A versus I^v in A (experiment), or the exact intensity comparison."""
    params = _params(cfg)
    if cfg["check"] == "intensity":
        rep = dm.intensity_domination(params)
        rows = [[*p, ab, ac, a] for p, ab, ac, a in zip(rep.points.tolist(), rep.e_AB, rep.e_AC, rep.e_A)]
        D = params.d + 1
        return [OpResult("intensity", params.as_dict(),
                         {"margin": windowed(rep.margin, rep.v * rep.e_A_error),
                          "certified_margin": exact(rep.certified_margin), "chain_holds": exact(rep.chain_holds)},
                         rep.status, tables={"margins": Table([f"x_{k + 1}" for k in range(D)] +
                                                              ["e_A_Btilde", "e_A_Ctilde", "e_A"], rows)})]
    rep = dm.domination_experiment(params, cfg["reps"], _rng(cfg))
    return [OpResult("dominate", params.as_dict() | {"reps": cfg["reps"]},
                     {"point_pass_fraction": mc(rep.point_pass_fraction),
                      "size_walk": mc(rep.size_stat.walk, rep.size_stat.walk_se),
                      "size_interlacement": mc(rep.size_stat.interlacement, rep.size_stat.interlacement_se),
                      "status": rep.status},
                     _status(rep.passed),
                     tables={"statistics": Table(["statistic", "walk", "walk_se", "interlacement",
                                                  "interlacement_se", "passed"], rep.rows())})]


def cmd_interlace(cfg: dict) -> list:
    """Per-point coverage of I^u on a box against 1 - exp(-u cap{x}), and nesting in u."""
    D = cfg["d"] + 1
    g = Geometry.lattice(D)
    K = make_box((0,) * D, cfg["radius"], g)
    u, reps = cfg["u"], cfg["reps"]
    rng = _rng(cfg)
    pts, freq, sizes = il.coverage(K, u, reps, rng)
    target = 1 - math.exp(-u * whole_space_exact(Region.from_points([(0,) * D], g)).capacity)
    se = math.sqrt(target * (1 - target) / reps) if reps else 1.0
    zs = (freq - target) / se
    nested = True
    for _ in range(min(reps, 50)):
        cloud = il.sample_cloud(K, u, rng)
        a, b = il.trace(cloud.at_level(u / 2), K).vertices, il.trace(cloud, K).vertices
        nested &= a <= b
    ok = bool(np.all(np.abs(zs) <= 4)) and nested
    rows = [[*p, f, z] for p, f, z in zip(pts.tolist(), freq, zs)]
    return [OpResult("interlace", {"D": D, "radius": cfg["radius"], "u": u, "reps": reps},
                     {"target": exact(target), "max_abs_z": mc(float(np.abs(zs).max()), 1.0),
                      "mean_size": mc(float(sizes.mean()), float(sizes.std(ddof=1) / math.sqrt(reps))),
                      "nested": exact(nested)},
                     _status(ok),
                     tables={"coverage": Table([f"x_{k + 1}" for k in range(D)] + ["frequency", "z"], rows)})]


def cmd_vacant(cfg: dict) -> list:
    """Void probability of K' under mu_{K,u} against exp(-u cap K')."""
    D = cfg["d"] + 1
    g = Geometry.lattice(D)
    K = make_box((0,) * D, cfg["radius"], g)
    sr = cfg["sub_radius"]
    K_sub = Region.from_points([(0,) * D], g) if sr < 0 else make_box((0,) * D, sr, g)
    try:
        rep = il.vacant_check(K_sub, K, cfg["u"], cfg["reps"], _rng(cfg))
    except ValueError as e:
        raise CliError(EXIT_CONFIG, str(e)) from e
    return [OpResult("vacant", {"D": D, "radius": cfg["radius"], "sub_radius": sr, "u": cfg["u"],
                                "reps": cfg["reps"]},
                     {"frequency": mc(rep.frequency, rep.stderr), "target": exact(rep.target),
                      "cap_sub": exact(rep.cap_sub), "z": mc(rep.z, 1.0)},
                     _status(abs(rep.z) <= cfg["tol"]),
                     tables={"void": Table(["u", "reps", "frequency", "stderr", "target", "z"],
                                           [[rep.u, rep.reps, rep.frequency, rep.stderr, rep.target, rep.z]])})]


def cmd_star_decay(cfg: dict) -> list:
    """P[*-path in the planar trace of I^u from 0 to distance L], with a fitted decay exponent."""
    t = il.planar_star_decay(cfg["u"], cfg["Ls"], cfg["reps"], _rng(cfg))
    mono = bool(np.all(np.diff(t.p_hat) <= 0))
    rows = [[L, p, s, t.reps] for L, p, s in zip(t.Ls, t.p_hat, t.stderr)]
    return [OpResult("star_decay", {"u": cfg["u"], "Ls": t.Ls, "reps": t.reps},
                     {"exponent": mc(t.exponent if t.exponent is not None else float("nan")),
                      "nonincreasing": exact(mono)},
                     _status(mono), tables={"decay": Table(["L", "p_hat", "stderr", "reps"], rows)})]


def _disconnect_one(args):
    N, d, seed, i, cap = args
    res = dc.disconnection_time(N, d, RngStream(seed, i).generator(), cap=cap)
    return [i, res.T_N, res.scaled, res.trace_size, res.zmin, res.zmax, res.certify()]


def cmd_disconnect(cfg: dict) -> list:
    """Disconnection times T_N; replicate i uses stream i, so workers do not change results."""
    d, N = cfg["d"], _single(cfg, "N")
    jobs = [(N, d, cfg["seed"], i, cfg["budget"]) for i in range(cfg["reps"])]
    if cfg["workers"] > 1:
        with ProcessPoolExecutor(cfg["workers"]) as ex:
            rows = list(ex.map(_disconnect_one, jobs))
    else:
        rows = [_disconnect_one(j) for j in jobs]
    scaled = np.array([r[2] for r in rows])
    certified = all(r[6] for r in rows)
    return [OpResult("disconnect", {"d": d, "N": N, "reps": cfg["reps"]},
                     {"median_scaled": mc(float(np.median(scaled))) if len(rows) else exact(float("nan")),
                      "mean_scaled": mc(float(scaled.mean()), float(scaled.std(ddof=1) / math.sqrt(len(rows))))
                      if len(rows) > 1 else exact(float("nan")),
                      "all_certified": exact(certified)},
                     _status(certified),
                     tables={"times": Table(["rep", "T_N", "T_N_scaled", "trace_size", "zmin", "zmax",
                                             "certified"], rows)})]


def cmd_zeta(cfg: dict) -> list:
    """Monte Carlo Laplace transform of zeta(u) against the Bessel closed form."""
    n = _single(cfg, "n")
    c = dc.zeta_laplace_check(cfg["theta"], cfg["u"], cfg["reps"], n, _rng(cfg))
    return [OpResult("zeta", {"theta": c.theta, "u": c.u, "n": n, "reps": c.reps},
                     {"closed": exact(c.closed), "mc": mc(c.mc, c.mc_se), "mc_16n": mc(c.mc_fine, c.mc_fine_se),
                      "corrected": mc(c.corrected, c.corrected_se), "allowance": mc(c.allowance),
                      "z": mc(c.z, 1.0), "z_raw": mc(c.z_raw, 1.0)},
                     _status(abs(c.z) <= cfg["tol"]),
                     tables={"laplace": Table(["theta", "u", "n", "reps", "closed", "mc", "mc_se", "mc_16n",
                                               "mc_16n_se", "corrected", "corrected_se", "z"],
                                              [[c.theta, c.u, n, c.reps, c.closed, c.mc, c.mc_se, c.mc_fine,
                                                c.mc_fine_se, c.corrected, c.corrected_se, c.z]])})]


def cmd_dk_scaling(cfg: dict) -> list:
    """KS distance of inf_z D^z_K / N^{2d} to (d+1) zeta(alpha), per N."""
    d, alpha, reps = cfg["d"], cfg["alpha"], cfg["reps"]
    rng = _rng(cfg)
    n_ref = _single(cfg, "n") if cfg.get("n") is not None else 2 * 10**5
    ref = dc.dk_reference(d, alpha, 2000, rng, n_ref)
    rows, ks, degenerate = [], [], False
    for N in cfg["N"]:
        smp = dc.departure_times(N, d, alpha, reps, rng, zmax=cfg["Z_max"], cap=cfg["budget"])
        if smp.K == 0:
            degenerate = True
            rows.append([N, 0, reps, float("nan"), float("nan")])
            continue
        k = float(stats.ks_2samp(smp.values, ref).statistic)
        ks.append(k)
        rows.append([N, smp.K, reps, float(np.median(smp.values)), k])
    if degenerate:
        status = "inconclusive"
    elif len(ks) > 1:
        status = _status(all(b < a for a, b in zip(ks[:-1], ks[1:])))
    else:
        status = "inconclusive"
    return [OpResult("dk_scaling", {"d": d, "alpha": alpha, "N": cfg["N"], "reps": reps, "ref_n": n_ref},
                     {f"ks_N{r[0]}": mc(r[4], 1.36 * math.sqrt(1 / max(reps, 1) + 1 / 2000)) for r in rows},
                     status, tables={"ks": Table(["N", "K", "reps", "median", "ks"], rows)})]


def cmd_tightness(cfg: dict) -> list:
    """Quantiles of T_N / N^{2d} over N; medians must agree within a factor --tol."""
    rep = dc.tightness_report(cfg["N"], cfg["reps"], _rng(cfg), cfg["d"], cfg["tol"])
    rows = []
    for N in rep.Ns:
        q, qi = rep.quantiles(N), rep.quantiles(N, inverse=True)
        rows.append([N, *q, *qi])
    lv = [f"q{int(100 * x):02d}" for x in rep.quantile_levels]
    return [OpResult("tightness", {"d": cfg["d"], "N": cfg["N"], "reps": cfg["reps"], "factor": cfg["tol"]},
                     {"spread": mc(rep.spread), "finite": exact(rep.finite)},
                     _status(rep.passed),
                     tables={"quantiles": Table(["N", *lv, *[f"inv_{x}" for x in lv]], rows),
                             "samples": Table(["N", "rep", "T_N", "T_N_scaled"],
                                              [[N, i, int(t), t / N ** (2 * rep.d)]
                                               for N in rep.Ns for i, t in enumerate(rep.samples[N])])})]


def cmd_suite(cfg: dict) -> list:
    """All acceptance criteria; criterion 12 reruns 1-11 and compares CSV bytes."""
    seed, scale, tol = cfg["seed"], cfg["scale"], cfg["tol"]
    rep = acceptance.run_criteria(seed, scale, tol=tol)
    results = list(rep.results)
    with tempfile.TemporaryDirectory() as tmp:
        first = os.path.join(tmp, "first")
        rep.write(first)
        t = time.perf_counter()
        r12 = acceptance.criterion_12(seed, scale, first_dir=first)
        r12.op = "c12_" + r12.op
        r12.wall_time = time.perf_counter() - t
    results.append(r12)
    return results


HANDLERS = {
    "potential-check": cmd_potential_check,
    "identity": cmd_identity,
    "homogenize": cmd_homogenize,
    "type-chain": cmd_type_chain,
    "ld-check": cmd_ld_check,
    "poissonize": cmd_poissonize,
    "sprinkle": cmd_sprinkle,
    "dominate": cmd_dominate,
    "interlace": cmd_interlace,
    "vacant": cmd_vacant,
    "star-decay": cmd_star_decay,
    "disconnect": cmd_disconnect,
    "zeta": cmd_zeta,
    "dk-scaling": cmd_dk_scaling,
    "tightness": cmd_tightness,
    "suite": cmd_suite,
}


# ---------------------------------------------------------------- entry points


def run(command: str, cfg: dict) -> RunReport:
    """Execute one subcommand on a resolved config."""
    if command not in HANDLERS:
        raise CliError(EXIT_USAGE, f"unknown subcommand {command!r}")
    report = RunReport(command, {k: cfg[k] for k in sorted(cfg)})
    t0 = time.perf_counter()
    try:
        for res in HANDLERS[command](cfg):
            report.results.append(res)
    except (walk.StepCapExceeded, dc.StepCapExceeded) as e:
        raise BudgetExceeded(str(e)) from e
    report.wall_time = time.perf_counter() - t0
    if command != "suite":
        for res in report.results:
            res.wall_time = report.wall_time / len(report.results)
    return report


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = build_parser().parse_args(argv)
        flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
        file_cfg = read_config_file(ns.config) if ns.config else {}
        cfg = resolve_config(ns.command, file_cfg, flags)
    except CliError as e:
        print(f"cylwalk: error: {e}", file=sys.stderr)
        return e.code
    print(json.dumps({"command": ns.command, "config": cfg}, sort_keys=True))
    try:
        report = run(ns.command, cfg)
    except BudgetExceeded as e:
        print(f"cylwalk: budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except CliError as e:
        print(f"cylwalk: error: {e}", file=sys.stderr)
        return e.code
    outdir = os.path.join(cfg["out"], ns.command)
    report.write(outdir)
    for res in report.results:
        print(f"{res.op}: {res.status} ({res.wall_time:.1f} s)")
    print(f"status: {report.status}  exit: {report.exit_code}  output: {outdir}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
