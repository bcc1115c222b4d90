"""Disconnection of the cylinder by the walk, and the local-time functional zeta.

The walk disconnects E once its trace separates T x (-inf, -M] from
T x [M, inf) for large M.  ``disconnection_time`` records first-visit times,
checks the vacant set every N^d steps and bisects to the exact T_N.

zeta(u) is the first time the Brownian local-time profile reaches u at some
level.  Its discrete version uses visit counts of a +-1 walk at scale n
(space sqrt(n), time n).  Its Laplace transform has the closed form

    E exp(-theta^2 zeta(u) / 2) = x / sinh(x/2)^2 * I_1(x/2) / I_0(x/2),  x = theta u.

The D^z_K scaling experiment compares inf_z D^z_K / N^{2d} with
(d+1) alpha^2 zeta(1).
"""
from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import linalg, stats

from . import _kernels
from .lattice import Geometry, Region, h_scale, r_scale
from .rng import as_generator, kernel_seed

DEFAULT_CAP = 10**11
ZETA_CAP = 10**12


# ---------------------------------------------------------------- connectivity


def _occupancy(trace: Region, zlo: int, zhi: int) -> np.ndarray:
    """First-visit-style array for ``vacant_crossing``: 0 on the trace, max elsewhere."""
    g = trace.geometry
    S = g.N**g.d
    fv = np.full(S * (zhi - zlo + 1), _kernels.NOT_VISITED, dtype=np.int64)
    if len(trace):
        arr = trace.array
        tor = np.ravel_multi_index(tuple(arr[:, : g.d].T), (g.N,) * g.d)
        fv[(arr[:, -1] - zlo) * S + tor] = 0
    return fv


def is_disconnected(trace: Region, heights: tuple | None = None) -> bool:
    """True if E minus the trace has no vacant path from far below to far above.

    Only the heights [min - 1, max + 1] of the trace matter: the slabs
    outside are vacant and connected.  ``heights`` may widen the window.
    """
    g = trace.geometry
    if not g.is_cylinder:
        raise ValueError("disconnection is a cylinder notion")
    if len(trace) == 0:
        return False
    lo, hi = trace.heights()
    zlo, zhi = lo - 1, hi + 1
    if heights is not None:
        zlo, zhi = min(zlo, heights[0]), max(zhi, heights[1])
    fv = _occupancy(trace, zlo, zhi)
    return not _kernels.vacant_crossing(fv, 0, g.N, g.d, -zlo, zlo, zhi)


@dataclass
class DisconnectionResult:
    N: int
    d: int
    T_N: int
    trace_size: int
    zmin: int
    zmax: int
    checks: int
    check_every: int
    first_visit: np.ndarray = field(repr=False)
    offset: int = 0

    @property
    def scaled(self) -> float:
        return self.T_N / self.N ** (2 * self.d)

    def trace_at(self, t: int) -> Region:
        """Trace X_[0, t] as a region."""
        g = Geometry.cylinder(self.d, self.N)
        S = self.N**self.d
        idx = np.flatnonzero(self.first_visit <= t)
        lvl, tor = np.divmod(idx, S)
        y = np.stack(np.unravel_index(tor, (self.N,) * self.d), axis=1)
        pts = np.column_stack([y, lvl - self.offset])
        return Region(g, frozenset(map(tuple, pts.tolist())))

    def certify(self) -> bool:
        """The trace disconnects at T_N and not at T_N - 1."""
        return is_disconnected(self.trace_at(self.T_N)) and not is_disconnected(self.trace_at(self.T_N - 1))


class StepCapExceeded(RuntimeError):
    pass


def disconnection_time(N: int, d: int = 2, rng=None, check_every: int | None = None,
                       cap: int = DEFAULT_CAP) -> DisconnectionResult:
    """Run the walk from a uniform point of T x {0} until its trace disconnects E.

    The vacant set is checked every ``check_every`` (default N^d) steps once
    at least N^d sites are visited; the first positive check is refined by
    bisection on the first-visit times.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = as_generator(rng)
    every = N**d if check_every is None else int(check_every)
    T, fv, off, zmin, zmax, checks = _kernels.disconnection_run(N, d, every, kernel_seed(rng), cap)
    if T < 0:
        raise StepCapExceeded(f"no disconnection within {cap} steps")
    size = int(np.sum(fv <= T))
    return DisconnectionResult(N, d, int(T), size, int(zmin), int(zmax), int(checks), every, fv, int(off))


@dataclass
class StarWitness:
    z_star: int
    path: list  # points of Z^{d+1}: (a, 0, ..., 0, z)


def star_witness(trace: Region, heights: tuple | None = None) -> StarWitness | None:
    """A *-path in strip ∩ trace from x_* = z_* e_{d+1} to S(x_*, [sqrt N]).

    The strip is [-2[sqrt N], 2[sqrt N]] e_1 + Z e_{d+1}; candidate heights
    z_* are scanned by increasing |z_*| over ``heights`` (default: the
    trace's height range).  Returns the first witness found, or None.
    """
    g = trace.geometry
    if len(trace) == 0:
        return None
    N, d = g.N, g.d
    s = math.isqrt(N)
    lo, hi = trace.heights() if heights is None else heights
    pts = trace.vertices

    def occupied(a, z):
        return g.normalize((a,) + (0,) * (d - 1) + (z,)) in pts

    moves = [(da, dz) for da in (-1, 0, 1) for dz in (-1, 0, 1) if da or dz]
    for zs in sorted(range(lo, hi + 1), key=lambda z: (abs(z), z)):
        if not occupied(0, zs):
            continue
        if s == 0:
            return StarWitness(zs, [(0,) * d + (zs,)])
        prev = {(0, zs): None}
        queue = deque([(0, zs)])
        end = None
        while queue:
            a, z = queue.popleft()
            if max(abs(a), abs(z - zs)) == s:
                end = (a, z)
                break
            for da, dz in moves:
                b, w = a + da, z + dz
                if abs(b) > 2 * s or max(abs(b), abs(w - zs)) > s or (b, w) in prev:
                    continue
                if occupied(b, w):
                    prev[(b, w)] = (a, z)
                    queue.append((b, w))
        if end is not None:
            path = []
            cur = end
            while cur is not None:
                path.append((cur[0],) + (0,) * (d - 1) + (cur[1],))
                cur = prev[cur]
            return StarWitness(zs, path[::-1])
    return None


# ---------------------------------------------------------------- Bessel and zeta


def bessel_i(order: int, x: float) -> float:
    """Modified Bessel function I_0 or I_1 by its power series, 0 <= x <= 30."""
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    if not 0 <= x <= 30:
        raise ValueError("x must lie in [0, 30]")
    y = x * x / 4
    term = (x / 2) ** order / math.factorial(order)
    total = term
    k = 0
    while True:
        k += 1
        term *= y / (k * (k + order))
        total += term
        if term <= 1e-17 * total:
            return total


def zeta_laplace_closed(theta: float, u: float) -> float:
    """E exp(-theta^2 zeta(u) / 2) from the Bessel formula (1 in the limit theta u -> 0)."""
    x = theta * u
    if x == 0:
        return 1.0
    if x < 1e-4:
        return 1.0 - 11.0 * x * x / 96.0
    return x / math.sinh(x / 2) ** 2 * bessel_i(1, x / 2) / bessel_i(0, x / 2)


@dataclass
class ZetaSample:
    u: float
    n: int
    values: np.ndarray

    @property
    def value(self) -> float:
        return float(self.values[0])


def zeta_sample(u: float, n: int, rng=None, reps: int = 1) -> ZetaSample:
    """Discrete zeta(u): k*/n with k* the first k where some level has ceil(u sqrt n) visits among S_0..S_{k-1}."""
    if u < 0:
        raise ValueError("u must be >= 0")
    if u == 0:
        return ZetaSample(0.0, int(n), np.zeros(reps))
    rng = as_generator(rng)
    thr = int(math.ceil(u * math.sqrt(n) - 1e-12))
    k = _kernels.zeta_hits(thr, int(reps), kernel_seed(rng), ZETA_CAP)
    if (k < 0).any():
        raise RuntimeError("step cap reached")
    return ZetaSample(float(u), int(n), k / n)


@dataclass
class LaplaceCheck:
    theta: float
    u: float
    n: int
    reps: int
    closed: float
    mc: float
    mc_se: float
    mc_fine: float  # at scale 16 n
    mc_fine_se: float
    corrected: float
    corrected_se: float

    @property
    def allowance(self) -> float:
        """Measured discretization bias at scale n, |mc - corrected|."""
        return abs(self.mc - self.corrected)

    @property
    def z(self) -> float:
        """z-score of the bias-corrected estimate."""
        return (self.corrected - self.closed) / self.corrected_se

    @property
    def z_raw(self) -> float:
        return (self.mc - self.closed) / self.mc_se

    @property
    def passed(self) -> bool:
        return abs(self.z) <= 3


def zeta_laplace_check(theta: float, u: float, reps: int, n: int, rng=None,
                       fine_reps: int | None = None) -> LaplaceCheck:
    """Monte Carlo E exp(-theta^2 zeta(u)/2) against the Bessel closed form.

    The discrete estimate carries a bias of order n^{-1/4}.  A second run at
    scale 16 n halves it, and 2 f(16n) - f(n) removes the leading term; the
    z-score is computed for this corrected estimate with its own standard
    error.
    """
    rng = as_generator(rng)
    fine_reps = max(reps // 4, 1000) if fine_reps is None else int(fine_reps)
    f = np.exp(-theta**2 * zeta_sample(u, n, rng, reps).values / 2)
    g = np.exp(-theta**2 * zeta_sample(u, 16 * n, rng, fine_reps).values / 2)
    m1, s1 = float(f.mean()), float(f.std(ddof=1) / math.sqrt(len(f)))
    m2, s2 = float(g.mean()), float(g.std(ddof=1) / math.sqrt(len(g)))
    corr = 2 * m2 - m1
    se = math.sqrt(4 * s2**2 + s1**2)
    return LaplaceCheck(theta, u, n, reps, zeta_laplace_closed(theta, u), m1, s1, m2, s2, corr, se)


def zeta_scaling_ks(n: int, reps: int, rng=None, u: float = 2.0) -> float:
    """KS distance between zeta(u, n) and u^2 zeta(1, n)."""
    rng = as_generator(rng)
    a = zeta_sample(u, n, rng, reps).values
    b = u * u * zeta_sample(1.0, n, rng, reps).values
    return float(stats.ks_2samp(a, b).statistic)


# ---------------------------------------------------------------- visits and D^z_K


def return_probability(h: int) -> float:
    """P[the +-1 walk from 0 returns to 0 before leaving (-h, h)], by a linear solve."""
    # f(y) = P_y[hit 0 before h] on 1..h-1 with f(0) = 1, f(h) = 0
    n = h - 1
    ab = np.zeros((3, n))
    ab[0, 1:] = -0.5
    ab[1, :] = 1.0
    ab[2, :-1] = -0.5
    b = np.zeros(n)
    b[0] = 0.5
    f = linalg.solve_banded((1, 1), ab, b)
    return float(f[0])  # by symmetry the step to -1 gives the same


@dataclass
class VisitsReport:
    h: int
    counts: np.ndarray
    chi2: float
    pvalue: float
    return_probability: float

    @property
    def mean(self) -> float:
        return float(self.counts.mean())

    @property
    def stderr(self) -> float:
        return float(self.counts.std(ddof=1) / math.sqrt(len(self.counts)))


def geometric_visits(N: int, reps: int, rng=None, bins: int = 20) -> VisitsReport:
    """Visits of the vertical skeleton to its start before leaving (-h_N, h_N), vs Geometric(1/h_N).

    The chi-square test uses ``bins`` cells of nearly equal geometric mass.
    """
    rng = as_generator(rng)
    h = h_scale(N)
    counts = _kernels.visits_before_exit(h, int(reps), kernel_seed(rng))
    p = 1.0 / h
    edges = np.unique(np.ceil(stats.geom.ppf(np.linspace(0, 1, bins + 1)[1:-1], p)).astype(int))
    edges = np.concatenate([[0], edges, [np.iinfo(np.int64).max]])
    obs = np.array([np.sum((counts > lo) & (counts <= hi)) for lo, hi in zip(edges[:-1], edges[1:])])
    cdf = stats.geom.cdf(np.minimum(edges, 10**12), p)
    exp = np.diff(cdf) * reps
    chi2 = float(((obs - exp) ** 2 / exp).sum())
    pval = float(stats.chi2.sf(chi2, len(exp) - 1))
    return VisitsReport(h, counts, chi2, pval, return_probability(h))


@dataclass
class DkSample:
    N: int
    d: int
    alpha: float
    K: int
    values: np.ndarray  # D / N^{2d}
    argmin: np.ndarray
    fixed_z: bool


def departure_times(N: int, d: int, alpha: float, reps: int, rng=None, fixed_z: bool = False,
                    zmax: int | None = None, censor: float | None = None,
                    cap: int = DEFAULT_CAP) -> DkSample:
    """Samples of inf_{|z| <= zmax} D^z_K / N^{2d} (or D^0_K / N^{2d}), K = [alpha N^d / h_N].

    Every height is tracked by its own excursion state; time is counted in
    walk steps, with the torus moves between vertical moves drawn as
    geometric gaps.  ``zmax`` defaults to no restriction.  With ``censor``
    the values are min(D / N^{2d}, censor) and runs stop at the censoring
    time.
    """
    rng = as_generator(rng)
    r, h = r_scale(N), h_scale(N)
    K = int(Fraction(str(alpha)) * N**d / h)
    zm = 0 if fixed_z else (np.iinfo(np.int64).max // 4 if zmax is None else int(zmax))
    scale = N ** (2 * d)
    if censor is not None:
        cap = int(math.ceil(censor * scale))
    vals = np.empty(reps)
    arg = np.zeros(reps, dtype=np.int64)
    if K == 0:
        return DkSample(N, d, alpha, 0, np.zeros(reps), arg, fixed_z)
    for i in range(reps):
        t, zs, _ = _kernels.departure_infimum(r, h, K, 1.0 / (d + 1), zm, kernel_seed(rng), cap)
        if t < 0:
            if censor is None:
                raise StepCapExceeded("step cap reached")
            vals[i] = censor
            continue
        vals[i] = t / scale if censor is None else min(t / scale, censor)
        arg[i] = zs
    return DkSample(N, d, alpha, K, vals, arg, fixed_z)


@dataclass
class DkScalingReport:
    status: str  # "ok" or "degenerate-K"
    sample: DkSample
    reference: np.ndarray
    ks: float
    pvalue: float


def dk_reference(d: int, alpha: float, reps: int, rng=None, n: int = 2 * 10**5) -> np.ndarray:
    """Samples of (d+1) zeta(alpha) = (d+1) alpha^2 zeta(1), zeta at scale n."""
    return (d + 1) * alpha**2 * zeta_sample(1.0, n, rng, reps).values


def dk_scaling(N: int, d: int, alpha: float, reps: int, rng=None, fixed_z: bool = False,
               zmax: int | None = None, ref_reps: int = 2000, ref_n: int = 2 * 10**5,
               censor: float | None = None, reference: np.ndarray | None = None) -> DkScalingReport:
    """Compare D^z_K / N^{2d} with its Brownian limit by a two-sample KS distance.

    Infimum over z: (d+1) alpha^2 zeta(1), zeta at scale ``ref_n``.
    Fixed z = 0: inf{s : L(0, s/(d+1)) >= alpha}, which has the law of
    (d+1) alpha^2 / G^2 with G standard normal; this law is heavy-tailed, so
    the fixed-z comparison censors both samples at ``censor`` (default
    (d+1) alpha^2 * 50, about the 89% quantile).  A precomputed
    ``reference`` sample replaces the sampled one, so several N can share it.
    """
    rng = as_generator(rng)
    if fixed_z and censor is None:
        censor = (d + 1) * alpha**2 * 50.0
    smp = departure_times(N, d, alpha, reps, rng, fixed_z, zmax, censor)
    if smp.K == 0:
        return DkScalingReport("degenerate-K", smp, np.zeros(0), float("nan"), float("nan"))
    if reference is not None:
        ref = np.asarray(reference, dtype=float)
    elif fixed_z:
        ref = (d + 1) * alpha**2 / rng.standard_normal(ref_reps) ** 2
    else:
        ref = dk_reference(d, alpha, ref_reps, rng, ref_n)
    if censor is not None:
        ref = np.minimum(ref, censor)
    ks = stats.ks_2samp(smp.values, ref)
    return DkScalingReport("ok", smp, ref, float(ks.statistic), float(ks.pvalue))


def visits_before_departure(N: int, alpha: float, d: int, reps: int, rng=None,
                            limit: int | None = None) -> np.ndarray:
    """Visits of the vertical skeleton to 0 before D^0_K, K = [alpha N^d / h_N], capped at ``limit``.

    D^0_K is heavy-tailed, so uncapped runs can be very long.
    """
    rng = as_generator(rng)
    r, h = r_scale(N), h_scale(N)
    K = int(Fraction(str(alpha)) * N**d / h)
    lim = np.iinfo(np.int64).max if limit is None else int(limit)
    return _kernels.visits_before_departure(r, h, K, int(reps), kernel_seed(rng), lim)


def early_departure(N: int, alpha: float, alphas_prime, d: int = 2, reps: int = 10000, rng=None) -> dict:
    """Empirical P[D^0_K < gamma^0_{alpha' N^d}] for each alpha'.

    The event means fewer than alpha' N^d skeleton visits to 0 before D^0_K,
    so runs stop after max(alpha') N^d visits.
    """
    limit = int(math.ceil(max(alphas_prime) * N**d))
    v = visits_before_departure(N, alpha, d, reps, rng, limit)
    return {float(a): float(np.mean(v < a * N**d)) for a in alphas_prime}


# ---------------------------------------------------------------- tightness


@dataclass
class TightnessReport:
    Ns: list
    d: int
    samples: dict  # N -> array of T_N
    factor: float
    quantile_levels: tuple = (0.05, 0.25, 0.5, 0.75, 0.95)

    def quantiles(self, N: int, inverse: bool = False) -> np.ndarray:
        x = self.samples[N] / N ** (2 * self.d)
        if inverse:
            x = 1.0 / x
        return np.quantile(x, self.quantile_levels)

    @property
    def medians(self) -> dict:
        return {N: float(np.median(self.samples[N] / N ** (2 * self.d))) for N in self.Ns}

    @property
    def spread(self) -> float:
        m = list(self.medians.values())
        return max(m) / min(m)

    @property
    def finite(self) -> bool:
        return all(np.all((s > 0) & np.isfinite(s)) for s in self.samples.values())

    @property
    def passed(self) -> bool:
        return self.finite and self.spread <= self.factor

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "rep", "T_N", "T_N_scaled"])
            for N in self.Ns:
                for i, t in enumerate(self.samples[N]):
                    w.writerow([N, i, int(t), repr(float(t / N ** (2 * self.d)))])


def tightness_report(Ns, reps: int, rng=None, d: int = 2, factor: float = 4.0) -> TightnessReport:
    """Quantiles of T_N / N^{2d} and N^{2d} / T_N over N; passes when medians agree within ``factor``."""
    rng = as_generator(rng)
    samples = {}
    for N in Ns:
        samples[N] = np.array([disconnection_time(N, d, rng).T_N for _ in range(reps)], dtype=np.int64)
    return TightnessReport(list(Ns), d, samples, factor)
