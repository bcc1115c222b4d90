"""Walk trace near a point of the cylinder versus random interlacements.

The pieces below follow the chain of comparisons that links the trace of
the cylinder walk at a departure time D^z_K with an interlacement at level v:

* the identity between the hitting law of K from q (uniform on T x {+-r_N})
  and the equilibrium measure of K relative to B~;
* homogenization: the torus position at a return to B is almost uniform, and
  a maximal coupling replaces it by an exactly uniform one;
* the sign chain of exit heights and its pair chain on {1,-1}^2, with the
  relative-entropy rate function H_{2,N} and the sub-additive tail bound;
* Poissonization of special excursions, their truncation at C~, sprinkling,
  and the comparison of intensities lambda e_{A,B~} <= v e_A;
* a Monte Carlo comparison of monotone statistics of both traces in A.

Couplings are not built as measures.  Samplers generate the objects and the
tests check their distributional consequences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import mpmath
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import optimize, stats

from . import _kernels
from .interlace import window_masks
from .lattice import (
    Geometry,
    Region,
    boundaries,
    embed_region,
    h_scale,
    make_box,
    make_slab,
    outer_boundary,
    r_scale,
)
from .potential import (
    _lookup,
    equilibrium,
    exact_error_bound,
    hitting_law_matrix,
    whole_space_exact,
)
from .rng import as_generator, kernel_seed

STEP_CAP = 10**10
EXACT_STATE_LIMIT = 20_000


class DegenerateScale(ValueError):
    """An integer part collapses a region at this N."""


def _floor(x: Fraction) -> int:
    return int(math.floor(x))


def _int_power_floor(N: int, expo: float) -> int:
    # floor(N**expo), robust to float jitter at exact powers such as 16**0.5
    return int(math.floor(N**expo + 1e-9))


def _torus_embed(pts: np.ndarray, N: int, d: int) -> np.ndarray:
    out = np.array(pts, dtype=np.int64, copy=True)
    t = out[:, :d]
    t[t > N // 2] -= N
    return out


@dataclass(frozen=True)
class DominationParams:
    """Scales of the comparison at (d, N, alpha, v, epsilon); the point x sits at height z0."""

    d: int
    N: int
    alpha: float
    v: float
    epsilon: float = 0.5
    z0: int = 0

    def __post_init__(self):
        if self.d < 1 or self.N < 2:
            raise ValueError("need d >= 1 and N >= 2")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.v > (self.d + 1) * self.alpha:
            raise ValueError("v must exceed (d+1) alpha")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")

    @classmethod
    def with_ratio(cls, d: int, N: int, alpha: float, ratio: float, epsilon: float = 0.5) -> "DominationParams":
        """v = ratio * (d+1) alpha."""
        return cls(d, N, alpha, ratio * (d + 1) * alpha, epsilon)

    @property
    def r(self) -> int:
        return r_scale(self.N)

    @property
    def h(self) -> int:
        return h_scale(self.N)

    @property
    def geometry(self) -> Geometry:
        return Geometry.cylinder(self.d, self.N)

    @property
    def _base(self) -> Fraction:
        # alpha N^d / h_N as an exact rational
        return Fraction(str(self.alpha)) * self.N**self.d / self.h

    @property
    def delta(self) -> float:
        return min(self.v / ((self.d + 1) * self.alpha), 2.0) - 1.0

    @property
    def _delta_q(self) -> Fraction:
        ratio = Fraction(str(self.v)) / ((self.d + 1) * Fraction(str(self.alpha)))
        return min(ratio, Fraction(2)) - 1

    @property
    def K(self) -> int:
        return _floor(self._base)

    @property
    def K_hat(self) -> int:
        return _floor((1 + self._delta_q / 5) * self._base)

    @property
    def K_prime(self) -> int:
        return _floor((1 + 2 * self._delta_q / 5) * self._base)

    @property
    def a(self) -> int:
        """Radius of A = B(0, [N^{1-eps}])."""
        return _int_power_floor(self.N, 1.0 - self.epsilon)

    @property
    def c_tilde(self) -> int:
        """Radius of C~ = B(0, N/4)."""
        return self.N // 4

    @property
    def M(self) -> int:
        return int(math.floor(math.exp(math.sqrt(math.log(self.N))))) + 1

    @property
    def c_radius(self) -> int:
        """Radius of C = B(0, [N/(4M)])."""
        return self.N // (4 * self.M)

    @property
    def p(self) -> Fraction:
        return Fraction(self.h + self.r, 2 * self.h)

    @property
    def q(self) -> Fraction:
        return 1 - self.p

    def _intensity(self, k: int) -> float:
        return (1 + k * self.delta / 5) * self.alpha * (self.d + 1) * (1 - self.r / self.h)

    @property
    def lam_prime(self) -> float:
        """Intensity lambda' of the untruncated excursion measure."""
        return self._intensity(3)

    @property
    def lam(self) -> float:
        """Intensity lambda of the truncated (sprinkled) excursion measure."""
        return self._intensity(4)

    @property
    def mean_J_prime(self) -> float:
        return (1 + 3 * self.delta / 5) * float(self._base)

    @property
    def mean_J(self) -> float:
        return (1 + 4 * self.delta / 5) * float(self._base)

    @property
    def nested(self) -> bool:
        """A in C~ in B~."""
        return self.a <= self.c_tilde and self.c_tilde < self.h

    def regions(self) -> dict:
        g = self.geometry
        D = self.d + 1
        if 2 * self.a + 1 > self.N:
            raise DegenerateScale(f"A of radius {self.a} wraps around the torus")
        return {
            "A": make_box((0,) * D, self.a, g),
            "C_tilde": make_box((0,) * D, self.c_tilde, g),
            "B_tilde": make_slab(g, -self.h + 1, self.h - 1),
        }

    def as_dict(self) -> dict:
        return {
            "d": self.d, "N": self.N, "alpha": self.alpha, "v": self.v,
            "epsilon": self.epsilon, "z0": self.z0, "r": self.r, "h": self.h,
            "K": self.K, "K_hat": self.K_hat, "K_prime": self.K_prime,
            "delta": self.delta, "a": self.a, "c_tilde": self.c_tilde,
            "M": self.M, "c_radius": self.c_radius,
        }


# ---------------------------------------------------------------- key identity


@dataclass
class KeyIdentityResult:
    points: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    capacity: float
    factor: float

    @property
    def residual(self) -> float:
        return float(np.abs(self.lhs - self.rhs).max()) if len(self.lhs) else 0.0

    @property
    def sum_residual(self) -> float:
        return abs(float(self.lhs.sum()) - self.factor * self.capacity)


def key_identity(K_set: Region, params: DominationParams, method: str = "sparse") -> KeyIdentityResult:
    """Both sides of P_q[H_K < T_B~, X_{H_K} = x] = (d+1)(h-r)/N^d e_{K,B~}(x).

    LHS averages the hitting law over the 2 N^d points of T x {+-r}; RHS is
    the equilibrium measure of K relative to B~.  Both are exact solves.
    """
    g = params.geometry
    if K_set.geometry != g:
        raise ValueError("K_set lives on another cylinder")
    r, h, N, d = params.r, params.h, params.N, params.d
    n_states = N**d * (2 * h - 1)
    if method == "sparse" and n_states > EXACT_STATE_LIMIT:
        raise ValueError(f"state space of B~ has {n_states} points; limit {EXACT_STATE_LIMIT}")
    factor = (d + 1) * (h - r) / N**d
    if len(K_set) == 0:
        z = np.zeros(0)
        return KeyIdentityResult(np.zeros((0, d + 1), dtype=np.int64), z, z, 0.0, factor)
    zs = K_set.array[:, -1]
    if zs.min() <= -r or zs.max() >= r:
        raise ValueError("K_set must lie in T x (-r_N, r_N)")
    B_t = make_slab(g, -h + 1, h - 1)
    tor = np.indices((N,) * d).reshape(d, -1).T
    starts = np.concatenate([
        np.column_stack([tor, np.full(len(tor), r)]),
        np.column_stack([tor, np.full(len(tor), -r)]),
    ])
    pts, probs, _ = hitting_law_matrix(starts, K_set, B_t, method)
    lhs = probs.mean(axis=0)
    eq = equilibrium(K_set, B_t, method)
    rhs = np.zeros(len(pts))
    idx = _lookup(K_set, eq.points)
    rhs[idx] = factor * eq.values
    return KeyIdentityResult(pts, lhs, rhs, eq.capacity, factor)


def key_identity_residual(K_set: Region, params: DominationParams, method: str = "sparse") -> float:
    """max_x |LHS - RHS| of the hitting-law / equilibrium identity."""
    return key_identity(K_set, params, method).residual


# ---------------------------------------------------------------- homogenization


def entrance_law(N: int, d: int, gap: int) -> np.ndarray:
    """Law of the torus displacement when a walk started at height z + gap first reaches z.

    Each mode k of the torus is multiplied by lambda_k per horizontal move;
    one unit of descent then contributes phi_k = (1 - sqrt(1 - s^2)) / s
    with s = 1 / (d + 1 - d lambda_k), and the gap contributes phi_k^gap.
    Returns an array of shape (N,)*d summing to 1.
    """
    return _uniform(N, d) + entrance_deviation(N, d, gap)


def _uniform(N: int, d: int) -> np.ndarray:
    return np.full((N,) * d, float(N) ** -d)


def _modes(N: int, d: int) -> np.ndarray:
    lam = np.zeros((N,) * d)
    c = np.cos(2 * np.pi * np.arange(N) / N)
    for i in range(d):
        sh = [1] * d
        sh[i] = N
        lam = lam + c.reshape(sh)
    return lam / d


def _phi(lam: np.ndarray, d: int) -> np.ndarray:
    s = 1.0 / (d + 1 - d * lam)
    return (1.0 - np.sqrt(1.0 - s * s)) / s


def entrance_deviation(N: int, d: int, gap: int) -> np.ndarray:
    """entrance_law minus the uniform law, computed without cancellation."""
    F = _phi(_modes(N, d), d) ** gap
    F.flat[0] = 0.0
    return np.fft.ifftn(F).real


def entrance_law_solve(N: int, d: int, r: int, h: int, extra: int = 20):
    """Real-space route: hitting law of T x {r} from (0, h), walk killed at height h + extra.

    Sparse LU on T x [r+1, h+extra-1].  Returns (law over T as (N,)*d array,
    mass killed at the top).  The deviation from its own mean matches
    ``entrance_deviation`` up to paths that reach the top, whose torus
    modes are damped by at least phi^(2 extra).
    """
    H = h + extra
    L = H - r - 1
    n_t = N**d
    n = n_t * L
    tor = np.indices((N,) * d).reshape(d, -1).T
    # index = level * n_t + torus index
    rows, cols = [], []
    w = 1.0 / (2 * (d + 1))
    base = np.arange(n_t)
    strides = N ** np.arange(d - 1, -1, -1)
    for i in range(d):
        for s in (1, -1):
            nb = tor.copy()
            nb[:, i] = (nb[:, i] + s) % N
            nidx = nb @ strides
            for lv in range(L):
                rows.append(lv * n_t + base)
                cols.append(lv * n_t + nidx)
    for lv in range(L):
        for dz in (1, -1):
            lv2 = lv + dz
            if 0 <= lv2 < L:
                rows.append(lv * n_t + base)
                cols.append(lv2 * n_t + base)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    P = sp.coo_matrix((np.full(len(rows), w), (rows, cols)), shape=(n, n)).tocsc()
    A = (sp.identity(n, format="csc") - P).T.tocsc()
    e = np.zeros(n)
    e[(h - r - 1) * n_t] = 1.0  # start (0, h)
    g = spla.splu(A).solve(e)  # g = G[start, :]
    law = g[:n_t] * w
    top = g[(L - 1) * n_t:].sum() * w
    return law.reshape((N,) * d), float(top)


@dataclass
class HomogenizationResult:
    N: int
    d: int
    sup_tv: float
    points: np.ndarray  # x in the boundary of B~, i.e. T x {+-h}
    tv: np.ndarray
    law: np.ndarray  # displacement law from x = (0, h)
    entry_heights: np.ndarray  # height of X_{R_1} for each x
    method: str

    def to_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x_{i + 1}" for i in range(self.d + 1)] + ["entry_height", "tv"])
            for x, zh, t in zip(self.points.tolist(), self.entry_heights.tolist(), self.tv):
                w.writerow(list(x) + [zh, repr(float(t))])


def homogenization_tv(params: DominationParams, method: str = "fourier") -> HomogenizationResult:
    """TV distance between the law of X_{R_1} under P_x and q_{z(x)}, for each x in T x {+-h}.

    ``method`` is "fourier" (mode products) or "solve" (sparse real-space
    solve of the killed walk; the deviation from uniform is taken on the
    sub-probability law, which avoids the truncation bias of conditioning).
    """
    N, d, r, h = params.N, params.d, params.r, params.h
    if method == "fourier":
        dev = entrance_deviation(N, d, h - r)
    elif method == "solve":
        law_k, _ = entrance_law_solve(N, d, r, h)
        dev = law_k - law_k.mean()
    else:
        raise ValueError(f"unknown method {method!r}")
    tor = np.indices((N,) * d).reshape(d, -1).T
    pts, tvs, zs = [], [], []
    for sgn in (1, -1):
        # the law below height -h is the mirror image of the law above +h
        for y in tor:
            shifted = np.roll(dev, shift=tuple(y), axis=tuple(range(d)))
            pts.append(list(y) + [sgn * h])
            tvs.append(0.5 * np.abs(shifted).sum())
            zs.append(sgn * r)
    tvs = np.asarray(tvs)
    return HomogenizationResult(
        N, d, float(tvs.max()), np.asarray(pts, dtype=np.int64), tvs,
        _uniform(N, d) + dev, np.asarray(zs), method,
    )


def _mixing_steps(N: int, d: int, tol: float = 1e-25) -> tuple:
    """(m_mix, v_mix) for the descent shortcut, with total error below ``tol``."""
    lam = np.abs(_modes(N, d)).ravel()
    lam[0] = 0.0
    if N % 2 == 0:
        lam[np.ravel_multi_index((N // 2,) * d, (N,) * d)] = 0.0
    rho = float(lam.max())
    m_mix = 0 if rho == 0 else int(math.ceil(math.log(tol / 2) / math.log(rho)))
    v_mix = int(math.ceil(math.log(tol / 2) / -math.log(2 * d + 1)))
    return m_mix, v_mix


@dataclass
class CouplingReport:
    attempts: int
    mismatches: int
    sup_tv: float
    expected: float  # mean of the per-attempt mismatch probabilities
    exits_match: bool
    mixed: int
    excursions: int

    @property
    def frequency(self) -> float:
        return self.mismatches / self.attempts if self.attempts else 0.0

    @property
    def stderr(self) -> float:
        t = self.sup_tv
        return math.sqrt(t * (1 - t) / self.attempts) if self.attempts else 0.0

    @property
    def z(self) -> float:
        s = self.stderr
        return (self.frequency - self.sup_tv) / s if s > 0 else 0.0


def couple_excursions(params: DominationParams, rng=None, K: int | None = None) -> CouplingReport:
    """Run the walk for K excursions and couple each return with a uniform start.

    At each departure D_k the torus position at the next return R_{k+1} has
    law nu (``entrance_law``) shifted by Y_{D_k}.  The coupled start X~ is
    X_{R_{k+1}} with probability min(1, N^-d / nu(Delta)); otherwise it is
    drawn from (q - nu)_+ and the coupled excursion is a fresh excursion from
    X~ conditioned to leave B~ through the same side as the true one.
    K excursions give K - 1 coupling attempts.
    """
    rng = as_generator(rng)
    N, d, r, h = params.N, params.d, params.r, params.h
    K = params.K if K is None else int(K)
    nu = entrance_law(N, d, h - r)
    qd = float(N) ** -d
    match = np.minimum(1.0, qd / nu)
    resid = np.clip(qd - nu, 0.0, None)
    resid_cum = np.cumsum(resid.ravel())
    tv = 0.5 * np.abs(nu - qd).sum()
    m_mix, v_mix = _mixing_steps(N, d)
    y = rng.integers(0, N, size=d).astype(np.int64)
    z = 0
    _kernels.cyl_walk_until(y, 0, N, d, 0, 0, 0, kernel_seed(rng), 0)
    attempts = mismatches = mixed = 0
    exp_sum = 0.0
    exits_ok = True
    if K < 1:
        return CouplingReport(0, 0, tv, 0.0, True, 0, K)
    z, n = _kernels.cyl_walk_until(y, z, N, d, -h, h, 0, -1, STEP_CAP)
    if n < 0:
        raise RuntimeError("step cap reached")
    for _ in range(1, K):
        yD = y.copy()
        zr, status = _kernels.descend_to_band(y, z, N, d, r, m_mix, v_mix, -1, STEP_CAP)
        if status < 0:
            raise RuntimeError("step cap reached")
        mixed += status == 1
        delta = tuple((y - yD) % N)
        pm = float(match[delta])
        exp_sum += 1.0 - pm
        attempts += 1
        matched = rng.random() < pm
        yR = y.copy()
        z, n = _kernels.cyl_walk_until(y, zr, N, d, -h, h, 0, -1, STEP_CAP)
        if n < 0:
            raise RuntimeError("step cap reached")
        if not matched:
            mismatches += 1
            k = int(np.searchsorted(resid_cum, rng.random() * resid_cum[-1], side="right"))
            yt = (yD + np.array(np.unravel_index(k, (N,) * d))) % N
            # fresh excursion from (yt, zr) conditioned on the exit side of the true one
            while True:
                yy = yt.astype(np.int64).copy()
                zz, n2 = _kernels.cyl_walk_until(yy, zr, N, d, -h, h, 0, -1, STEP_CAP)
                if n2 < 0:
                    raise RuntimeError("step cap reached")
                if zz == z:
                    break
            exits_ok &= zz == z
        del yR
    return CouplingReport(attempts, mismatches, float(tv), exp_sum / max(attempts, 1),
                          bool(exits_ok), int(mixed), K)


# ---------------------------------------------------------------- sign chain and types

PAIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))


def transfer_matrix(p) -> np.ndarray:
    """Pair chain on {1,-1}^2 in the order of PAIRS: (a, b) -> (b, b) w.p. p, (b, -b) w.p. 1 - p.

    Entries are Fractions if p is a Fraction.
    """
    exact = isinstance(p, Fraction)
    q = 1 - p
    T = np.empty((4, 4), dtype=object) if exact else np.zeros((4, 4))
    T[...] = Fraction(0) if exact else 0.0
    for i, (_, b) in enumerate(PAIRS):
        T[i, PAIRS.index((b, b))] = p
        T[i, PAIRS.index((b, -b))] = q
    return T


def stationary(p) -> np.ndarray:
    """Stationary law of the pair chain: (p/2, q/2, q/2, p/2)."""
    q = 1 - p
    half = Fraction(1, 2) if isinstance(p, Fraction) else 0.5
    return np.array([p * half, q * half, q * half, p * half], dtype=object if isinstance(p, Fraction) else float)


@dataclass
class ExcursionTypeCounts:
    """Types gamma_k = (+-r, +-h) of successive excursions.

    gamma_1 = (r, Z_{D_1}) by convention; for k >= 2 the entry level has the
    sign of the previous exit.  Counts N_k start at j = 2.
    """

    r: int
    h: int
    signs: np.ndarray  # sign of Z_{D_k}, k = 1..n
    iid_types: np.ndarray | None = None  # optional (n, 2) array of iid types

    @cached_property
    def types(self) -> np.ndarray:
        s = np.asarray(self.signs, dtype=np.int64)
        first = np.concatenate([[1], s[:-1]])
        return np.column_stack([self.r * first, self.h * s])

    @property
    def n(self) -> int:
        return len(self.signs)

    def counts(self, k: int | None = None) -> dict:
        """N_k(gamma) = #{2 <= j <= k : gamma_j = gamma}."""
        k = self.n if k is None else k
        t = self.types[1:k]
        return {
            (a, b): int(np.sum((t[:, 0] == a) & (t[:, 1] == b)))
            for a in (self.r, -self.r) for b in (self.h, -self.h)
        }

    def iid_counts(self, k: int) -> dict:
        """N'_k(gamma) = #{1 <= j <= k : gamma'_j = gamma}."""
        t = self.iid_types[:k]
        return {
            (a, b): int(np.sum((t[:, 0] == a) & (t[:, 1] == b)))
            for a in (self.r, -self.r) for b in (self.h, -self.h)
        }

    def pair_measure(self) -> np.ndarray:
        """Empirical measure of (sign of entry, sign of exit) over j >= 2, in PAIRS order."""
        t = np.sign(self.types[1:])
        out = np.array([np.mean((t[:, 0] == a) & (t[:, 1] == b)) for a, b in PAIRS])
        return out


@dataclass
class TypeChainReport:
    p: Fraction
    matrix: np.ndarray
    stationary: np.ndarray
    counts: ExcursionTypeCounts | None
    chi2: float = float("nan")
    dof: int = 2
    pvalue: float = float("nan")
    repeat_frequency: float = float("nan")


def type_chain(params: DominationParams, n: int = 0, rng=None, exact: bool = False) -> TypeChainReport:
    """Pair chain of exit signs: exact transfer matrix, and optionally n simulated excursions.

    The simulation follows the height process only (torus moves do not
    change heights); successive exits are compared with p_N by a chi-square
    test on the repeat/switch counts after each sign.
    """
    p = params.p
    T = transfer_matrix(p)
    st = stationary(p)
    if exact or n <= 1:
        return TypeChainReport(p, T, st, None)
    rng = as_generator(rng)
    signs = _kernels.exit_signs(params.z0, params.r, params.h, int(n), kernel_seed(rng))
    counts = ExcursionTypeCounts(params.r, params.h, signs)
    prev, nxt = signs[:-1], signs[1:]
    chi2 = 0.0
    pf = float(p)
    for s in (1, -1):
        m = prev == s
        tot = int(m.sum())
        if tot == 0:
            continue
        rep = int(np.sum(nxt[m] == s))
        obs = np.array([rep, tot - rep])
        exp = np.array([pf, 1 - pf]) * tot
        chi2 += float(((obs - exp) ** 2 / exp).sum())
    pval = float(stats.chi2.sf(chi2, 2))
    return TypeChainReport(p, T, st, counts, chi2, 2, pval, float(np.mean(prev == nxt)))


# ---------------------------------------------------------------- rate function


def _as_pair_matrix(mu) -> np.ndarray:
    m = np.asarray(mu, dtype=float)
    if m.shape == (4,):
        m = m.reshape(2, 2)
    if m.shape != (2, 2):
        raise ValueError("a measure on {1,-1}^2 has 4 atoms")
    if (m < 0).any() or abs(m.sum() - 1.0) > 1e-12:
        raise ValueError("not a probability")
    return m


def rate_function(mu, params: DominationParams | None = None, limit: bool = False, p=None) -> float:
    """H_{2,N}(mu) = sum mu(a,b) log(mu(b|a) / P(a,b)), +inf if the two marginals differ.

    ``mu`` is a 2x2 array indexed by (entry sign, exit sign) with +1 first,
    or a 4-vector in PAIRS order.  ``limit`` uses p = q = 1/2.
    """
    m = _as_pair_matrix(mu)
    if limit:
        pf = 0.5
    elif p is not None:
        pf = float(p)
    elif params is not None:
        pf = float(params.p)
    else:
        raise ValueError("need params, p or limit=True")
    if np.abs(m.sum(axis=0) - m.sum(axis=1)).max() > 1e-12:
        return math.inf
    P = np.array([[pf, 1 - pf], [1 - pf, pf]])
    m1 = m.sum(axis=1)
    total = 0.0
    for i in range(2):
        for j in range(2):
            if m[i, j] > 0:
                if P[i, j] == 0:
                    return math.inf
                total += m[i, j] * (math.log(m[i, j]) - math.log(m1[i]) - math.log(P[i, j]))
    return max(total, 0.0)


def zero_measure(p) -> np.ndarray:
    """The measure where H_{2,N} vanishes: first coordinate uniform, repeat probability p."""
    pf = float(p)
    return np.array([[pf / 2, (1 - pf) / 2], [(1 - pf) / 2, pf / 2]])


def _family(A: float, b: float) -> np.ndarray:
    # equal-marginal measures [[A, b], [b, C]]
    return np.array([[A, b], [b, max(1.0 - A - 2 * b, 0.0)]])


def rate_minimizer(p) -> np.ndarray:
    """Numerical argmin of H_{2,N} over the 2-parameter family of equal-marginal measures."""
    pf = float(p)

    def f(x):
        A, b = x
        if A < 0 or b < 0 or A + 2 * b > 1:
            return 1e3
        return rate_function(_family(A, b), p=pf)

    grid = np.linspace(0.0, 1.0, 101)
    best = min(((f((A, b)), A, b) for A in grid for b in grid / 2 if A + 2 * b <= 1))
    res = optimize.minimize(f, [best[1], best[2]], method="Nelder-Mead",
                            options={"xatol": 1e-13, "fatol": 1e-30, "maxiter": 20000})
    return _family(*res.x)


def _index(gamma) -> tuple:
    a, b = (int(np.sign(g)) for g in gamma)
    if a == 0 or b == 0:
        raise ValueError("gamma must be a pair of signs")
    return (0 if a == 1 else 1), (0 if b == 1 else 1)


def psi(gamma, v: float, p) -> tuple:
    """Psi_N(gamma, v) = inf {H_{2,N}(mu) : mu(gamma) >= v} and a minimizing measure.

    H_{2,N} is convex (a relative entropy), so either the zero measure is
    feasible (Psi = 0) or the infimum sits on mu(gamma) = v, a segment of
    the equal-marginal family searched by a grid and a bounded scalar
    refinement.  Infeasible constraints give +inf and None.
    """
    i, j = _index(gamma)
    pf = float(p)
    z = zero_measure(pf)
    if v <= z[i, j]:
        return 0.0, z
    if v > 1:
        return math.inf, None
    if i == j:
        hi = (1.0 - v) / 2

        def build(b):
            m = np.zeros((2, 2))
            m[i, i] = v
            m[1 - i, 1 - i] = max(1.0 - v - 2 * b, 0.0)
            m[0, 1] = m[1, 0] = b
            return m
    else:
        if v > 0.5:
            return math.inf, None
        hi = 1.0 - 2 * v

        def build(c):
            m = np.array([[c, v], [v, max(1.0 - 2 * v - c, 0.0)]])
            return m

    f = lambda t: rate_function(build(t), p=pf)
    if hi <= 0:
        return f(0.0), build(0.0)
    grid = np.linspace(0.0, hi, 1001)
    vals = np.array([f(t) for t in grid])
    k = int(np.argmin(vals))
    lo_b, hi_b = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(f, bounds=(lo_b, hi_b), method="bounded", options={"xatol": 1e-12})
    t = res.x if res.fun <= vals[k] else grid[k]
    return f(t), build(t)


# ---------------------------------------------------------------- large deviation check


def occupation_tail(gamma, v, n: int, p: Fraction) -> dict:
    """Exact R~_sigma[(1/n) sum_{m=1}^n 1{U_m = gamma} >= v] for every start sigma, as Fractions."""
    target = PAIRS.index(tuple(int(np.sign(g)) for g in gamma))
    need = math.ceil(Fraction(str(v)) * n)
    T = transfer_matrix(Fraction(p))
    out = {}
    for s0 in range(4):
        # dist[state][count]
        dist = [[Fraction(0)] * (n + 1) for _ in range(4)]
        dist[s0][0] = Fraction(1)
        for _ in range(n):
            new = [[Fraction(0)] * (n + 1) for _ in range(4)]
            for s in range(4):
                for c in range(n + 1):
                    w = dist[s][c]
                    if w == 0:
                        continue
                    for t in range(4):
                        pt = T[s, t]
                        if pt == 0:
                            continue
                        c2 = c + (t == target)
                        new[t][c2] += w * pt
            dist = new
        out[PAIRS[s0]] = sum((dist[s][c] for s in range(4) for c in range(max(need, 0), n + 1)), Fraction(0))
    return out


@dataclass
class LDCheck:
    gamma: tuple
    v: float
    n: int
    p: Fraction
    lhs: Fraction
    psi: float
    bound: mpmath.mpf
    holds: bool
    certificate: str  # "numeric", "rational" or "infeasible"

    @property
    def gap(self) -> float:
        return float(self.bound - mpmath.mpf(self.lhs.numerator) / self.lhs.denominator)


def _rational_bound(mu: np.ndarray, n: int, p: Fraction):
    """exp(-n H(mu)) as a Fraction when n mu has integer rational entries, else None."""
    fr = [[Fraction(float(mu[i, j])).limit_denominator(10**6) for j in range(2)] for i in range(2)]
    if any(abs(float(fr[i][j]) - mu[i, j]) > 1e-15 for i in range(2) for j in range(2)):
        return None
    P = [[p, 1 - p], [1 - p, p]]
    out = Fraction(1)
    for i in range(2):
        m1 = fr[i][0] + fr[i][1]
        for j in range(2):
            k = n * fr[i][j]
            if k.denominator != 1:
                return None
            if k == 0:
                continue
            out *= (P[i][j] * m1 / fr[i][j]) ** int(k)
    return out


def ld_check(gamma, v: float, n: int, params: DominationParams | None = None, p=None) -> LDCheck:
    """Compare the exact occupation tail (inf over starts) with exp(-n Psi_N(gamma, v)).

    The bound uses H at the measure returned by ``psi``, a feasible point, so
    H >= Psi and exp(-n H) is never larger than the true bound.  The
    comparison is exact: mpmath at 50 digits, and when the two sides agree
    to that precision, a rational evaluation of exp(-n H).
    """
    if n > 20:
        raise ValueError("exact enumeration is limited to n <= 20")
    pq = Fraction(params.p if p is None else p)
    lhs = min(occupation_tail(gamma, v, n, pq).values())
    val, mu = psi(gamma, v, pq)
    mpmath.mp.dps = 50
    lhs_mp = mpmath.mpf(lhs.numerator) / lhs.denominator
    if mu is None:
        return LDCheck(tuple(gamma), v, n, pq, lhs, math.inf, mpmath.mpf(0), lhs == 0, "infeasible")
    pm = mpmath.mpf(pq.numerator) / pq.denominator
    P = [[pm, 1 - pm], [1 - pm, pm]]
    H = mpmath.mpf(0)
    for i in range(2):
        m1 = mpmath.mpf(float(mu[i, 0])) + mpmath.mpf(float(mu[i, 1]))
        for j in range(2):
            mij = mpmath.mpf(float(mu[i, j]))
            if mij > 0:
                H += mij * mpmath.log(mij / (m1 * P[i][j]))
    bound = mpmath.exp(-n * H)
    if abs(bound - lhs_mp) > mpmath.mpf(10) ** -40 * max(bound, mpmath.mpf(1e-300)):
        return LDCheck(tuple(gamma), v, n, pq, lhs, float(H), bound, bool(lhs_mp <= bound), "numeric")
    rb = _rational_bound(mu, n, pq)
    if rb is None:
        return LDCheck(tuple(gamma), v, n, pq, lhs, float(H), bound, False, "unresolved")
    return LDCheck(tuple(gamma), v, n, pq, lhs, float(H), bound, bool(lhs <= rb), "rational")


# ---------------------------------------------------------------- good event


@dataclass
class GoodEventReport:
    frequency: float
    stderr: float
    reps: int
    K: int
    K_hat: int
    K_prime: int
    i0_failures: int
    count_failures: int


def _sign_chains(reps: int, K: int, p: float, z0: int, h: int, rng) -> np.ndarray:
    first = np.where(rng.random(reps) < (h + z0) / (2 * h), 1, -1)
    switch = np.where(rng.random((reps, max(K - 1, 0))) < 1 - p, -1, 1)
    return np.cumprod(np.concatenate([first[:, None], switch], axis=1), axis=1)


def good_event_frequency(params: DominationParams, reps: int, rng=None) -> GoodEventReport:
    """Empirical probability of G = {i_0 <= K' - K^ and N_K(gamma) <= N'_K^(gamma) for all gamma}.

    The exit-sign sequence of K excursions is the Markov chain with repeat
    probability p_N and initial law ((h+z0)/2h, (h-z0)/2h); the iid types
    gamma' have entry sign uniform and exit sign equal to it w.p. p_N; i_0 is
    the first iid trial that visits height z0 and leaves through the side
    of the first true excursion.
    """
    rng = as_generator(rng)
    K, Kh, Kp = params.K, params.K_hat, params.K_prime
    pf = float(params.p)
    r, h, z0 = params.r, params.h, params.z0
    signs = _sign_chains(reps, K, pf, z0, h, rng)
    # N_K over j = 2..K: pair (s_{j-1}, s_j)
    if K >= 2:
        a, b = signs[:, :-1], signs[:, 1:]
        nk = np.stack([np.sum((a == x) & (b == y), axis=1) for x, y in PAIRS], axis=1)
    else:
        nk = np.zeros((reps, 4), dtype=np.int64)
    probs = np.array(stationary(pf), dtype=float)
    nprime = rng.multinomial(Kh, probs, size=reps) if Kh > 0 else np.zeros((reps, 4), dtype=np.int64)
    count_ok = (nk <= nprime).all(axis=1)
    budget = Kp - Kh
    i0_ok = np.zeros(reps, dtype=bool)
    for i in range(reps):
        if budget >= 1:
            target = int(signs[i, 0]) if K >= 1 else 1
            i0_ok[i] = _kernels.first_success_trial(r, z0, h, target, budget, kernel_seed(rng)) > 0
    good = count_ok & i0_ok
    f = float(good.mean())
    return GoodEventReport(f, math.sqrt(f * (1 - f) / reps), reps, K, Kh, Kp,
                           int((~i0_ok).sum()), int((~count_ok).sum()))


def trial_success(params: DominationParams, reps: int, rng=None, target: int = 1) -> tuple:
    """(empirical, exact) probability that a trial from q visits z0 and leaves through ``target``.

    Exact value: (1/2) (h - r) / (h^2 - z0^2) |target h + z0|.
    """
    rng = as_generator(rng)
    r, h, z0 = params.r, params.h, params.z0
    starts = np.where(rng.random(reps) < 0.5, r, -r).astype(np.int64)
    hits = 0
    for zs in (r, -r):
        m = int((starts == zs).sum())
        if m:
            hit, sgn = _kernels.hit_before_exit(zs, z0, h, m, kernel_seed(rng))
            hits += int(np.sum(hit & (sgn == target)))
    exact = 0.5 * (h - r) / (h * h - z0 * z0) * abs(target * h + z0)
    return hits / reps, exact


# ---------------------------------------------------------------- Poissonization


@dataclass
class ExcursionAtom:
    """A special excursion that met A, re-rooted at its entrance in A (lattice coordinates)."""

    entry: tuple
    trace: np.ndarray  # indices into A (C order) visited before T_B~
    path: np.ndarray  # lattice path from H_A up to and including the exit of C~


@dataclass
class PoissonExcursionMeasure:
    """Atoms of mu' (kind "untruncated", paths stopped at T_B~) or mu (kind "truncated", stopped at T_C~)."""

    kind: str
    intensity: float
    mean_count: float
    count: int  # number of special excursions launched (J' or J)
    atoms: list
    a: int
    D: int

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def entry_points(self) -> np.ndarray:
        return np.array([at.entry for at in self.atoms], dtype=np.int64).reshape(-1, self.D)

    def trace_mask(self) -> np.ndarray:
        """Indicator over A (C order) of the union of the atoms' traces in A."""
        w = 2 * self.a + 1
        m = np.zeros(w**self.D, dtype=bool)
        for at in self.atoms:
            if self.kind == "untruncated":
                m[at.trace] = True
            else:
                m[_in_box_index(at.path, self.a)] = True
        return m

    def ranges(self) -> Region:
        """Union of the full ranges of the atoms (truncated paths)."""
        pts = frozenset(map(tuple, np.concatenate([at.path for at in self.atoms]).tolist())) if self.atoms else frozenset()
        return Region(Geometry.lattice(self.D), pts)


def _in_box_index(path: np.ndarray, a: int) -> np.ndarray:
    inside = np.abs(path).max(axis=1) <= a
    w = 2 * a + 1
    return np.ravel_multi_index(tuple((path[inside] + a).T), (w,) * path.shape[1])


def _box_points(a: int, D: int) -> np.ndarray:
    w = 2 * a + 1
    return np.stack(np.unravel_index(np.arange(w**D), (w,) * D), axis=1) - a


def special_excursions(params: DominationParams, n: int, rng=None) -> list:
    """Run n special excursions (start q, stop at T_B~) and keep those that meet A."""
    rng = as_generator(rng)
    N, d, r, h, a, c = params.N, params.d, params.r, params.h, params.a, params.c_tilde
    D = d + 1
    box = _box_points(a, D)
    buf = np.empty((1 << 16, D), dtype=np.int64)
    atoms = []
    for _ in range(int(n)):
        y = rng.integers(0, N, size=d).astype(np.int64)
        z = r if rng.random() < 0.5 else -r
        while True:
            hit, entry, mask, plen, steps = _kernels.special_excursion_in_box(
                y.copy(), z, N, d, h, a, c, kernel_seed(rng), STEP_CAP, buf)
            if steps < 0:
                raise RuntimeError("step cap reached")
            if plen <= len(buf):
                break
            buf = np.empty((2 * plen, D), dtype=np.int64)
        if not hit:
            continue
        path = _torus_embed(buf[:plen], N, d)
        atoms.append(ExcursionAtom(tuple(box[entry].tolist()), np.flatnonzero(mask), path))
    return atoms


def poissonize(params: DominationParams, rng=None) -> tuple:
    """mu' from J' ~ Poisson((1 + 3 delta/5) alpha N^d / h) special excursions, and I' = union of traces in A."""
    rng = as_generator(rng)
    J = int(rng.poisson(params.mean_J_prime))
    atoms = special_excursions(params, J, rng)
    mu = PoissonExcursionMeasure("untruncated", params.lam_prime, params.mean_J_prime, J,
                                 atoms, params.a, params.d + 1)
    return mu, _mask_region(mu.trace_mask(), params.a, params.d + 1)


def truncate_sprinkle(params: DominationParams, rng=None, base: PoissonExcursionMeasure | None = None) -> tuple:
    """mu from J ~ Poisson((1 + 4 delta/5) alpha N^d / h) excursions stopped at T_C~, and I = union of ranges.

    With ``base`` (a sample of mu'), its excursions are reused and only
    Poisson(mean_J - mean_J') extra ones are drawn, so both measures share
    their first J' excursions.
    """
    rng = as_generator(rng)
    if base is None:
        J = int(rng.poisson(params.mean_J))
        atoms = special_excursions(params, J, rng)
    else:
        extra = int(rng.poisson(params.mean_J - params.mean_J_prime))
        J = base.count + extra
        atoms = list(base.atoms) + special_excursions(params, extra, rng)
    mu = PoissonExcursionMeasure("truncated", params.lam, params.mean_J, J, atoms, params.a, params.d + 1)
    return mu, mu.ranges()


def _mask_region(mask: np.ndarray, a: int, D: int) -> Region:
    pts = _box_points(a, D)[mask]
    return Region(Geometry.lattice(D), frozenset(map(tuple, pts.tolist())))


def count_tail(params: DominationParams, reps: int, rng=None) -> float:
    """Empirical P[J' < K']."""
    rng = as_generator(rng)
    J = rng.poisson(params.mean_J_prime, size=reps)
    return float(np.mean(J < params.K_prime))


def entry_law_test(params: DominationParams, entries: np.ndarray, bins: int = 10) -> tuple:
    """Chi-square of atom entry points (lattice coordinates) against e_{A,B~} / cap.

    Points of the inner boundary of A are sorted by their mass and grouped
    into ``bins`` cells of nearly equal mass.  Returns (chi2, dof, pvalue).
    """
    N, d = params.N, params.d
    regs = params.regions()
    eq = equilibrium(regs["A"], regs["B_tilde"], "slab")
    pts = _torus_embed(eq.points, N, d)
    w = eq.values / eq.values.sum()
    order = np.lexsort((*pts.T[::-1], w))
    cum = np.cumsum(w[order]) - w[order]
    cell = np.empty(len(w), dtype=np.int64)
    cell[order] = np.minimum((cum * bins).astype(np.int64), bins - 1)
    mass = np.bincount(cell, weights=w, minlength=bins)
    index = {tuple(p): c for p, c in zip(pts.tolist(), cell)}
    entries = np.asarray(entries, dtype=np.int64).reshape(-1, d + 1)
    obs = np.bincount([index[tuple(e)] for e in entries.tolist()], minlength=bins)
    keep = mass > 0
    exp = mass[keep] * len(entries)
    chi2 = float(((obs[keep] - exp) ** 2 / exp).sum())
    dof = int(keep.sum()) - 1
    return chi2, dof, float(stats.chi2.sf(chi2, dof))


# ---------------------------------------------------------------- sprinkling


@dataclass
class SprinklingTable:
    status: str  # "ok" or "degenerate-scale"
    M: int
    c_radius: int
    starts: np.ndarray  # x in the outer boundary of C (lattice)
    targets: np.ndarray  # y in the inner boundary of A (lattice)
    lhs: np.ndarray  # P_x[T_C~ < R~_1 < T_B~, X_{R~_1} = y]
    rhs: np.ndarray  # P_x[R~_1 < T_C~, X_{R~_1} = y]
    reason: str = ""

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(self.rhs > 0, self.lhs / self.rhs, np.nan)

    @property
    def max_ratio(self) -> float:
        return float(np.nanmax(self.ratio)) if self.status == "ok" else float("nan")

    def constant(self, N: int, d: int) -> float:
        """max ratio * M^(d-1) / (log N)^2."""
        return self.max_ratio * self.M ** (d - 1) / math.log(N) ** 2


def sprinkling_ratio(params: DominationParams, method: str = "auto") -> SprinklingTable:
    """Exact hitting laws of A from the outer boundary of C, with and without a prior exit of C~.

    total(x, y) = P_x[H_A < T_B~, X_{H_A} = y] on the cylinder and
    inner(x, y) = P_x[H_A < T_C~, X_{H_A} = y] in the embedded box C~; the
    difference is the probability of reaching y after leaving C~.
    """
    N, d, h, a = params.N, params.d, params.h, params.a
    D = d + 1
    c = params.c_radius
    empty = np.zeros((0, D), dtype=np.int64)
    if c == 0 or a > c or c + 1 > params.c_tilde:
        why = "C has radius 0" if c == 0 else ("A is not inside C" if a > c else "C not inside C~")
        z = np.zeros((0, 0))
        return SprinklingTable("degenerate-scale", params.M, c, empty, empty, z, z, why)
    g = params.geometry
    regs = params.regions()
    A, Ct = regs["A"], regs["C_tilde"]
    C = make_box((0,) * D, c, g)
    starts_cyl = outer_boundary(C).array
    B_t = regs["B_tilde"]
    pts_cyl, total, _ = hitting_law_matrix(starts_cyl, A, B_t, "slab" if method == "auto" else method)
    A_lat = embed_region(A, Ct)
    Ct_lat = embed_region(Ct)
    starts_lat = _torus_embed(starts_cyl, N, d)
    pts_lat, inner, _ = hitting_law_matrix(starts_lat, A_lat, Ct_lat, method)
    # align the cylinder columns with the lattice ones
    col = _lookup(A_lat, _torus_embed(pts_cyl, N, d))
    tot = np.zeros_like(inner)
    tot[:, col] = total
    _, inner_bd = boundaries(A_lat)
    keep = _lookup(A_lat, inner_bd.array)
    lhs = tot[:, keep] - inner[:, keep]
    return SprinklingTable("ok", params.M, c, starts_lat, inner_bd.array, lhs, inner[:, keep])


# ---------------------------------------------------------------- intensity comparison


@dataclass
class IntensityReport:
    status: str  # "pass", "fail" or "inconclusive"
    points: np.ndarray  # inner boundary of A (lattice)
    e_AB: np.ndarray
    e_AC: np.ndarray
    e_A: np.ndarray
    e_A_error: float
    lam: float
    v: float
    chain_holds: bool

    @property
    def margins(self) -> np.ndarray:
        return self.v * self.e_A - self.lam * self.e_AB

    @property
    def margin(self) -> float:
        return float(self.margins.min())

    @property
    def certified_margin(self) -> float:
        return self.margin - self.v * self.e_A_error

    @property
    def holds(self) -> bool:
        return self.status == "pass"


def intensity_domination(params: DominationParams, v_test: float | None = None) -> IntensityReport:
    """Check lambda e_{A,B~} <= v e_A on the inner boundary of A.

    e_{A,B~} comes from the slab engine on the cylinder, e_{A,C~} from the
    embedded box and e_A from the lattice Green function with its certified
    error.  ``v_test`` replaces v on the right side only (lambda keeps the
    delta of ``params``).  Also checks e_{A,B~} <= e_{A,C~} exactly.
    """
    N, d = params.N, params.d
    regs = params.regions()
    A, Ct = regs["A"], regs["C_tilde"]
    eAB = equilibrium(A, regs["B_tilde"], "slab")
    A_lat = embed_region(A, Ct)
    eAC = equilibrium(A_lat, embed_region(Ct), "auto")
    eA = whole_space_exact(A_lat)
    err = exact_error_bound(eA)
    _, inner = boundaries(A_lat)
    pts = inner.array
    vAB = np.zeros(len(pts))
    vAB[_lookup(inner, _torus_embed(eAB.points, N, d))] = eAB.values
    vAC = np.zeros(len(pts))
    vAC[_lookup(inner, eAC.points)] = eAC.values
    vA = np.zeros(len(pts))
    vA[_lookup(inner, eA.points)] = eA.values
    v = params.v if v_test is None else float(v_test)
    lam = params.lam
    marg = v * vA - lam * vAB
    if marg.min() - v * err > 0:
        status = "pass"
    elif marg.min() + v * err < 0:
        status = "fail"
    else:
        status = "inconclusive"
    return IntensityReport(status, pts, vAB, vAC, vA, err, lam, v, bool(np.all(vAB <= vAC)))


# ---------------------------------------------------------------- domination experiment


def _small_sets(D: int) -> dict:
    o = (0,) * D
    e1 = (1,) + (0,) * (D - 1)
    eD = (0,) * (D - 1) + (1,)
    return {"{0}": [o], "{0,e1}": [o, e1], "{0,eD}": [o, eD], "{0,e1,eD}": [o, e1, eD]}


@dataclass
class StatisticResult:
    name: str
    walk: float
    walk_se: float
    interlacement: float
    interlacement_se: float
    sigmas: float = 3.0

    @property
    def slack(self) -> float:
        return self.interlacement + self.sigmas * math.hypot(self.walk_se, self.interlacement_se) - self.walk

    @property
    def passed(self) -> bool:
        return self.slack >= 0


@dataclass
class DominationReport:
    params: DominationParams
    reps: int
    K: int
    points: np.ndarray
    point_stats: list
    size_stat: StatisticResult
    set_stats: list
    status: str

    @property
    def point_pass_fraction(self) -> float:
        return float(np.mean([s.passed for s in self.point_stats]))

    @property
    def passed(self) -> bool:
        return self.point_pass_fraction >= 0.99 and self.size_stat.passed and all(s.passed for s in self.set_stats)

    def rows(self) -> list:
        out = [self.size_stat] + list(self.set_stats) + list(self.point_stats)
        return [(s.name, s.walk, s.walk_se, s.interlacement, s.interlacement_se, s.passed) for s in out]


def _mean_se(x: np.ndarray) -> tuple:
    x = np.asarray(x, dtype=float)
    n = len(x)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0


def walk_traces(params: DominationParams, reps: int, rng=None) -> np.ndarray:
    """Indicators over A (C order) of the walk trace up to D^0_K, start uniform on T x {0}.

    With K = 0 no excursion has been completed and the trace is taken empty.
    """
    rng = as_generator(rng)
    N, d, r, h, K, a = params.N, params.d, params.r, params.h, params.K, params.a
    w = (2 * a + 1) ** (d + 1)
    out = np.zeros((reps, w), dtype=np.uint8)
    if K == 0:
        return out
    for i in range(reps):
        mask, t = _kernels.walk_trace_to_departure(N, d, r, h, K, a, kernel_seed(rng), STEP_CAP)
        if t < 0:
            raise RuntimeError("step cap reached")
        out[i] = mask
    return out


def domination_experiment(params: DominationParams, reps: int, rng=None, statistics=None,
                          sigmas: float = 3.0) -> DominationReport:
    """Compare monotone statistics of the walk trace in A with those of I^v in A.

    Statistics: per-point coverage, |trace in A| and the coverage of small
    fixed sets (the names in ``statistics``, default all).  Each ordering
    E f(walk) <= E f(I^v) is accepted within ``sigmas`` combined standard errors.
    """
    rng = as_generator(rng)
    D = params.d + 1
    a = params.a
    walk = walk_traces(params, reps, rng).astype(bool)
    A_lat = Region(Geometry.lattice(D), frozenset(map(tuple, _box_points(a, D).tolist())), box=((0,) * D, a))
    ri = window_masks(A_lat, params.v, reps, A_lat, rng).astype(bool)
    pts = _box_points(a, D)
    point_stats = []
    for j, x in enumerate(pts.tolist()):
        m1, s1 = _mean_se(walk[:, j])
        m2, s2 = _mean_se(ri[:, j])
        point_stats.append(StatisticResult(f"point{tuple(x)}", m1, s1, m2, s2, sigmas))
    size = StatisticResult("size", *_mean_se(walk.sum(axis=1)), *_mean_se(ri.sum(axis=1)), sigmas)
    sets = _small_sets(D)
    names = list(sets) if statistics is None else [s for s in statistics if s in sets]
    w = 2 * a + 1
    set_stats = []
    for name in names:
        idx = [np.ravel_multi_index(tuple(np.add(p, a)), (w,) * D) for p in sets[name] if max(map(abs, p)) <= a]
        set_stats.append(StatisticResult(name, *_mean_se(walk[:, idx].all(axis=1)), *_mean_se(ri[:, idx].all(axis=1)), sigmas))
    status = "degenerate-K" if params.K == 0 else "ok"
    return DominationReport(params, reps, params.K, pts, point_stats, size, set_stats, status)
