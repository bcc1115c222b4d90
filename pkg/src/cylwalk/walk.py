"""Seeded simple random walk on the cylinder and on Z^D.

Paths are simulated in vectorized chunks and cut at the first index where a
stopping rule fires.  Stopping rules mirror the usual entrance, hitting and
exit times of a set; height-only rules cover the slabs B(z) and B~(z).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .lattice import Geometry, Region, h_scale, r_scale
from .rng import as_generator

DEFAULT_STEP_CAP = 10**9
_CHUNK_MIN = 256
_CHUNK_MAX = 1 << 20


class StepCapExceeded(RuntimeError):
    """The walk ran past its step cap before the stopping rule fired."""


@dataclass(frozen=True, eq=False)
class PathSample:
    """A finite lattice path.

    ``breaks`` lists indices i where points[i] is not a neighbour of
    points[i - 1] (used for interlacement trajectories observed in a finite
    set, which leave and re-enter it).
    """

    points: np.ndarray
    geometry: Geometry
    breaks: tuple = ()

    def __post_init__(self):
        if len(self.points) == 0:
            raise ValueError("a path has at least one point")

    @property
    def length(self) -> int:
        """Number of steps."""
        return len(self.points) - 1

    @property
    def start(self) -> tuple:
        return tuple(int(c) for c in self.points[0])

    @property
    def end(self) -> tuple:
        return tuple(int(c) for c in self.points[-1])

    @property
    def heights(self) -> np.ndarray:
        return self.points[:, -1]

    def trace(self) -> Region:
        pts = np.unique(self.points, axis=0)
        return Region(self.geometry, frozenset(map(tuple, pts.tolist())))

    def is_nearest_neighbour(self) -> bool:
        """Consecutive points adjacent, except at declared breaks."""
        if self.length == 0:
            return True
        g = self.geometry
        diff = np.diff(self.points, axis=0)
        if g.is_cylinder:
            t = diff[:, : g.d] % g.N
            diff = diff.copy()
            diff[:, : g.d] = np.where(t > g.N // 2, t - g.N, t)
        ok = np.abs(diff).sum(axis=1) == 1
        if self.breaks:
            ok[np.asarray(self.breaks) - 1] = True
        return bool(ok.all())

    def to_csv(self, path):
        D = self.geometry.dim
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step"] + [f"coord_{i + 1}" for i in range(D)])
            for i, p in enumerate(self.points.tolist()):
                w.writerow([i] + p)


# ---------------------------------------------------------------- stopping rules


class StoppingRule:
    """First index n >= ``min_index`` of a path where ``hits`` is true."""

    min_index = 0

    def hits(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def first(self, pts: np.ndarray, offset: int) -> int:
        """Index into ``pts`` of the first firing, given pts[0] has path index ``offset``."""
        skip = max(0, self.min_index - offset)
        if skip >= len(pts):
            return -1
        idx = np.flatnonzero(self.hits(pts[skip:]))
        return int(idx[0]) + skip if len(idx) else -1


class EntranceTime(StoppingRule):
    """H_U = inf{n >= 0: X_n in U}."""

    def __init__(self, U: Region):
        self.U = U

    def hits(self, pts):
        return self.U.contains_array(pts)


class HittingTime(EntranceTime):
    """H~_U = inf{n >= 1: X_n in U}."""

    min_index = 1


class ExitTime(StoppingRule):
    """T_U = inf{n >= 0: X_n not in U}."""

    def __init__(self, U: Region):
        self.U = U

    def hits(self, pts):
        return ~self.U.contains_array(pts)


class ExitHeights(StoppingRule):
    """First n >= 0 with height outside [lo, hi]."""

    def __init__(self, lo: int, hi: int):
        self.lo, self.hi = int(lo), int(hi)

    def hits(self, pts):
        z = pts[:, -1]
        return (z < self.lo) | (z > self.hi)


class EnterHeights(StoppingRule):
    """First n >= 0 with height inside [lo, hi]."""

    def __init__(self, lo: int, hi: int):
        self.lo, self.hi = int(lo), int(hi)

    def hits(self, pts):
        z = pts[:, -1]
        return (z >= self.lo) & (z <= self.hi)


class StepCount(StoppingRule):
    """Deterministic time n."""

    def __init__(self, n: int):
        self.n = int(n)
        self.min_index = self.n

    def hits(self, pts):
        return np.ones(len(pts), dtype=bool)


class FirstOf(StoppingRule):
    """Minimum of several stopping rules."""

    def __init__(self, *rules: StoppingRule):
        self.rules = rules

    def first(self, pts, offset):
        idx = [r.first(pts, offset) for r in self.rules]
        idx = [i for i in idx if i >= 0]
        return min(idx) if idx else -1


def _steps(g: Geometry, rng: np.random.Generator, n: int) -> np.ndarray:
    return g.unit_steps()[rng.integers(0, 2 * g.dim, size=n)]


def run_until(start, stop: StoppingRule, g: Geometry, rng=None,
              cap: int = DEFAULT_STEP_CAP) -> PathSample:
    """Simulate from ``start`` until ``stop`` fires; the path ends at that step."""
    rng = as_generator(rng)
    x = np.asarray(g.normalize(start), dtype=np.int64)
    first = stop.first(x[None, :], 0)
    if first == 0:
        return PathSample(x[None, :], g)
    pieces = [x[None, :]]
    done = 0
    chunk = _CHUNK_MIN
    while True:
        m = min(chunk, cap - done)
        if m <= 0:
            raise StepCapExceeded(f"no stop within {cap} steps")
        pts = x + np.cumsum(_steps(g, rng, m), axis=0)
        if g.is_cylinder:
            pts[:, : g.d] %= g.N
        i = stop.first(pts, done + 1)
        if i >= 0:
            pieces.append(pts[: i + 1])
            return PathSample(np.concatenate(pieces), g)
        pieces.append(pts)
        x = pts[-1]
        done += m
        chunk = min(2 * chunk, _CHUNK_MAX)


def concat_paths(paths: list) -> PathSample:
    """Join paths whose endpoints coincide (the shared point kept once)."""
    g = paths[0].geometry
    arrs = [paths[0].points] + [p.points[1:] for p in paths[1:]]
    return PathSample(np.concatenate(arrs), g)


# ---------------------------------------------------------------- initial laws


def sample_initial(dist: str, g: Geometry, rng=None, z: int = 0) -> tuple:
    """Draw a start point.

    ``q_z``: uniform on T x {z}; ``q``: q_{r_N} or q_{-r_N} with probability
    1/2 each; ``uniform-level``: uniform on T x {0}.
    """
    if not g.is_cylinder:
        raise ValueError("initial laws live on the cylinder")
    rng = as_generator(rng)
    y = tuple(int(c) for c in rng.integers(0, g.N, size=g.d))
    if dist == "q_z":
        h = int(z)
    elif dist == "q":
        h = r_scale(g.N) * (1 if rng.random() < 0.5 else -1)
    elif dist in ("uniform-level", "P"):
        h = 0
    else:
        raise ValueError(f"unknown initial law {dist!r}")
    return y + (h,)


# ---------------------------------------------------------------- excursions


class IncompleteExcursions(ValueError):
    """The path ends before the requested number of departures."""


@dataclass
class ExcursionTimes:
    """Successive returns R_k to B(z) and departures D_k from B~(z)."""

    z: int
    r: int
    h: int
    returns: list = field(default_factory=list)
    departures: list = field(default_factory=list)
    entry_heights: list = field(default_factory=list)
    exit_heights: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.departures)

    def check(self) -> bool:
        """Ordering 0 <= R_1 <= D_1 < R_2 < D_2 < ... and sign matching."""
        R, D = self.returns, self.departures
        if len(R) < len(D):
            return False
        seq = []
        for k in range(len(D)):
            seq += [R[k], D[k]]
        if seq and seq[0] < 0:
            return False
        for i in range(1, len(seq)):
            if seq[i] <= seq[i - 1] and not (i == 1 and seq[1] == seq[0]):
                return False
        for k in range(len(D)):
            if abs(self.exit_heights[k] - self.z) != self.h:
                return False
            if k + 1 < len(R):
                a = np.sign(self.exit_heights[k] - self.z)
                b = np.sign(self.entry_heights[k + 1] - self.z)
                if a != b or abs(self.entry_heights[k + 1] - self.z) != self.r:
                    return False
        return True


def excursion_times(path: PathSample, z: int, K: int) -> ExcursionTimes:
    """First K return/departure pairs of a path around height z."""
    g = path.geometry
    r, h = r_scale(g.N), h_scale(g.N)
    H = path.heights - int(z)
    inside = np.flatnonzero(np.abs(H) <= r)
    outside = np.flatnonzero(np.abs(H) >= h)
    out = ExcursionTimes(int(z), r, h)
    t = 0
    for _ in range(K):
        i = np.searchsorted(inside, t)
        if i == len(inside):
            raise IncompleteExcursions("path ends before the next return")
        R = int(inside[i])
        j = np.searchsorted(outside, R)
        if j == len(outside):
            raise IncompleteExcursions("path ends inside an excursion")
        D = int(outside[j])
        out.returns.append(R)
        out.departures.append(D)
        out.entry_heights.append(int(path.heights[R]))
        out.exit_heights.append(int(path.heights[D]))
        t = D + 1
    return out


def excursions(source, z: int, K: int, g: Geometry | None = None, rng=None,
               cap: int = DEFAULT_STEP_CAP) -> tuple:
    """Excursion times around height z.

    ``source`` is either a PathSample (times are read off, error if it is
    too short) or a start point, in which case the walk is simulated until
    D^z_K.  Returns (ExcursionTimes, PathSample).
    """
    if isinstance(source, PathSample):
        return excursion_times(source, z, K), source
    if g is None:
        raise ValueError("geometry needed to simulate")
    rng = as_generator(rng)
    r, h = r_scale(g.N), h_scale(g.N)
    z = int(z)
    pieces = [PathSample(np.asarray([g.normalize(source)], dtype=np.int64), g)]
    used = 0
    for _ in range(K):
        for rule in (EnterHeights(z - r, z + r), ExitHeights(z - h + 1, z + h - 1)):
            p = run_until(pieces[-1].end, rule, g, rng, cap - used)
            used += p.length
            pieces.append(p)
    path = concat_paths(pieces)
    return excursion_times(path, z, K), path


def special_excursion(g: Geometry, rng=None, cap: int = DEFAULT_STEP_CAP) -> PathSample:
    """Walk from q stopped on leaving B~ = T x (-h_N, h_N)."""
    rng = as_generator(rng)
    h = h_scale(g.N)
    x0 = sample_initial("q", g, rng)
    return run_until(x0, ExitHeights(-h + 1, h - 1), g, rng, cap)


def conditioned_excursion(z1: int, z2: int, g: Geometry, rng=None,
                          max_trials: int = 10**6, cap: int = DEFAULT_STEP_CAP) -> tuple:
    """Walk from q_{z1} stopped on leaving B~, conditioned to exit at height z2.

    Rejection sampling; returns (path, number of trials used).
    """
    rng = as_generator(rng)
    h = h_scale(g.N)
    if abs(int(z2)) != h:
        raise ValueError("exit height must be +-h_N")
    if not -h < int(z1) < h:
        raise ValueError("start height must lie in (-h_N, h_N)")
    for trial in range(1, max_trials + 1):
        x0 = sample_initial("q_z", g, rng, z=z1)
        p = run_until(x0, ExitHeights(-h + 1, h - 1), g, rng, cap)
        if p.end[-1] == z2:
            return p, trial
    raise RuntimeError("rejection sampler exhausted its trials")


# ---------------------------------------------------------------- vertical skeleton


@dataclass
class VerticalSkeleton:
    """Times rho_m of vertical moves and the embedded +-1 walk Zhat_m = Z_{rho_m}."""

    rho: np.ndarray
    zhat: np.ndarray

    def local_time(self, z: int, k: int) -> int:
        """L^z_k = #{0 <= m < k: Zhat_m = z}."""
        return int(np.count_nonzero(self.zhat[:k] == z))

    def local_time_profile(self, z: int) -> np.ndarray:
        """Array L with L[k] = L^z_k for k = 0..len(rho)."""
        return np.concatenate([[0], np.cumsum(self.zhat == z)])


def vertical_skeleton(path: PathSample) -> VerticalSkeleton:
    H = path.heights
    moves = np.flatnonzero(np.diff(H) != 0) + 1
    rho = np.concatenate([[0], moves]).astype(np.int64)
    return VerticalSkeleton(rho, H[rho].astype(np.int64))


def gamma_level_time(path: PathSample, z: int, u: float, skeleton: VerticalSkeleton | None = None):
    """gamma^z_u = inf{rho_k: k >= 0, L^z_k >= u}, or None if not reached on the path."""
    sk = skeleton or vertical_skeleton(path)
    if u <= 0:
        return 0
    prof = sk.local_time_profile(int(z))
    ks = np.flatnonzero(prof >= u)
    if len(ks) == 0 or ks[0] >= len(sk.rho):
        return None
    return int(sk.rho[ks[0]])
