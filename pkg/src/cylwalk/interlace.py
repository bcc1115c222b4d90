"""Random interlacements observed in a finite box of Z^D.

A sample of the interlacement at level u seen from a finite set K is a
Poisson(u cap(K)) number of independent forward walks started from the
normalized equilibrium measure of K.  Walks are followed exactly inside a
finite observation box F containing K: on stepping out of F to w, the walk
re-enters F at y with probability P_w[H_F < inf, X_{H_F} = y] (computed
from the lattice Green function) and otherwise escapes for good.  The
trace on F is therefore exact; no truncation error enters.

A truncated mode (walks killed on leaving B(0, R_kill)) is kept for
comparison; it reports the leakage bound max_{x in S(0, R_kill)}
P_x[H_box < inf] for the bounding box of K.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .greens import green_matrix
from .lattice import Geometry, Region, make_box, make_sphere
from .potential import _lookup, exact_error_bound, hit_prob_exact, whole_space_exact
from .rng import as_generator, kernel_seed
from .walk import PathSample

TRAJ_CAP = 10**8


@dataclass(frozen=True, eq=False)
class ObservationChain:
    """Exact excursion chain of SRW on Z^D restricted to a box F."""

    F: Region
    nbr: np.ndarray  # (|F|, 2D); >= 0 index in F, < 0 encodes an outer point
    qcum: np.ndarray  # (n_outer, n_entry) cumulative re-entry probabilities
    entry: np.ndarray  # indices in F of the inner boundary of F
    outer: np.ndarray  # outer boundary points of F
    exact: bool

    @property
    def escape(self) -> np.ndarray:
        return 1.0 - self.qcum[:, -1]


def _circumradius(K: Region) -> int:
    return int(np.abs(K.array).max()) if len(K) else 0


@lru_cache(maxsize=16)
def observation_chain(D: int, R: int, exact: bool = True) -> ObservationChain:
    """Chain on F = B(0, R) in Z^D; ``exact=False`` kills walks leaving F."""
    g = Geometry.lattice(D)
    F = make_box((0,) * D, R, g)
    pts = F.array
    steps = g.unit_steps()
    tgt = pts[:, None, :] + steps[None, :, :]
    idx = _lookup(F, tgt.reshape(-1, D)).reshape(len(pts), 2 * D)
    out_mask = idx < 0
    outer, oinv = np.unique(tgt[out_mask], axis=0, return_inverse=True)
    nbr = idx.copy()
    nbr[out_mask] = -(oinv.reshape(-1) + 1)
    entry = np.flatnonzero(out_mask.any(axis=1))
    if exact:
        inner = pts[entry]
        Gii = green_matrix(inner, inner)
        Goi = green_matrix(outer, inner)
        Q = np.linalg.solve(Gii, Goi.T).T  # Q = G_oi G_ii^{-1} (G_ii symmetric)
        Q = np.clip(Q, 0.0, None)
        qcum = np.cumsum(Q, axis=1)
        over = qcum[:, -1] > 1.0
        qcum[over] /= qcum[over, -1:]
    else:
        qcum = np.zeros((len(outer), 1))
        entry = np.zeros(1, dtype=np.int64)
    return ObservationChain(F, nbr.astype(np.int64), qcum, entry.astype(np.int64), outer, exact)


@dataclass(eq=False)
class TrajectoryCloud:
    """Forward trajectories of an interlacement sample, seen inside ``window``.

    ``labels`` are iid uniform levels on [0, u]; the sub-cloud with labels
    <= u' is a sample at level u' (superposition coupling).
    """

    u: float
    K: Region
    capacity: float
    trajectories: list
    labels: np.ndarray
    window: Region
    mode: str
    R_kill: int | None
    leakage: float
    capacity_error: float

    def at_level(self, u: float) -> "TrajectoryCloud":
        if u > self.u:
            raise ValueError("cannot raise the level of a sample")
        keep = [i for i, l in enumerate(self.labels) if l <= u]
        return TrajectoryCloud(
            u, self.K, self.capacity, [self.trajectories[i] for i in keep],
            self.labels[keep], self.window, self.mode, self.R_kill,
            self.leakage, self.capacity_error,
        )

    def to_json(self, path=None) -> str:
        doc = {
            "u": self.u,
            "cap": self.capacity,
            "cap_error": self.capacity_error,
            "mode": self.mode,
            "R_kill": self.R_kill,
            "leakage": self.leakage,
            "trajectories": [t.points.tolist() for t in self.trajectories],
        }
        text = json.dumps(doc)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


@dataclass(frozen=True, eq=False)
class _Launch:
    chain: ObservationChain
    starts: np.ndarray  # indices in F
    scum: np.ndarray
    capacity: float
    capacity_error: float
    leakage: float
    R: int


def leakage_bound(K: Region, R_kill: int) -> float:
    """max over S(0, R_kill) of P_x[H_box < inf], box = bounding box of K."""
    D = K.geometry.dim
    box = make_box((0,) * D, _circumradius(K), Geometry.lattice(D))
    sphere = make_sphere((0,) * D, R_kill, Geometry.lattice(D)).array
    return float(hit_prob_exact(sphere, box).max())


def _launch(K: Region, mode: str, R: int | None) -> _Launch:
    g = K.geometry
    if g.is_cylinder or g.dim < 3:
        raise ValueError("interlacements live on Z^D with D >= 3")
    if len(K) == 0:
        raise ValueError("empty base set")
    rad = _circumradius(K)
    if mode == "exact":
        R = rad if R is None else int(R)
        if R < rad:
            raise ValueError("observation box must contain K")
        chain = observation_chain(g.dim, R, True)
        leak = 0.0
    elif mode == "truncated":
        R = 5 * max(rad, 1) if R is None else int(R)
        if R <= rad:
            raise ValueError("R_kill smaller than the circumradius of K")
        chain = observation_chain(g.dim, R, False)
        leak = leakage_bound(K, R + 1)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    eq = whole_space_exact(K)
    starts = _lookup(chain.F, eq.points)
    return _Launch(chain, starts, np.cumsum(eq.values), eq.capacity, exact_error_bound(eq), leak, R)


def sample_cloud(K: Region, u: float, rng=None, R_kill: int | None = None,
                 mode: str = "exact") -> TrajectoryCloud:
    """Sample mu_{K,u} observed in B(0, R) (R = circumradius of K by default in
    exact mode; R_kill = 5 x circumradius in truncated mode)."""
    if u < 0:
        raise ValueError("level must be >= 0")
    rng = as_generator(rng)
    L = _launch(K, mode, R_kill)
    J = int(rng.poisson(u * L.capacity))
    stot = L.scum[-1]
    trajs = []
    buf = np.empty(TRAJ_CAP // 100 + 1, dtype=np.int64)
    np_seed = kernel_seed(rng)
    _kernels_seed(np_seed)
    Fpts = L.chain.F.array
    for _ in range(J):
        s = L.starts[np.searchsorted(L.scum, rng.random() * stot, side="right")]
        n = _kernels.ri_trajectory(int(s), L.chain.nbr, L.chain.qcum, L.chain.entry, buf, len(buf) - 1)
        if n < 0:
            raise RuntimeError("trajectory exceeded its buffer")
        raw = buf[:n]
        brk = np.flatnonzero(raw < 0)
        idx = np.where(raw < 0, -raw - 1, raw)
        trajs.append(PathSample(Fpts[idx].copy(), K.geometry, tuple(int(b) for b in brk)))
    labels = rng.uniform(0.0, u, size=J)
    return TrajectoryCloud(float(u), K, L.capacity, trajs, labels, L.chain.F, mode,
                           L.R if mode == "truncated" else None, L.leakage, L.capacity_error)


def _kernels_seed(seed: int):
    # seeds numba's generator, used by ri_trajectory
    _kernels.cyl_walk_until(np.zeros(1, dtype=np.int64), 0, 2, 1, 0, 0, 0, seed, 0)


def trace(cloud: TrajectoryCloud, A: Region) -> Region:
    """Union of trajectory ranges, intersected with A."""
    pts = set()
    for t in cloud.trajectories:
        pts.update(map(tuple, np.unique(t.points, axis=0).tolist()))
    return Region(A.geometry, frozenset(pts) & A.vertices)


@dataclass
class VacantReport:
    u: float
    reps: int
    frequency: float
    stderr: float
    target: float
    cap_sub: float
    cap_base: float
    empty_frequency: float
    empty_target: float
    leakage: float
    mode: str

    @property
    def z(self) -> float:
        s = math.sqrt(self.target * (1 - self.target) / self.reps)
        return (self.frequency - self.target) / s if s > 0 else 0.0


def vacant_check(K_sub: Region, K: Region, u: float, reps: int, rng=None,
                 mode: str = "exact", R_kill: int | None = None) -> VacantReport:
    """Frequency of {no trajectory of mu_{K,u} meets K_sub} vs exp(-u cap(K_sub))."""
    if not K_sub.issubset(K):
        raise ValueError("K_sub must lie in K")
    rng = as_generator(rng)
    L = _launch(K, mode, R_kill)
    target = np.zeros(len(L.chain.F), dtype=np.uint8)
    target[_lookup(L.chain.F, K_sub.array)] = 1
    void, empty = _kernels.ri_void(
        u * L.capacity, L.scum, L.starts, L.chain.nbr, L.chain.qcum, L.chain.entry,
        target, int(reps), kernel_seed(rng), TRAJ_CAP,
    )
    if void < 0:
        raise RuntimeError("trajectory exceeded its cap")
    cap_sub = whole_space_exact(K_sub).capacity
    freq = void / reps
    return VacantReport(
        u, int(reps), freq, math.sqrt(max(freq * (1 - freq), 1e-300) / reps),
        math.exp(-u * cap_sub), cap_sub, L.capacity, empty / reps,
        math.exp(-u * L.capacity), L.leakage, mode,
    )


def coverage(K: Region, u: float, reps: int, rng=None, window: Region | None = None,
             mode: str = "exact", R_kill: int | None = None) -> tuple:
    """Per-point hit frequencies on K and per-sample |I^u cap window|.

    Returns (points of K, frequency per point, sizes per sample).
    """
    rng = as_generator(rng)
    L = _launch(K, mode, R_kill)
    win = np.zeros(len(L.chain.F), dtype=np.uint8)
    W = K if window is None else window
    win[_lookup(L.chain.F, W.array)] = 1
    counts, sizes = _kernels.ri_coverage(
        u * L.capacity, L.scum, L.starts, L.chain.nbr, L.chain.qcum, L.chain.entry,
        win, int(reps), kernel_seed(rng), TRAJ_CAP,
    )
    kidx = _lookup(L.chain.F, K.array)
    return K.array, counts[kidx] / reps, sizes


@dataclass
class DecayTable:
    u: float
    Ls: list
    p_hat: np.ndarray
    stderr: np.ndarray
    reps: int
    exponent: float | None

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["L", "p_hat", "stderr", "reps"])
            for L, p, s in zip(self.Ls, self.p_hat, self.stderr):
                w.writerow([L, repr(float(p)), repr(float(s)), self.reps])


def planar_star_decay(u: float, Ls, reps: int, rng=None, D: int = 3) -> DecayTable:
    """P[*-path from 0 to S(0, L) in I^u restricted to the plane Z e_1 + Z e_D].

    The cloud is sampled from K = B(0, max L), whose trace contains the
    planar square.  A log-log least-squares slope over the positive
    estimates is reported as the decay exponent.
    """
    Ls = sorted(int(L) for L in Ls)
    rng = as_generator(rng)
    Lmax = Ls[-1]
    g = Geometry.lattice(D)
    if u == 0:
        p = np.zeros(len(Ls))
        return DecayTable(0.0, Ls, p, p.copy(), int(reps), None)
    K = make_box((0,) * D, Lmax, g)
    L = _launch(K, "exact", Lmax)
    W = 2 * Lmax + 1
    a, b = np.meshgrid(np.arange(-Lmax, Lmax + 1), np.arange(-Lmax, Lmax + 1), indexing="ij")
    plane = np.zeros((W * W, D), dtype=np.int64)
    plane[:, 0] = a.reshape(-1)
    plane[:, -1] = b.reshape(-1)
    pidx = _lookup(L.chain.F, plane)
    out, status = _kernels.ri_star(
        u * L.capacity, L.scum, L.starts, L.chain.nbr, L.chain.qcum, L.chain.entry,
        pidx, np.asarray(Ls, dtype=np.int64), int(reps), kernel_seed(rng), TRAJ_CAP,
    )
    if status < 0:
        raise RuntimeError("trajectory exceeded its cap")
    p = out.mean(axis=0)
    se = np.sqrt(p * (1 - p) / reps)
    pos = p > 0
    expo = None
    if pos.sum() >= 2:
        expo = float(-np.polyfit(np.log(np.asarray(Ls)[pos]), np.log(p[pos]), 1)[0])
    return DecayTable(float(u), Ls, p, se, int(reps), expo)


def window_masks(K: Region, u: float, reps: int, window: Region, rng=None) -> np.ndarray:
    """Indicators of I^u on the points of ``window`` (a subset of K), one row per sample.

    Columns follow ``window.array``.
    """
    if not window.issubset(K):
        raise ValueError("window must lie in K")
    rng = as_generator(rng)
    L = _launch(K, "exact", None)
    widx = _lookup(L.chain.F, window.array)
    out, status = _kernels.ri_window_masks(
        u * L.capacity, L.scum, L.starts, L.chain.nbr, L.chain.qcum, L.chain.entry,
        widx, int(reps), kernel_seed(rng), TRAJ_CAP,
    )
    if status < 0:
        raise RuntimeError("trajectory exceeded its cap")
    return out
