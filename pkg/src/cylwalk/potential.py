"""Discrete potential theory of the killed walk on finite regions.

Three exact engines are used, picked by the shape of the killing region U:

* ``sparse``: any finite region; sparse LU of I - P_U.
* ``box``: sup-norm boxes of Z^D; the killed kernel is diagonal in the
  product sine basis, so one Green column costs two DST-I transforms.
* ``slab``: full slabs T x [a, b] of the cylinder (see ``greens.slab_green``).

Whole-space quantities on Z^D come either from finite-window limits
(``whole_space``) or from the lattice Green function (``whole_space_exact``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import fft

from .greens import green_error_bound, green_matrix, slab_green
from .lattice import Geometry, Region, boundaries, make_box, make_sphere, outer_boundary

DENSE_LIMIT = 4000


class SolveError(RuntimeError):
    pass


def _lookup(U: Region, pts: np.ndarray) -> np.ndarray:
    """Row index in ``U.array`` of each point, or -1."""
    lo, shape, keys = U._keys
    out = np.full(len(pts), -1, dtype=np.int64)
    if lo is None or len(pts) == 0:
        return out
    rel = pts - lo
    ok = np.all((rel >= 0) & (rel < shape), axis=1)
    if ok.any():
        k = np.ravel_multi_index(rel[ok].T, shape)
        pos = np.minimum(np.searchsorted(keys, k), len(keys) - 1)
        hit = keys[pos] == k
        idx = np.flatnonzero(ok)
        out[idx[hit]] = pos[hit]
    return out


def _step_targets(U: Region) -> np.ndarray:
    """(n, 2D, D) array of normalized one-step targets from each point of U."""
    g = U.geometry
    steps = g.unit_steps()
    tgt = U.array[:, None, :] + steps[None, :, :]
    return g.normalize_array(tgt)


def transition_matrix(U: Region) -> sp.csr_matrix:
    """Kernel of the walk killed on exiting U, as a sparse |U| x |U| matrix.

    Each of the 2D unit steps carries weight 1/(2D); on the N=2 torus two
    steps land on the same vertex and their weights add up.
    """
    n = len(U)
    D = U.geometry.dim
    tgt = _step_targets(U).reshape(-1, D)
    j = _lookup(U, tgt)
    i = np.repeat(np.arange(n), 2 * D)
    keep = j >= 0
    P = sp.coo_matrix((np.full(keep.sum(), 1.0 / (2 * D)), (i[keep], j[keep])), shape=(n, n))
    return P.tocsr()


def _factor(U: Region):
    n = len(U)
    A = (sp.identity(n, format="csc") - transition_matrix(U).tocsc()).tocsc()
    try:
        return spla.splu(A)
    except RuntimeError as exc:  # pragma: no cover - I - P_U is never singular
        raise SolveError(f"singular killed kernel on {U}") from exc


@dataclass
class KilledWalkSolve:
    """Factorized I - P_U with Green-function access."""

    region: Region
    lu: object = field(repr=False)

    @property
    def index(self) -> dict:
        return self.region.index

    def green_column(self, y) -> np.ndarray:
        """g_U(., y) over the rows of ``region.array``."""
        b = np.zeros(len(self.region))
        b[self.index[tuple(y)]] = 1.0
        return self.lu.solve(b)

    def green_block(self, cols: np.ndarray) -> np.ndarray:
        """g_U(., c) for each column point c (shape (|U|, len(cols)))."""
        idx = _lookup(self.region, np.asarray(cols, dtype=np.int64))
        if (idx < 0).any():
            raise ValueError("column point outside the region")
        B = np.zeros((len(self.region), len(idx)))
        B[idx, np.arange(len(idx))] = 1.0
        return self.lu.solve(B)

    @property
    def green(self) -> np.ndarray:
        """Dense g_U; rows and columns follow ``region.array``."""
        g = getattr(self, "_green", None)
        if g is None:
            n = len(self.region)
            if n > DENSE_LIMIT:
                raise MemoryError(f"dense Green matrix for |U|={n} exceeds {DENSE_LIMIT}")
            g = self.lu.solve(np.eye(n))
            self._green = g
        return g

    def green_entry(self, x, y) -> float:
        return float(self.green_column(y)[self.index[tuple(x)]])

    def dump_csv(self, path, equilibrium: "EquilibriumResult | None" = None):
        dump_csv(path, self, equilibrium)


def solve_killed(U: Region) -> KilledWalkSolve:
    if len(U) == 0:
        raise ValueError("empty region")
    return KilledWalkSolve(U, _factor(U))


@dataclass
class EquilibriumResult:
    K: Region
    U: Region | None
    points: np.ndarray
    values: np.ndarray
    method: str = "sparse"

    @property
    def capacity(self) -> float:
        return float(self.values.sum())

    @property
    def e(self) -> dict:
        return {tuple(p): float(v) for p, v in zip(self.points.tolist(), self.values)}

    def __call__(self, x) -> float:
        return self.e.get(tuple(x), 0.0)


def _box_params(U: Region):
    g = U.geometry
    if g.is_cylinder or U.box is None:
        return None
    return np.asarray(U.box[0], dtype=np.int64), int(U.box[1])


def box_green(center, R: int, D: int, sources: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """g_U(s, t) for U = B(center, R) in Z^D via DST-I; shape (len(sources), len(targets))."""
    n = 2 * R + 1
    theta = np.pi * np.arange(1, n + 1) / (n + 1)
    c = np.cos(theta)
    lam = np.zeros((n,) * D)
    for i in range(D):
        sh = [1] * D
        sh[i] = n
        lam = lam + c.reshape(sh)
    inv = 1.0 / (1.0 - lam / D)
    sources = np.asarray(sources, dtype=np.int64) - center + R
    targets = np.asarray(targets, dtype=np.int64) - center + R
    out = np.empty((len(sources), len(targets)))
    tidx = tuple(targets.T)
    for k, s in enumerate(sources):
        delta = np.zeros((n,) * D)
        delta[tuple(s)] = 1.0
        field = fft.idstn(fft.dstn(delta, type=1) * inv, type=1)
        out[k] = field[tidx]
    return out


def _green_on(U: Region, P: np.ndarray, Q: np.ndarray, method: str) -> np.ndarray:
    """g_U(P, Q) with the chosen structured engine."""
    g = U.geometry
    if method == "box":
        c, R = _box_params(U)
        # g is symmetric; transform from the smaller side
        if len(Q) <= len(P):
            return box_green(c, R, g.dim, Q, P).T
        return box_green(c, R, g.dim, P, Q)
    if method == "slab":
        lo, hi = U.slab
        return slab_green(g.N, g.d, lo, hi, P, Q)
    raise ValueError(method)


def _pick_method(U: Region, method: str) -> str:
    if method != "auto":
        return method
    if len(U) <= 3000:
        return "sparse"
    if _box_params(U) is not None:
        return "box"
    if U.slab is not None and U.geometry.is_cylinder:
        return "slab"
    return "sparse"


def _check_subset(K: Region, U: Region):
    if not K.issubset(U):
        raise ValueError("K is not contained in U")


def equilibrium(K: Region, U: Region, method: str = "auto") -> EquilibriumResult:
    """e_{K,U}(x) = P_x[return to K after time 0 happens after exiting U]."""
    _check_subset(K, U)
    if len(K) == 0:
        return EquilibriumResult(K, U, np.zeros((0, U.geometry.dim), dtype=np.int64), np.zeros(0), "trivial")
    method = _pick_method(U, method)
    _, inner = boundaries(K)
    if method != "sparse":
        pts = inner.array
        G = _green_on(U, pts, pts, method)
        vals = np.linalg.solve(G, np.ones(len(pts)))
        return EquilibriumResult(K, U, pts, vals, method)
    h, rest = _absorption(U, K)
    pts = inner.array
    tgt = _step_targets(inner)
    D = U.geometry.dim
    flat = tgt.reshape(-1, D)
    inK = _lookup(K, flat) >= 0
    j = _lookup(rest, flat) if len(rest) else np.full(len(flat), -1)
    hval = np.where(inK, 1.0, 0.0)
    m = j >= 0
    hval[m] = h[j[m]]
    vals = (1.0 - hval).reshape(len(pts), 2 * D).sum(axis=1) / (2 * D)
    return EquilibriumResult(K, U, pts, vals, "sparse")


def _absorption(U: Region, K: Region):
    """h(y) = P_y[H_K < T_U] on U \\ K (sparse LU)."""
    rest = U.difference(K)
    if len(rest) == 0:
        return np.zeros(0), rest
    D = U.geometry.dim
    P = transition_matrix(rest)
    tgt = _step_targets(rest).reshape(-1, D)
    inK = (_lookup(K, tgt) >= 0).reshape(len(rest), 2 * D)
    b = inK.sum(axis=1) / (2 * D)
    A = (sp.identity(len(rest), format="csc") - P.tocsc()).tocsc()
    h = spla.splu(A).solve(b)
    return h, rest


@dataclass
class HitProbability:
    value: float
    direct: float
    lower: float
    upper: float

    @property
    def discrepancy(self) -> float:
        return abs(self.value - self.direct)


def hit_prob(x, K: Region, U: Region, solve: KilledWalkSolve | None = None) -> HitProbability:
    """P_x[H_K < T_U] by the last-exit sum and by a direct absorbing solve.

    Also returns the sandwich bounds built from sums of g_U over K.
    """
    _check_subset(K, U)
    x = U.geometry.normalize(x)
    if solve is None:
        solve = solve_killed(U)
    if x not in U:
        return HitProbability(0.0, 0.0, 0.0, 0.0)
    eq = equilibrium(K, U, method="sparse")
    Kidx = _lookup(U, K.array)
    ix = U.index[x]
    G = solve.green_block(K.array)  # columns g_U(., k), k in K
    row = G[ix]  # g_U(x, k) by symmetry
    value = float(row[_lookup(K, eq.points)] @ eq.values) if len(eq.points) else 0.0
    if x in K:
        direct = 1.0
    else:
        h, rest = _absorption(U, K)
        direct = float(h[rest.index[x]])
    sums = G[Kidx].sum(axis=1)  # sum_{x' in K} g_U(y, x') for y in K
    total = float(row.sum())
    lower = total / float(sums.max()) if len(sums) else 0.0
    upper = total / float(sums.min()) if len(sums) else 0.0
    return HitProbability(value, direct, lower, upper)


@dataclass
class HittingLaw:
    """Law of X_{H_K} on {H_K < T_U} plus the exit mass P[T_U < H_K]."""

    points: np.ndarray
    probs: np.ndarray
    exit: float

    @property
    def total(self) -> float:
        return float(self.probs.sum() + self.exit)

    def as_dict(self) -> dict:
        d = {tuple(p): float(v) for p, v in zip(self.points.tolist(), self.probs)}
        d["exit"] = float(self.exit)
        return d


def hitting_law_matrix(starts: np.ndarray, K: Region, U: Region, method: str = "auto"):
    """Hitting laws of K from many starts.

    Returns (points of K, matrix [n_starts, |K|], exit masses).  For starts
    outside K the law is carried by the inner boundary of K.
    """
    _check_subset(K, U)
    g = U.geometry
    starts = g.normalize_array(np.atleast_2d(starts))
    pts = K.array
    n = len(starts)
    probs = np.zeros((n, len(pts)))
    in_U = _lookup(U, starts) >= 0
    kidx = _lookup(K, starts)
    hit0 = np.flatnonzero(kidx >= 0)
    probs[hit0, kidx[hit0]] = 1.0
    todo = np.flatnonzero(in_U & (kidx < 0))
    if len(todo) and len(pts):
        _, inner = boundaries(K)
        ipts = inner.array
        icol = _lookup(K, ipts)
        method = _pick_method(U, method)
        if method == "sparse":
            rest = U.difference(K)
            D = g.dim
            P = transition_matrix(rest)
            A = (sp.identity(len(rest), format="csc") - P.tocsc()).tocsc()
            tgt = _step_targets(rest).reshape(-1, D)
            col = _lookup(inner, tgt)
            row = np.repeat(np.arange(len(rest)), 2 * D)
            m = col >= 0
            B = sp.coo_matrix((np.full(m.sum(), 1.0 / (2 * D)), (row[m], col[m])), shape=(len(rest), len(ipts)))
            H = spla.splu(A).solve(B.toarray())
            probs[np.ix_(todo, icol)] = H[_lookup(rest, starts[todo])]
        else:
            Gxp = _green_on(U, starts[todo], ipts, method)
            Gpp = _green_on(U, ipts, ipts, method)
            probs[np.ix_(todo, icol)] = np.linalg.solve(Gpp, Gxp.T).T
    exit_mass = 1.0 - probs.sum(axis=1)
    exit_mass[~in_U] = 1.0
    return pts, probs, exit_mass


def hitting_law(x, K: Region, U: Region, method: str = "auto") -> HittingLaw:
    pts, probs, ex = hitting_law_matrix(np.asarray([x]), K, U, method)
    return HittingLaw(pts, probs[0], float(ex[0]))


@dataclass
class WholeSpaceResult:
    K: Region
    radii: list
    capacities: list
    points: np.ndarray
    values: np.ndarray
    error: float
    certified_error: float | None
    extrapolated: float

    @property
    def capacity(self) -> float:
        return float(self.values.sum())

    @property
    def e(self) -> dict:
        return {tuple(p): float(v) for p, v in zip(self.points.tolist(), self.values)}


def _hit_from(K: Region, R: int, starts: np.ndarray) -> np.ndarray:
    """P_x[H_K < T_{B(0,R)}] for x in ``starts`` (box engine)."""
    D = K.geometry.dim
    c = np.zeros(D, dtype=np.int64)
    _, inner = boundaries(K)
    pts = inner.array
    Gpp = box_green(c, R, D, pts, pts)
    e = np.linalg.solve(Gpp, np.ones(len(pts)))
    Gsp = box_green(c, R, D, pts, starts)  # g(p, s) = g(s, p)
    return Gsp.T @ e


def whole_space(K: Region, radii, method: str = "box") -> WholeSpaceResult:
    """Equilibrium measure of K in Z^D as a limit of windows B(0, R).

    The reported ``error`` is cap_R(K) * max over the outer boundary of
    B(0, R) of P_x[H_K < T_{B(0, 2R)}].  When D >= 3 a certified bound from
    the lattice Green function upper sandwich is also attached.
    """
    g = K.geometry
    if g.is_cylinder:
        raise ValueError("whole_space works on the lattice")
    radii = sorted(int(r) for r in radii)
    kmax = int(np.abs(K.array).max()) if len(K) else 0
    if radii[0] <= kmax:
        raise ValueError("smallest radius does not contain K")
    D = g.dim
    caps = []
    eq = None
    for R in radii:
        U = make_box((0,) * D, R, g)
        eq = equilibrium(K, U, method=method if len(U) > 3000 else "sparse")
        caps.append(eq.capacity)
    R = radii[-1]
    sphere = outer_boundary(make_box((0,) * D, R, g)).array
    hit = _hit_from(K, 2 * R, sphere)
    err = caps[-1] * float(hit.max())
    cert = None
    if D >= 3:
        _, inner = boundaries(K)
        Ki = inner.array
        Gkk = green_matrix(Ki, Ki)
        denom = float(Gkk.sum(axis=1).min())
        upper = float(green_matrix(sphere, Ki).sum(axis=1).max()) / denom
        cert = caps[-1] * upper
    inv = 1.0 / np.asarray(radii, dtype=float)
    if len(radii) >= 3:
        X = np.stack([np.ones_like(inv), inv, inv**2], axis=1)
        coef = np.linalg.lstsq(X, np.asarray(caps), rcond=None)[0]
        extrap = float(coef[0])
    elif len(radii) == 2:
        extrap = float((caps[1] * radii[1] - caps[0] * radii[0]) / (radii[1] - radii[0]))
    else:
        extrap = caps[0]
    return WholeSpaceResult(K, radii, caps, eq.points, eq.values, err, cert, extrap)


def whole_space_exact(K: Region) -> EquilibriumResult:
    """e_K on Z^D (D >= 3) from the lattice Green function restricted to K.

    For x in K, P_x[H_K < inf] = 1 = sum_y G(x, y) e_K(y) with e_K carried by
    the inner boundary, so e_K solves one symmetric positive system.
    """
    g = K.geometry
    if g.is_cylinder or g.dim < 3:
        raise ValueError("needs the lattice Z^D with D >= 3")
    _, inner = boundaries(K)
    pts = inner.array
    vals = np.linalg.solve(green_matrix(pts, pts), np.ones(len(pts)))
    return EquilibriumResult(K, None, pts, vals, "lattice-green")


def hit_prob_exact(starts: np.ndarray, K: Region, eq: EquilibriumResult | None = None) -> np.ndarray:
    """P_x[H_K < inf] on Z^D from the last-exit decomposition."""
    if eq is None:
        eq = whole_space_exact(K)
    return green_matrix(np.atleast_2d(starts), eq.points) @ eq.values


def exact_error_bound(eq: EquilibriumResult) -> float:
    """Propagated quadrature error on capacities from ``whole_space_exact``."""
    n = len(eq.points)
    return green_error_bound() * n * float(np.abs(eq.values).sum()) * 10


def dump_csv(path, solve: KilledWalkSolve, equilibrium: EquilibriumResult | None = None):
    """Write Green-matrix entries (and optionally e) as CSV rows."""
    U = solve.region
    D = U.geometry.dim
    G = solve.green
    pts = U.array
    xs = [f"x{i + 1}" for i in range(D)]
    ys = [f"xp{i + 1}" for i in range(D)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity"] + xs + ys + ["value"])
        for i, p in enumerate(pts.tolist()):
            for j, q in enumerate(pts.tolist()):
                w.writerow(["green"] + p + q + [repr(float(G[i, j]))])
        if equilibrium is not None:
            for p, v in zip(equilibrium.points.tolist(), equilibrium.values):
                w.writerow(["equilibrium"] + p + p + [repr(float(v))])
