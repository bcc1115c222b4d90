"""Geometry of the discrete cylinder (Z/NZ)^d x Z and of the lattice Z^D.

Points are tuples of ints.  On the cylinder the first d coordinates are
torus coordinates reduced to [0, N) and the last one is the height.
Regions are immutable finite vertex sets; boxes and slabs additionally keep
a descriptor so that membership tests on arrays of points are vectorized.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

Point = tuple


def r_scale(N: int) -> int:
    """Inner vertical scale r_N = N."""
    return int(N)


def h_scale(N: int) -> int:
    """Outer vertical scale h_N = [N (2 + (log N)^2)]."""
    return int(math.floor(N * (2.0 + math.log(N) ** 2)))


@dataclass(frozen=True)
class Geometry:
    """Either the cylinder (Z/NZ)^d x Z or the lattice Z^dim.

    For the lattice ``d`` is stored as ``dim - 1`` so that ``dim == d + 1``
    holds in both cases.
    """

    kind: str
    d: int
    N: int | None = None

    def __post_init__(self):
        if self.kind == "cylinder":
            if self.d < 2:
                raise ValueError("cylinder needs d >= 2")
            if self.N is None or self.N < 2:
                raise ValueError("cylinder needs N >= 2")
        elif self.kind == "lattice":
            if self.d < 0:
                raise ValueError("lattice needs dim >= 1")
            if self.N is not None:
                raise ValueError("lattice geometry takes no side length")
        else:
            raise ValueError(f"unknown geometry kind {self.kind!r}")

    @classmethod
    def cylinder(cls, d: int, N: int) -> "Geometry":
        return cls("cylinder", int(d), int(N))

    @classmethod
    def lattice(cls, dim: int) -> "Geometry":
        return cls("lattice", int(dim) - 1, None)

    @property
    def dim(self) -> int:
        return self.d + 1

    @property
    def is_cylinder(self) -> bool:
        return self.kind == "cylinder"

    @property
    def n_torus(self) -> int:
        """Number of wrapped coordinates."""
        return self.d if self.is_cylinder else 0

    def normalize(self, p: Sequence[int]) -> Point:
        p = tuple(int(c) for c in p)
        if len(p) != self.dim:
            raise ValueError(f"point {p} has wrong dimension for {self}")
        if self.is_cylinder:
            N = self.N
            p = tuple(c % N for c in p[: self.d]) + (p[-1],)
        return p

    def normalize_array(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.int64)
        if self.is_cylinder:
            pts = pts.copy()
            pts[..., : self.d] %= self.N
        return pts

    def unit_steps(self) -> np.ndarray:
        """The 2*dim unit vectors +e_1, -e_1, +e_2, ... as rows."""
        D = self.dim
        steps = np.zeros((2 * D, D), dtype=np.int64)
        for i in range(D):
            steps[2 * i, i] = 1
            steps[2 * i + 1, i] = -1
        return steps

    def displacement(self, p: Sequence[int], q: Sequence[int]) -> tuple:
        """q - p with torus coordinates reduced to (-N/2, N/2]."""
        diff = [int(b) - int(a) for a, b in zip(p, q)]
        if self.is_cylinder:
            diff[: self.d] = [torus_rep(c, self.N) for c in diff[: self.d]]
        return tuple(diff)

    def sup_distance(self, p: Sequence[int], q: Sequence[int]) -> int:
        return max(abs(c) for c in self.displacement(p, q))


def torus_rep(c: int, N: int) -> int:
    """Representative of c mod N in (-N/2, N/2]."""
    c = c % N
    return c - N if c > N // 2 else c


def neighbors(p: Sequence[int], g: Geometry) -> list:
    """Nearest neighbours of p; duplicates from the N=2 wrap are collapsed."""
    p = g.normalize(p)
    out = []
    seen = set()
    for step in g.unit_steps():
        q = g.normalize(np.add(p, step))
        if q not in seen:
            seen.add(q)
            out.append(q)
    return out


def star_offsets(dim: int) -> list:
    return [o for o in itertools.product((-1, 0, 1), repeat=dim) if any(o)]


def star_neighbors(p: Sequence[int], g: Geometry) -> list:
    """Points at sup-distance 1 from p (after torus collapse)."""
    p = g.normalize(p)
    out = []
    seen = set()
    for o in star_offsets(g.dim):
        q = g.normalize(np.add(p, o))
        if q != p and q not in seen:
            seen.add(q)
            out.append(q)
    return out


@dataclass(frozen=True, eq=False)
class Region:
    """Finite set of vertices of a geometry.

    ``box`` is ``(center, radius)`` for sup-norm balls and ``slab`` is
    ``(lo, hi)`` for full torus slabs T x [lo, hi]; either enables cheap
    vectorized membership.
    """

    geometry: Geometry
    vertices: frozenset
    box: tuple | None = None
    slab: tuple | None = None
    _hash: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.geometry, self.vertices)))

    @classmethod
    def from_points(cls, points: Iterable, g: Geometry) -> "Region":
        return cls(g, frozenset(g.normalize(p) for p in points))

    def __contains__(self, p) -> bool:
        return tuple(p) in self.vertices

    def __len__(self) -> int:
        return len(self.vertices)

    def __iter__(self):
        return iter(self.sorted_points())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Region)
            and self.geometry == other.geometry
            and self.vertices == other.vertices
        )

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Region({self.geometry.kind}, |U|={len(self)})"

    def sorted_points(self) -> list:
        return sorted(self.vertices)

    @cached_property
    def array(self) -> np.ndarray:
        """Points as an (n, dim) int64 array in lexicographic order."""
        if not self.vertices:
            return np.zeros((0, self.geometry.dim), dtype=np.int64)
        return np.array(self.sorted_points(), dtype=np.int64)

    @cached_property
    def index(self) -> dict:
        """Map point -> row of ``array``."""
        return {tuple(p): i for i, p in enumerate(self.array.tolist())}

    @cached_property
    def _keys(self) -> tuple:
        arr = self.array
        if len(arr) == 0:
            return None, None, np.zeros(0, dtype=np.int64)
        lo = arr.min(axis=0)
        shape = arr.max(axis=0) - lo + 1
        keys = np.ravel_multi_index((arr - lo).T, shape)
        return lo, shape, keys

    def contains_array(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (m, dim) array of normalized points."""
        pts = np.asarray(pts, dtype=np.int64)
        g = self.geometry
        if self.box is not None:
            c, r = self.box
            disp = pts - np.asarray(c)
            if g.is_cylinder:
                N = g.N
                t = disp[:, : g.d] % N
                disp = disp.copy()
                disp[:, : g.d] = np.where(t > N // 2, t - N, t)
            return np.abs(disp).max(axis=1) <= r
        if self.slab is not None:
            lo, hi = self.slab
            return (pts[:, -1] >= lo) & (pts[:, -1] <= hi)
        lo, shape, keys = self._keys
        if lo is None:
            return np.zeros(len(pts), dtype=bool)
        rel = pts - lo
        ok = np.all((rel >= 0) & (rel < shape), axis=1)
        out = np.zeros(len(pts), dtype=bool)
        if ok.any():
            k = np.ravel_multi_index(rel[ok].T, shape)
            pos = np.searchsorted(keys, k)
            pos = np.minimum(pos, len(keys) - 1)
            out[ok] = keys[pos] == k
        return out

    def union(self, other: "Region") -> "Region":
        return Region(self.geometry, self.vertices | other.vertices)

    def intersection(self, other: "Region") -> "Region":
        return Region(self.geometry, self.vertices & other.vertices)

    def difference(self, other: "Region") -> "Region":
        return Region(self.geometry, self.vertices - other.vertices)

    def issubset(self, other: "Region") -> bool:
        return self.vertices <= other.vertices

    def heights(self) -> tuple:
        arr = self.array
        return int(arr[:, -1].min()), int(arr[:, -1].max())


def boundaries(U: Region) -> tuple:
    """Return (outer boundary, inner boundary) of U."""
    g = U.geometry
    outer = set()
    inner = set()
    for p in U.vertices:
        for q in neighbors(p, g):
            if q not in U.vertices:
                outer.add(q)
                inner.add(p)
    return Region(g, frozenset(outer)), Region(g, frozenset(inner))


def outer_boundary(U: Region) -> Region:
    return boundaries(U)[0]


def inner_boundary(U: Region) -> Region:
    return boundaries(U)[1]


def _check_box_radius(r: int, g: Geometry):
    if r < 0:
        raise ValueError("radius must be >= 0")
    if g.is_cylinder and 2 * r + 1 > g.N:
        raise ValueError(f"box of radius {r} wraps around a torus of side {g.N}")


def make_box(center: Sequence[int], r: int, g: Geometry) -> Region:
    """Closed sup-norm ball B(center, r)."""
    r = int(r)
    _check_box_radius(r, g)
    c = g.normalize(center)
    pts = frozenset(
        g.normalize(np.add(c, o))
        for o in itertools.product(range(-r, r + 1), repeat=g.dim)
    )
    return Region(g, pts, box=(c, r))


def make_sphere(center: Sequence[int], r: int, g: Geometry) -> Region:
    """Sup-norm sphere S(center, r)."""
    r = int(r)
    _check_box_radius(r, g)
    c = g.normalize(center)
    pts = frozenset(
        g.normalize(np.add(c, o))
        for o in itertools.product(range(-r, r + 1), repeat=g.dim)
        if max(abs(x) for x in o) == r
    )
    return Region(g, pts)


def make_slab(g: Geometry, lo: int, hi: int) -> Region:
    """Full torus slab T x [lo, hi] (closed height range)."""
    if not g.is_cylinder:
        raise ValueError("slabs are cylinder regions")
    pts = frozenset(
        tuple(y) + (z,)
        for y in itertools.product(range(g.N), repeat=g.d)
        for z in range(int(lo), int(hi) + 1)
    )
    return Region(g, pts, slab=(int(lo), int(hi)))


def strip(g: Geometry, zlo: int, zhi: int) -> Region:
    """Planar strip [-2[sqrt N], 2[sqrt N]] e_1 + Z e_{d+1}, cut to heights [zlo, zhi]."""
    w = 2 * math.isqrt(g.N)
    pts = frozenset(
        g.normalize((a,) + (0,) * (g.d - 1) + (z,))
        for a in range(-w, w + 1)
        for z in range(int(zlo), int(zhi) + 1)
    )
    return Region(g, pts)


def standard_regions(g: Geometry, z: int = 0, window: tuple | None = None) -> dict:
    """B(z), B~(z), C~ = B(0, N/4) and the planar strip.

    B(z) = T x [z - r_N, z + r_N] and B~(z) = T x (z - h_N, z + h_N).  The
    strip is cut to ``window`` (default: the heights of B~(z)).
    """
    if not g.is_cylinder:
        raise ValueError("standard regions live on the cylinder")
    r, h = r_scale(g.N), h_scale(g.N)
    if window is None:
        window = (z - h + 1, z + h - 1)
    return {
        "B": make_slab(g, z - r, z + r),
        "B_tilde": make_slab(g, z - h + 1, z + h - 1),
        "C_tilde": make_box((0,) * g.dim, g.N // 4, g),
        "strip": strip(g, *window),
    }


def embed(p: Sequence[int], window: Region) -> Point:
    """Identify a cylinder point of a small window with a point of Z^{d+1}.

    Torus coordinates are sent to their representatives in (-N/2, N/2].
    The window must be a box B(0, r) with 2r + 1 < N.
    """
    g = window.geometry
    if not g.is_cylinder:
        raise ValueError("embed maps cylinder points")
    _check_embeddable(window)
    p = g.normalize(p)
    if p not in window:
        raise ValueError(f"{p} is outside the window")
    return tuple(torus_rep(c, g.N) for c in p[: g.d]) + (p[-1],)


def unembed(q: Sequence[int], g: Geometry) -> Point:
    return g.normalize(q)


def _check_embeddable(window: Region):
    g = window.geometry
    if window.box is None:
        raise ValueError("only box windows can be embedded")
    c, r = window.box
    if any(c[: g.d]) or 2 * r + 1 >= g.N:
        raise ValueError("window too large to embed without wrap")


def embed_region(U: Region, window: Region | None = None) -> Region:
    """Embed a cylinder region lying in a centred box into Z^{d+1}."""
    g = U.geometry
    if window is None:
        window = U
    _check_embeddable(window)
    lat = Geometry.lattice(g.dim)
    pts = frozenset(embed(p, window) for p in U.vertices)
    box = None
    if U.box is not None:
        box = ((0,) * g.dim, U.box[1])
    return Region(lat, pts, box=box)


def unembed_region(U: Region, g: Geometry) -> Region:
    pts = frozenset(g.normalize(p) for p in U.vertices)
    box = None
    if U.box is not None:
        box = (g.normalize(U.box[0]), U.box[1])
    return Region(g, pts, box=box)
