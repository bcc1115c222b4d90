import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cylwalk.lattice import (
    Geometry, Region, boundaries, embed, embed_region, h_scale, make_box, make_slab, make_sphere,
    neighbors, r_scale, standard_regions, star_neighbors, torus_rep, unembed,
)


def test_neighbors_wrap():
    g = Geometry.cylinder(2, 5)
    nb = neighbors((0, 0, 0), g)
    assert len(nb) == 6
    assert (4, 0, 0) in nb


def test_neighbors_lattice_origin():
    g = Geometry.lattice(3)
    assert set(neighbors((0, 0, 0), g)) == {
        (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)}


def test_neighbors_n2_collapse():
    g = Geometry.cylinder(2, 2)
    nb = neighbors((0, 0, 7), g)
    # +e_1 and -e_1 both land on (1, 0, 7): kept once
    assert nb.count((1, 0, 7)) == 1
    assert len(nb) == 4


def test_star_neighbor_counts():
    assert len(star_neighbors((0, 0, 0), Geometry.lattice(3))) == 26
    assert len(star_neighbors((0, 0), Geometry.lattice(2))) == 8
    assert len(star_neighbors((0, 0, 0), Geometry.cylinder(2, 3))) == 26


def test_boundaries_single_point():
    g = Geometry.lattice(3)
    U = Region.from_points([(0, 0, 0)], g)
    outer, inner = boundaries(U)
    assert len(outer) == 6 and inner == U


def test_boundaries_box():
    g = Geometry.lattice(3)
    U = make_box((0, 0, 0), 1, g)
    assert len(U) == 27
    outer, inner = boundaries(U)
    assert len(inner) == 26 and (0, 0, 0) not in inner
    assert len(outer) == 6 * 9  # one 3x3 face per direction


def test_boundaries_full_slab():
    g = Geometry.cylinder(2, 4)
    U = make_slab(g, 0, 0)
    outer, inner = boundaries(U)
    assert inner == U
    assert outer == make_slab(g, -1, -1).union(make_slab(g, 1, 1))


def test_boxes_and_spheres():
    g = Geometry.lattice(3)
    assert make_box((0, 0, 0), 0, g).vertices == {(0, 0, 0)}
    assert len(make_sphere((0, 0, 0), 1, g)) == 26
    N, eps = 16, 0.5
    a = math.floor(N ** (1 - eps) + 1e-9)
    assert a == 4
    assert len(make_box((0, 0, 0), a, Geometry.cylinder(2, N))) == 729


def test_box_wrap_rejected():
    with pytest.raises(ValueError):
        make_box((0, 0, 0), 3, Geometry.cylinder(2, 6))


@pytest.mark.parametrize("N,h", [(4, 15), (6, 31), (8, 50), (10, 73), (12, 98), (16, 154)])
def test_vertical_scales(N, h):
    # oracle: N (2 + ln^2 N) at 40 digits
    mpmath.mp.dps = 40
    assert r_scale(N) == N
    assert h_scale(N) == h
    assert h == int(mpmath.floor(N * (2 + mpmath.log(N) ** 2)))


def test_standard_regions_heights():
    g = Geometry.cylinder(2, 10)
    regs = standard_regions(g, z=3)
    h, r = 73, 10
    lo, hi = regs["B_tilde"].heights()
    assert (lo, hi) == (3 - h + 1, 3 + h - 1)
    assert hi - lo + 1 == 2 * h - 1
    assert regs["B"].heights() == (3 - r, 3 + r)
    assert regs["C_tilde"].box[1] == 2


def test_embed_examples():
    g = Geometry.cylinder(2, 10)
    win = make_box((0, 0, 0), 4, g)
    assert embed((7, 0, 5 - 5), win) == (-3, 0, 0)
    assert embed((1, 9, 2), win) == (1, -1, 2)
    assert torus_rep(5, 10) == 5 and torus_rep(6, 10) == -4


def test_embed_window_too_large():
    g = Geometry.cylinder(2, 9)
    with pytest.raises(ValueError):
        embed((0, 0, 0), make_box((0, 0, 0), 4, g))
    with pytest.raises(ValueError):
        embed((0, 0, 0), Region(g, frozenset({(0, 0, 0)})))


def test_geometry_validation():
    with pytest.raises(ValueError):
        Geometry.cylinder(1, 5)
    with pytest.raises(ValueError):
        Geometry.cylinder(2, 1)
    assert Geometry.lattice(1).dim == 1


def test_contains_array_matches_set():
    g = Geometry.cylinder(2, 7)
    rng = np.random.default_rng(1)
    U = make_box((6, 1, 2), 2, g)
    V = Region.from_points(U.sorted_points()[::3], g)
    S = make_slab(g, -1, 2)
    pts = g.normalize_array(rng.integers(-8, 8, size=(500, 3)))
    for R in (U, V, S):
        got = R.contains_array(pts)
        want = np.array([tuple(p) in R for p in pts.tolist()])
        assert np.array_equal(got, want)


# ---------------------------------------------------------------- properties

cyl_points = st.builds(
    lambda N, a, b, z: ((a % N, b % N, z), Geometry.cylinder(2, N)),
    st.integers(3, 9), st.integers(0, 100), st.integers(0, 100), st.integers(-50, 50),
)


@given(cyl_points)
def test_adjacency_symmetric(pg):
    p, g = pg
    for q in neighbors(p, g):
        assert p in neighbors(q, g)
    for q in star_neighbors(p, g):
        assert p in star_neighbors(q, g)


@given(cyl_points)
def test_neighbor_count(pg):
    p, g = pg
    assert len(neighbors(p, g)) == 2 * g.dim


@given(st.lists(st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-3, 3)),
                min_size=1, max_size=30))
def test_boundary_relations(pts):
    g = Geometry.lattice(3)
    U = Region.from_points(pts, g)
    outer, inner = boundaries(U)
    assert inner.issubset(U)
    assert not (outer.vertices & U.vertices)
    for q in outer:
        assert any(p in U for p in neighbors(q, g))
    V = U.union(make_box((0, 0, 0), 1, g))
    # points of U's inner boundary that are still exposed in V stay in V's inner boundary
    _, inner_v = boundaries(V)
    for p in inner:
        if any(q not in V for q in neighbors(p, g)):
            assert p in inner_v


@given(st.integers(7, 15), st.data())
def test_embed_preserves_adjacency(N, data):
    g = Geometry.cylinder(2, N)
    r = (N - 2) // 2
    win = make_box((0, 0, 0), r, g)
    p = data.draw(st.sampled_from(win.sorted_points()))
    pe = embed(p, win)
    assert unembed(pe, g) == p
    assert pe[-1] == p[-1]
    for q in star_neighbors(p, g):
        if q in win:
            qe = embed(q, win)
            assert max(abs(a - b) for a, b in zip(pe, qe)) == 1
    for q in neighbors(p, g):
        if q in win:
            qe = embed(q, win)
            assert sum(abs(a - b) for a, b in zip(pe, qe)) == 1


def test_embed_region_roundtrip():
    g = Geometry.cylinder(2, 9)
    win = make_box((0, 0, 0), 3, g)
    E = embed_region(win)
    assert len(E) == len(win)
    assert E == make_box((0, 0, 0), 3, Geometry.lattice(3))
