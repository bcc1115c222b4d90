"""Random walk on the discrete cylinder (Z/NZ)^d x Z and random interlacements on Z^(d+1).

Exact potential theory by sparse and Fourier linear algebra, samplers for the
walk, its excursions and interlacement clouds, and seeded Monte Carlo checks
of the comparison between the two.
"""
from .lattice import (
    Geometry,
    Region,
    boundaries,
    embed,
    embed_region,
    h_scale,
    make_box,
    make_slab,
    make_sphere,
    neighbors,
    r_scale,
    standard_regions,
    star_neighbors,
)
from .potential import (
    equilibrium,
    hit_prob,
    hitting_law,
    solve_killed,
    whole_space,
    whole_space_exact,
)
from .rng import RngStream
from .walk import excursion_times, excursions, run_until, vertical_skeleton

__version__ = "0.1.0"

__all__ = [
    "Geometry", "Region", "RngStream", "boundaries", "embed", "embed_region", "equilibrium",
    "excursion_times", "excursions", "h_scale", "hit_prob", "hitting_law", "make_box", "make_slab",
    "make_sphere", "neighbors", "r_scale", "run_until", "solve_killed", "standard_regions",
    "star_neighbors", "vertical_skeleton", "whole_space", "whole_space_exact",
]
