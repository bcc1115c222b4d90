"""Random interlacements seen from a finite set of Z^3.

Run: python3 demos/interlacements.py
"""
import math

import numpy as np

from cylwalk import interlace as il
from cylwalk.lattice import Geometry, Region, make_box
from cylwalk.potential import whole_space_exact

rng = np.random.default_rng(7)
g = Geometry.lattice(3)
K = make_box((0, 0, 0), 2, g)
origin = Region.from_points([(0, 0, 0)], g)

# A sample at level u is a Poisson(u cap(K)) number of walks launched from
# the normalized equilibrium measure of K. Walks that step out of the
# observation box re-enter it through the exact re-entry law, so the trace on
# the box carries no truncation error.
cloud = il.sample_cloud(K, 1.0, rng)
print(f"cap(B(0,2)) = {cloud.capacity:.4f}, trajectories at u=1: {len(cloud.trajectories)}")
print("points of B(0,2) visited:", len(il.trace(cloud, K)), "of", len(K))

# Labels give the superposition coupling: the trajectories with label <= u'
# form a sample at level u', so traces grow with the level.
sizes = [len(il.trace(cloud.at_level(u), K)) for u in (0.25, 0.5, 0.75, 1.0)]
print("trace sizes along the coupling:", sizes)

# Restriction property: the cloud launched from K, seen from {0}, must have
# the void probability of a cloud launched from {0}.
cap0 = whole_space_exact(origin).capacity
rep = il.vacant_check(origin, K, 1.0, 20000, rng)
print(f"P[0 vacant] = {rep.frequency:.4f} +- {rep.stderr:.4f}, exp(-cap) = {math.exp(-cap0):.4f}")

# Truncating walks at a kill radius leaks probability; the bound falls
# with the radius.
for R in (6, 10, 15):
    print(f"leakage bound at R_kill={R}: {il.leakage_bound(K, R):.3f}")

# At small u, the trace restricted to a coordinate plane rarely holds a long
# *-path.
tab = il.planar_star_decay(0.05, (1, 3, 6), 2000, rng)
for L, p, s in zip(tab.Ls, tab.p_hat, tab.stderr):
    print(f"P[*-path 0 -> S(0,{L})] = {p:.4f} +- {s:.4f}")
