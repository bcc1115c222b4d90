"""Green functions, equilibrium measures and capacities of the killed walk.

Run: python3 demos/potential_theory.py
"""
import numpy as np

from cylwalk.lattice import Geometry, Region, make_box, standard_regions
from cylwalk.potential import equilibrium, hit_prob, solve_killed, whole_space, whole_space_exact

# A single point in the segment {-2, ..., 2}: the walk is killed at +-3 and
# returns to 0 before that with probability 2/3, so g(0, 0) = 3 and
# cap({0}) = 1/3.
line = Geometry.lattice(1)
U = make_box((0,), 2, line)
S = solve_killed(U)
print("segment g(0,0) =", S.green_entry((0,), (0,)))
print("segment cap({0}) =", equilibrium(Region.from_points([(0,)], line), U).capacity)

# Hitting probabilities come out of two routes: the last-exit decomposition
# through the Green function and a direct linear solve. They agree to
# rounding, and the sandwich bounds bracket both.
g3 = Geometry.lattice(3)
U = make_box((0, 0, 0), 4, g3)
K = make_box((0, 0, 0), 1, g3)
hp = hit_prob((3, 0, 0), K, U)
print(f"P[hit K before leaving U] = {hp.value:.12f} (direct {hp.direct:.12f}), "
      f"bounds [{hp.lower:.4f}, {hp.upper:.4f}]")

# In Z^3 the capacity of a point is 1/G(0) with Watson's constant.
# Growing windows converge from above; the lattice Green function gives the
# limit directly.
pt = Region.from_points([(0, 0, 0)], g3)
ws = whole_space(pt, (5, 10, 20, 40))
for R, c in zip(ws.radii, ws.capacities):
    print(f"  cap_B(0,{R})({{0}}) = {c:.6f}")
print(f"window error estimate {ws.error:.2e}, certified {ws.certified_error:.2e}")
print("cap({0}) from the lattice Green function:", whole_space_exact(pt).capacity)

# On the cylinder the slabs B and B~ around height 0 set the scale of
# everything that follows; C~ and the strip are small lattice boxes used
# by the truncation step.
regs = standard_regions(Geometry.cylinder(2, 4))
for name, R in regs.items():
    print(f"{name:8s} {len(R):6d} vertices")
cap_K = equilibrium(Region.from_points([(0, 0, 0)], Geometry.cylinder(2, 4)), regs["B_tilde"]).capacity
print("cap relative to B~ of a point, N=4:", np.round(cap_K, 6))
