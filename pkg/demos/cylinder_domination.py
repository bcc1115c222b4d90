"""From the cylinder walk near height 0 to an interlacement.

Run: python3 demos/cylinder_domination.py
"""

import numpy as np

from cylwalk import domination as dm
from cylwalk.lattice import Region

rng = np.random.default_rng(11)

# Scales: r_N = N and h_N = floor(N (2 + log^2 N)). The walk is observed in
# excursions from the slab B = T x [-r, r] out of B~ = T x (-h, h).
params = dm.DominationParams(2, 6, 1.0, 3.5)
print(f"N={params.N}: r={params.r}, h={params.h}, K={params.K}")

# Started from q (uniform on T x {+-r}), the hitting law of a set K_set is
# (d+1)(h-r)/N^d times its equilibrium measure relative to B~. Both sides
# come from independent linear solves.
K_set = Region.from_points([(0, 0, 0), (1, 0, 0), (0, 0, 1)], params.geometry)
res = dm.key_identity(K_set, params)
print(f"hitting law vs scaled equilibrium: residual {res.residual:.1e}, factor {res.factor:.4f}")

# After returning to B from height h, the torus position is close to uniform.
# The sup total-variation distance shrinks quickly with N.
for N in (4, 6):
    tv = dm.homogenization_tv(dm.DominationParams(2, N, 1.0, 3.5)).sup_tv
    print(f"N={N}: sup TV of the return position = {tv:.3e}")

# Exit signs form a two-state chain that keeps its sign with probability
# p = (h + r) / 2h. Pairs of consecutive signs satisfy an exact tail bound.
tc = dm.type_chain(dm.DominationParams(2, 10, 1.0, 3.5), exact=True)
print("pair chain p =", tc.p, " stationary law", np.round(tc.stationary.astype(float), 4))
p = tc.p
for gamma in dm.PAIRS:
    c = dm.ld_check(gamma, 0.5, 12, p=p)
    print(f"  pair {gamma}: P[count >= 6 of 12] = {float(c.lhs):.3e} <= {float(c.bound):.3e} ({c.certificate})")

# The intensity comparison lambda e_{A,B~} <= v e_A, with the whole-space e_A
# from the lattice Green function.
rep = dm.intensity_domination(dm.DominationParams(2, 16, 0.05, 1.5, 0.5))
print(f"intensity comparison at N=16: {rep.status}, certified margin {rep.certified_margin:.4f}")

# Finally, the monotone statistics of the walk trace in A stay below those
# of an interlacement at level v.
exp = dm.domination_experiment(dm.DominationParams(2, 12, 1.0, 6.0, 0.5), 200, rng)
print(f"domination experiment (K={exp.K}): {exp.status}, "
      f"|trace| walk {exp.size_stat.walk:.1f} vs interlacement {exp.size_stat.interlacement:.1f}")
