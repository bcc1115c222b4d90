"""Disconnection of the cylinder and the local-time functional behind it.

Run: python3 demos/disconnection.py
"""
import numpy as np

from cylwalk import disconnect as dc
from cylwalk.lattice import h_scale

rng = np.random.default_rng(3)

# The walk on (Z/NZ)^2 x Z runs until its trace separates the top of the
# cylinder from the bottom. A planar *-path in the trace certifies the cut.
res = dc.disconnection_time(4, 2, rng)
print(f"N=4: T_N = {res.T_N}, T_N / N^4 = {res.T_N / 4**4:.3f}, trace size {res.trace_size}")

# T_N lives on the scale N^{2d}: medians of T_N / N^4 stay within a small
# factor as N grows.
rep = dc.tightness_report((4, 6), 30, rng)
print("medians of T_N/N^4:", {N: round(m, 3) for N, m in rep.medians.items()})

# The height process makes a vertical move with probability 1/3. From 0 it
# returns before leaving (-h, h) with probability exactly 1 - 1/h, so the
# number of visits to 0 is geometric.
h = h_scale(10)
print(f"h_10 = {h}: return probability {dc.return_probability(h):.12f} vs 1 - 1/h = {1 - 1 / h:.12f}")
vis = dc.geometric_visits(10, 2000, rng)
print(f"mean visits {vis.mean:.1f} +- {vis.stderr:.1f} (geometric mean {h}), chi-square p = {vis.pvalue:.3f}")

# zeta(u) is the first time the local-time profile of Brownian motion reaches
# u somewhere. Its Laplace transform has a closed Bessel form; the random-walk
# estimate converges to it slowly in the grid size n.
chk = dc.zeta_laplace_check(1.0, 1.0, 20000, 2000, rng)
print(f"E exp(-zeta(1)/2): closed {chk.closed:.4f}, grid n {chk.mc:.4f}, "
      f"grid 16n {chk.mc_fine:.4f}, extrapolated {chk.corrected:.4f} +- {chk.corrected_se:.4f}")

# Departure times D_K, rescaled by N^4, approach (d+1) zeta(alpha).
for N in (6, 8):
    s = dc.dk_scaling(N, 2, 5.0, 60, rng, ref_reps=300, ref_n=10**5)
    print(f"N={N}, K={s.sample.K}: median D_K/N^4 = {np.median(s.sample.values):.2f}, "
          f"reference {np.median(s.reference):.2f}, KS {s.ks:.3f}")
