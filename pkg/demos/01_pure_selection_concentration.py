"""
Pure selection concentrates the population onto the fittest strategy
=====================================================================

Strategies replicate themselves exactly (Dirac kernel).  Each grid cell q
carries a birth rate a(q) and a mortality 0.001 + X, so the cell with the
largest (a(q) - 0.001) wins: the smooth initial density collapses onto it
while the total mass settles at that cell's equilibrium.
"""

import numpy as np

from evomeasure import MeasureVec, bl_distance, dirac_kernel, flow, grid_1d, logistic_pair, unit_atom

space = grid_1d(0.0, 2.0, 128)
q = space.points[:, 0]

# birth ceiling with a kink at q* = 0.93: a sharp peak separates the best
# cell from its neighbours at a rate proportional to the cell size
a = 2.0 - 1.5 * np.abs(q - 0.93)
fitness = logistic_pair(space, a=a, b=1.0, floor=1e-3)
kernel = dirac_kernel(space)

# smooth positive initial density, folded into cell weights, total mass 1
density = 0.5 + np.exp(-((q - 0.7) ** 2) / (2 * 0.5**2))
u = MeasureVec(space, density * space.cell_volumes)
u = u.scaled(1.0 / u.total_mass())

best = int(np.argmax((a - 1e-3) / 1.0))
print(f"fittest cell: index {best} at q = {q[best]:.4f}, "
      f"equilibrium mass (a* - floor)/b = {a[best] - 1e-3:.4f}")

traj = flow(u, kernel, fitness, T=200.0, solver="rk4", dt=0.05)

target = unit_atom(space, best)
print(f"\n{'t':>6} {'mass share in best cell':>24} {'flat dist to atom':>18} {'total mass':>11}")
for t in (0.0, 10.0, 50.0, 100.0, 150.0, 200.0):
    k = int(np.argmin(np.abs(traj.times - t)))
    share = traj.weights[k, best] / traj.masses[k]
    dist = bl_distance(traj.state(k).normalized(), target)
    print(f"{traj.times[k]:6.0f} {share:24.4f} {dist:18.5f} {traj.masses[k]:11.5f}")

reach = traj.times[np.argmax(traj.weights[:, best] / traj.masses >= 0.95)]
print(f"\nmass share exceeds 0.95 at t = {reach:.1f}; the Dirac limit is "
      "witnessed as concentration onto one grid cell.")
