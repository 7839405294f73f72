"""
Homogenizing a gradient constraint
==================================

Require |Du(x)| <= 1/a(x) pointwise with the laminate coefficient. The set of
macroscopic gradients that admit a periodic corrector is a convex body,
sampled here by its radius in each direction. It coincides with the unit
sublevel set of the homogenized supremal density of a(x)|Z|.
"""

import numpy as np

from suphom import (CellGrid, ConstraintMap, PeriodicDensity, check_midpoint_convexity, cross_check_sublevel,
                    default_directions, effective_set, validate_H3_H4)
from suphom.oracle import effective_radius_laminate_2d

density = PeriodicDensity.coeff_norm(np.array([[1.0, 1.0], [2.0, 2.0]]), n=2)
grid = CellGrid(2, 1, 32)
cmap = ConstraintMap.from_sublevel(density, 1.0)

dirs = default_directions(1, 2, 16)
eset = effective_set(cmap, grid, dirs)
print("direction        radius   oracle")
for e, t in zip(dirs, eset.radii):
    print(f"({e[0, 0]:+.3f}, {e[0, 1]:+.3f})   {t:.5f}  {effective_radius_laminate_2d([1.0, 0.5], e.ravel()):.5f}")

print("\nconvex hull vertices:", len(eset.hull_vertices()))
conv = check_midpoint_convexity(cmap, grid, eset, pairs=50, seed=1)
print(f"midpoint convexity: {50 - len(conv.failures)} of 50 midpoints feasible")

# two independent routes to the same body
rep = cross_check_sublevel(density, grid, 1.0, dirs[:4], tolerance=3e-2)
print("\nindicator route:", np.round(rep.t_indicator, 5))
print("sublevel route: ", np.round(rep.t_sublevel, 5))

# a cube of vertices inside every constraint set and a ball inside the body
verts = [[[sx * 0.3, sy * 0.3]] for sx in (-1, 1) for sy in (-1, 1)]
hyp = validate_H3_H4(cmap, grid, 0.24, verts, directions=dirs)
print(f"\nhypothesis check at delta = 0.24: {'pass' if hyp.passed else 'fail'}")
hyp = validate_H3_H4(cmap, grid, 0.26, verts, directions=dirs)
print(f"hypothesis check at delta = 0.26: {'pass' if hyp.passed else 'fail'} "
      f"({len(hyp.sphere_failures)} sphere samples outside the body)")
