"""
Two projection methods near the boundary
========================================

Close to the boundary of the effective set the affine space of periodic
gradients and the product of pointwise constraints meet almost tangentially.
Alternating projections then crawl, while Douglas-Rachford splitting decides
both feasible and infeasible probes in a few dozen steps.
"""

import numpy as np

from suphom import CellGrid, ConstraintMap, FeasibilityOptions, indicator_feasible
from suphom.oracle import effective_radius_laminate_2d

grid = CellGrid(2, 1, 32)
cmap = ConstraintMap.balls(np.array([[1.0, 1.0], [0.5, 0.5]]), n=2)
e = np.array([[0.634, 0.773]])
e /= np.linalg.norm(e)
t_star = effective_radius_laminate_2d([1.0, 0.5], e.ravel())

print("offset from boundary   douglas_rachford        alternating")
for dt in (-1e-2, -1e-3, 1e-3, 1e-2):
    row = []
    for method in ("douglas_rachford", "alternating"):
        opts = FeasibilityOptions(method=method, max_iter=3000)
        res = indicator_feasible(cmap, grid, (t_star + dt) * e, opts)
        row.append(f"{res.status:>10s} {res.iterations:5d}")
    print(f"{dt:+.0e}                {row[0]}      {row[1]}")
