"""
From Lp cell problems to the supremal density
=============================================

The p-th roots of the Lp homogenized energies increase with p and converge
to the supremal homogenized density. In 1D the Lp values have the closed
form |z| (mean a^(-p'))^(-1/p') which we use as a reference.
"""

import numpy as np

from suphom import CellGrid, Oracle1D, PeriodicDensity, lp_hom_1d_closed_form, macro_sup_limit, p_sweep, solve_sup_cell

density = PeriodicDensity.coeff_norm([1.0, 2.0])
grid = CellGrid(1, 1, 256)
oracle = Oracle1D((1.0, 2.0))
ps = (2, 4, 8, 16, 32, 64)

sup = solve_sup_cell(density, grid, 1.0).value
print(" p    value_root   closed form   gap to sup")
for est in p_sweep(density, grid, 1.0, ps):
    ref = lp_hom_1d_closed_form(oracle, 1.0, est.p)
    print(f"{est.p:3.0f}   {est.value_root:.8f}   {ref:.8f}    {sup - est.value_root:.5f}")
print(f"supremal value: {sup:.6f}")

# Macroscopically, a piecewise-affine field with slopes 0.5 and 1 on equal
# volumes: the Lp energies weight the pieces by volume, but the limit is the
# ess-sup, governed by the steeper piece only.
for weights in ((0.5, 0.5), (0.99, 0.01)):
    rep = macro_sup_limit(density, grid, [(0.5, weights[0]), (1.0, weights[1])], ps)
    print(f"\nvolume fractions {weights}: target {rep.target:.5f}")
    print("  curve:", np.round(rep.curve, 5))
    print(f"  gap at p={ps[-1]}: {rep.terminal_gap:.4f}, two-point extrapolation in 1/p: {rep.extrapolated:.5f}")

# The approach is slow: at finite p the curve carries the factor w^(1/p) of
# the dominant piece, so a small volume fraction shows up as a large gap.
