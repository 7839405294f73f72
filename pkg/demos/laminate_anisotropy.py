"""
Anisotropy of a laminate
========================

Layers a(x1) in {1, 2} stacked along x1. Gradients parallel to the layering
direction can redistribute slope between layers, gradients along the layers
cannot: the worst layer governs.
"""

import numpy as np

from suphom import CellGrid, PeriodicDensity, solve_sup_cell, sup_hom_laminate_2d

density = PeriodicDensity.coeff_norm(np.array([[1.0, 1.0], [2.0, 2.0]]), n=2)
grid = CellGrid(2, 1, 32)

print("angle    solver    oracle")
for angle in np.linspace(0, np.pi / 2, 7):
    z = np.array([np.cos(angle), np.sin(angle)])
    est = solve_sup_cell(density, grid, z[None])
    print(f"{np.degrees(angle):5.1f}   {est.value:.5f}   {sup_hom_laminate_2d([1, 2], z):.5f}")

# the same geometry with the nonconvex but level-convex profile psi
psi_density = PeriodicDensity.coeff_psi(np.array([[1.0, 1.0], [2.0, 2.0]]), n=2)
for z in ((2.0, 0.0), (0.0, 2.0)):
    est = solve_sup_cell(psi_density, grid, [z])
    ref = sup_hom_laminate_2d([1, 2], z, form="coeff_psi")
    print(f"psi profile, Z = {z}: solver {est.value:.5f}, oracle {ref:.5f}")
