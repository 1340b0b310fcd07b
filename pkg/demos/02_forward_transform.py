"""
Jost functions and the forward transform
========================================

Solves for the Jost function at a point inside a strip, compares the two
boundary-limit routes on a contour, then computes the spectral data on the
contours |n| <= 3 and prints its decay and a measured conjugation symmetry.
"""

import math

import numpy as np

import kpist

grid = kpist.make_grid(math.pi, 32, 256, 12.0)
u0 = kpist.reference_potential(grid, 0.02)

sol = kpist.solve_jost(u0, 0.25 + 0.5j)
est = ", ".join(f"{r:.2e}" for r in sol.contraction_estimates[:4])
print(f"strip solve: {sol.iterations} iterations, residual {sol.residual:.1e}, contraction {est}")
print("max |mu - 1| =", np.abs(sol.mu.values - 1).max())

# One-sided limit on the n = 1 contour computed two independent ways
cmp = kpist.compare_boundary_methods(u0, 1, +1, 0.5)
print(f"offset vs halfplane on n = 1, tau = 0.5: {cmp.difference:.2e} (agree: {cmp.agree})")

contours = kpist.make_contours(grid, 3)
F = kpist.forward_transform(u0, contours)
for n in contours.ns:
    print(f"n = {n:+d}: sup |F| = {np.abs(F.row(n)).max():.3e}")

decay = kpist.decay_report(F)
print(f"Lambda norm {decay.lambda_norm:.3f}, forward margin {decay.forward_margin:.3f}")

# Conjugation symmetry F(-n, -xi) against -conj F(n, xi); measured, not imposed
xi = grid.xi
inner = np.abs(xi) < np.abs(xi).max()  # the Nyquist frequency has no partner
mirror = [grid.xi_index(-x) for x in xi[inner]]
for n in (1, 2):
    a = F.row(-n)[mirror]
    b = -np.conj(F.row(n)[inner])
    print(f"n = {n}: symmetry defect {np.abs(a - b).max() / np.abs(b).max():.1e} (relative)")
