"""
The cylinder grid and the small-data check
==========================================

Builds the default grid, samples the reference potential and reports the
quantities that decide whether the Jost iteration is a contraction.
"""

import math

import numpy as np

import kpist

grid = kpist.make_grid(math.pi, 32, 256, 12.0)
print(grid)
print("omega =", grid.omega, " dy =", grid.dy)

# Zero-mass reference potential: 0.02 cos(x) exp(-y^2)
u0 = kpist.reference_potential(grid, 0.02)
print("row means vanish:", np.abs(u0.values.mean(axis=0)).max())

# Transform to the centred (m, xi) layout and back
coeffs = kpist.analyze(u0)
back = kpist.synthesize(coeffs)
print("analyze/synthesize round trip:", np.abs(back.values - u0.values).max())

# The only nonzero x-modes are m = +-1
energy = (np.abs(coeffs.values) ** 2).sum(axis=1)
print("modes carrying energy:", [int(m) for m in grid.modes[energy > 1e-20 * energy.max()]])

report = kpist.smallness_report(u0)
print(f"lemma constant C = {report.C:.5f}, 2 pi / C = {2 * math.pi / report.C:.6f}")
print(f"max(omega |u|_1, sqrt(omega) |u|_2) = {report.trinorm:.5f}")
print(f"smallness ratio = {report.ratio:.5f}  (contraction when < 1: {report.ok})")

# A ten times larger amplitude leaves the small-data region
print("ratio at amplitude 0.2:", round(kpist.smallness_report(kpist.reference_potential(grid, 0.2)).ratio, 3))
