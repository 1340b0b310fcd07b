"""Inverse spectral transform for the KP-II equation on the cylinder.

The package solves ``u_t + 6 u u_x + u_xxx + 3 d_x^{-1} u_yy = 0`` for data
that are periodic in ``x`` and decaying in ``y`` by a forward transform to
contour spectral data, a phase evolution of those data and an inverse
Riemann-Hilbert-type fixed point, and cross-checks the result against a
split-step pseudo-spectral integrator.
"""

from .cylinder import (
    CylinderGrid,
    Field,
    GridError,
    SpectralCoeffs,
    analyze,
    basic_lemma_constant,
    basic_lemma_report,
    convolve,
    make_grid,
    norms,
    synthesize,
    zero_mass_project,
)
from .heatjost import (
    ConvergenceError,
    JostSolution,
    SpectralPoint,
    compare_boundary_methods,
    jost_boundary,
    jost_diagnostics,
    neumann_apply,
    pz,
    smallness_report,
    solve_jost,
)
from .inverse import (
    BoundaryTraceSet,
    InverseConfig,
    apply_S,
    cauchy_sum,
    l1_diagnostic,
    reconstruct_u,
    solve_inverse,
)
from .kpsolver import (
    BlowUpError,
    PdeConfig,
    RunManifest,
    compare,
    dispersion,
    ist_solve,
    pde_solve,
    reference_potential,
)
from .spectral import (
    ContourGrid,
    SpectralData,
    decay_report,
    evolve,
    forward_transform,
    jump_residual,
    make_contours,
    r0,
    zeta,
)

__version__ = "0.1.0"
