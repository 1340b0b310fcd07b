import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kpist import Field, analyze, make_grid, norms, reference_potential
from kpist.heatjost import (
    ConvergenceError,
    SpectralPoint,
    compare_boundary_methods,
    jost_boundary,
    jost_diagnostics,
    neumann_apply,
    pz,
    smallness_report,
    solve_jost,
)
from oracles import neumann_one_single_mode


def test_pz_examples():
    assert pz(1, 0, 1, 1.0) == 3
    assert pz(1, 2, 1j, 1.0) == 1 + 4j
    assert pz(2, -12, -1 + 3j, 1.0) == 0


def test_spectral_point_tags():
    p = SpectralPoint(0.7 + 1j, 1.0)
    assert p.strip_index == 1
    assert p.margin == pytest.approx(0.2)
    assert SpectralPoint(0.2j, 1.0).strip_index == 0
    c = SpectralPoint.on_contour(2, 0.5, -1, 1.0)
    assert c.z == -1 + 0.5j and c.margin == 0 and c.strip_index is None
    with pytest.raises(ValueError):
        SpectralPoint(-0.9 + 0j, 1.0, contour=2, side=1)
    with pytest.raises(ValueError):
        SpectralPoint.on_contour(0, 0.0, 1, 1.0)


# --- smallness ----------------------------------------------------------------


def test_smallness_of_zero_potential(small_grid):
    rep = smallness_report(Field(small_grid, np.zeros((32, 128))))
    assert rep.ratio == 0 and rep.ok


def test_smallness_ratio_of_reference_potential(ref_u0):
    rep = smallness_report(ref_u0)
    assert rep.C == pytest.approx(16.3744, abs=1e-4)
    # the continuum value is 0.3696; the Nx = 32 grid L1 norm of |cos x| is 0.3% low
    assert rep.ratio == pytest.approx(0.3696, rel=1e-2)
    assert rep.ok
    assert 2 * math.pi / rep.C == pytest.approx(0.383721, abs=1e-6)


def test_smallness_ratio_converges_with_x_resolution():
    g = make_grid(math.pi, 2048, 256, 12.0)
    assert smallness_report(reference_potential(g)).ratio == pytest.approx(0.3696, abs=2e-4)


def test_smallness_rejects_massive_input(small_grid):
    X, Y = small_grid.mesh()
    with pytest.raises(ValueError):
        smallness_report(Field(small_grid, 0.01 * np.exp(-(Y**2)), "real"))


# --- Neumann operator -----------------------------------------------------------


def test_neumann_of_zero_potential(small_grid, rng):
    h = Field(small_grid, rng.normal(size=(32, 128)))
    out = neumann_apply(Field(small_grid, np.zeros((32, 128))), h, 0.3 + 1j)
    assert not out.values.any()


def test_neumann_single_mode_matches_quadrature(ref_grid):
    eps, z = 0.02, 0.3 + 0.7j
    u = reference_potential(ref_grid, eps)
    one = Field(ref_grid, np.ones((ref_grid.Nx, ref_grid.Ny)))
    got = neumann_apply(u, one, z).values
    for j, k in ((0, 128), (5, 100), (17, 150), (9, 180)):
        expected = neumann_one_single_mode(ref_grid.x[j], ref_grid.y[k], z, eps)
        assert abs(got[j, k] - expected) < 1e-12


def test_neumann_bounded_by_contraction_ratio(small_u0, rng):
    ratio = smallness_report(small_u0).ratio
    g = small_u0.grid
    for _ in range(50):
        h = Field(g, rng.normal(size=(32, 128)) + 1j * rng.normal(size=(32, 128)))
        z = complex(rng.uniform(-1.4, 1.4), rng.uniform(-4, 4))
        if abs(2 * z.real - round(2 * z.real)) < 0.05 and round(2 * z.real) != 0:
            continue
        out = neumann_apply(small_u0, h, z, zero_row="primed")
        assert np.abs(out.values).max() <= ratio * np.abs(h.values).max()


def test_neumann_rejects_forbidden_line(small_u0):
    one = Field(small_u0.grid, np.ones((32, 128)))
    with pytest.raises(ValueError):
        neumann_apply(small_u0, one, 0.5 + 0.1j)


# --- strip solves ---------------------------------------------------------------


def test_vacuum_jost_function(small_grid):
    sol = solve_jost(Field(small_grid, np.zeros((32, 128))), 0.3 + 1j)
    assert sol.iterations == 1
    assert np.array_equal(sol.mu.values, np.ones((32, 128)))


def test_born_term_dominates_for_tiny_potential(ref_grid):
    z = 0.3 + 0.7j
    one = Field(ref_grid, np.ones((ref_grid.Nx, ref_grid.Ny)))
    defects = []
    for eps in (1e-4, 2e-4):
        u = reference_potential(ref_grid, eps)
        sol = solve_jost(u, z)
        defects.append(np.abs(sol.mu.values - 1 - neumann_apply(u, one, z).values).max())
    assert defects[0] <= 1.0 * 1e-8  # K eps^2 with K = 1
    assert defects[1] / defects[0] == pytest.approx(4.0, rel=0.05)


def test_residual_follows_geometric_envelope(ref_u0):
    sol = solve_jost(ref_u0, 0.25 + 0.5j)
    one = Field(ref_u0.grid, np.ones((ref_u0.grid.Nx, ref_u0.grid.Ny)))
    first = np.abs(neumann_apply(ref_u0, one, 0.25 + 0.5j).values).max()
    bound = smallness_report(ref_u0).ratio
    assert sol.residual <= 1e-13
    assert all(r <= bound + 0.1 for r in sol.contraction_estimates)
    assert sol.residual <= max(sol.contraction_estimates) ** (sol.iterations - 1) * first


def test_primed_convention_has_zero_mode_free_correction(ref_u0):
    sol = solve_jost(ref_u0, 0.25 + 0.5j, zero_row="primed")
    row = analyze(Field(ref_u0.grid, sol.mu.values - 1)).mode_row(0)
    assert np.abs(row).max() < 1e-15


def test_jost_function_relaxes_to_one_at_the_ends(ref_u0):
    n = ref_u0.grid.Ny // 10
    for z in (0.25 + 0.5j, -0.7 + 2j):
        dev = np.abs(solve_jost(ref_u0, z, zero_row="primed").mu.values - 1)
        outer = max(dev[:, :n].max(), dev[:, -n:].max())
        assert outer <= 1e-2 * dev.max()


def test_non_convergence_reports_last_ratio(ref_u0):
    with pytest.raises(ConvergenceError) as info:
        solve_jost(ref_u0, 0.3 + 1j, max_iter=2)
    assert 0 < info.value.last_ratio < 1
    assert info.value.residual > 1e-13


def test_outside_theory_still_solves(small_grid):
    big = reference_potential(small_grid, 0.1)
    assert not smallness_report(big).ok
    sol = solve_jost(big, 0.3 + 1j)
    assert sol.outside_theory and sol.residual <= 1e-12


def test_strip_solve_refuses_contour_points(small_u0):
    with pytest.raises(ValueError):
        solve_jost(small_u0, 0.5 + 1j)


# --- boundary values ----------------------------------------------------------


@pytest.mark.parametrize("method", ["offset", "halfplane"])
@pytest.mark.parametrize("side", ["plus", "minus"])
def test_vacuum_boundary_values(small_grid, method, side):
    sol = jost_boundary(Field(small_grid, np.zeros((32, 128))), 1, side, 0.4, method=method)
    assert np.array_equal(sol.mu.values, np.ones((32, 128)))


def test_boundary_rejects_n_zero(small_u0):
    with pytest.raises(ValueError):
        jost_boundary(small_u0, 0, 1, 0.0)


@pytest.mark.parametrize("n,tau", [(1, 0.0), (-1, 0.5), (2, -1.0)])
def test_boundary_methods_agree(ref_u0, n, tau):
    for side in (1, -1):
        cmp = compare_boundary_methods(ref_u0, n, side, tau)
        assert cmp.agree and cmp.difference <= 1e-4


def test_boundary_limit_is_limit_of_strip_values(ref_u0):
    # approaching Re z = -1/2 from the right along a sequence of strip points
    lim = jost_boundary(ref_u0, 1, 1, 0.3).mu.values
    gaps = [np.abs(solve_jost(ref_u0, complex(-0.5 + d, 0.3)).mu.values - lim).max() for d in (0.04, 0.02, 0.01)]
    assert gaps[0] > gaps[1] > gaps[2]


# --- diagnostics ------------------------------------------------------------------


def test_diagnostics_of_vacuum(small_grid):
    u = Field(small_grid, np.zeros((32, 128)))
    d = jost_diagnostics(u, solve_jost(u, 0.25 + 0.5j))
    assert (d.y_decay, d.cr_residual, d.zero_row_residual, d.u_from_m1_error) == (0, 0, 0, 0)


def test_diagnostics_of_reference_potential(ref_u0):
    sol = solve_jost(ref_u0, 0.25 + 0.5j)
    d = jost_diagnostics(ref_u0, sol)
    assert d.u_from_m1_error <= 5e-2
    for value in (d.y_decay, d.strip_l2, d.cr_residual, d.zero_row_residual):
        assert math.isfinite(value) and value >= 0
    coarse = jost_diagnostics(ref_u0, sol, cr_step=1 / 16).cr_residual
    fine = jost_diagnostics(ref_u0, sol, cr_step=1 / 32).cr_residual
    assert coarse / fine >= 3


@given(st.floats(-1.4, 1.4), st.floats(-6, 6))
@settings(max_examples=15, deadline=None)
def test_contraction_ratio_bounded_everywhere_off_lines(re, im):
    g = make_grid(math.pi, 32, 128, 12.0)
    u = reference_potential(g)
    if min(abs(re - k / 2) for k in (-3, -2, -1, 1, 2, 3)) < 1e-3:
        return
    sol = solve_jost(u, complex(re, im))
    assert max(sol.contraction_estimates, default=0.0) <= smallness_report(u).ratio + 0.1
