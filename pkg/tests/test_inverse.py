import math

import numpy as np
import pytest

from kpist import Field, make_grid, reference_potential
from kpist.heatjost import ConvergenceError, jost_boundary, neumann_apply
from kpist.inverse import (
    CALIBRATED_ORIENTATION,
    BoundaryTraceSet,
    InverseConfig,
    active_set,
    apply_S,
    calibrate_orientation,
    cauchy_sum,
    l1_diagnostic,
    load_traces,
    orientation_errors,
    reconstruct_u,
    save_traces,
    solve_inverse,
)
from kpist.spectral import SpectralData, decay_report, forward_transform, make_contours, zeta


@pytest.fixture(scope="module")
def born_small(small_grid):
    eps = 1e-4
    u = reference_potential(small_grid, eps)
    return eps, u, forward_transform(u, make_contours(small_grid, 2))


def unit_traces(F):
    aset = active_set(F)
    W = np.ones((aset.size, F.grid.Nx, F.grid.Ny), complex)
    return BoundaryTraceSet(F.contours, F, InverseConfig(), aset, W)


# --- configuration ---------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs", [dict(orientation=0), dict(delta=-1.0), dict(side_limit="both"), dict(tol=0.0), dict(max_iter=0)]
)
def test_inverse_config_validation(kwargs):
    with pytest.raises(ValueError):
        InverseConfig(**kwargs)


def test_calibrated_orientation_is_recorded():
    assert InverseConfig().orientation == CALIBRATED_ORIENTATION == 1


# --- vacuum -------------------------------------------------------------------------


def test_zero_data_gives_unit_traces_and_zero_potential(small_grid):
    F = SpectralData.zeros(make_contours(small_grid, 2))
    W = solve_inverse(F)
    assert W.iterations == 1
    assert np.array_equal(W.trace(1, 5).values, np.ones((32, 128)))
    assert np.array_equal(W.trace(-2, 77).values, np.ones((32, 128)))
    assert not reconstruct_u(F, W).values.any()
    assert not cauchy_sum(F, W, 0.2 + 1j).values.any()
    assert not apply_S(F, W, 1, small_grid.xi[40]).values.any()


# --- shift closure ------------------------------------------------------------------


def test_partner_of_every_active_sample_is_the_shifted_point(ref_forward):
    aset = active_set(ref_forward)
    omega = ref_forward.grid.omega
    z = zeta(aset.n, aset.xi, omega)
    zp = zeta(aset.n[aset.partner], aset.xi[aset.partner], omega)
    assert np.allclose(zp, -np.conj(z), rtol=0, atol=1e-12)
    assert np.all(aset.k > 0)  # the Nyquist column has no mirror and is never active


# --- operators ----------------------------------------------------------------------


def test_apply_S_with_unit_traces_is_a_scaled_harmonic(ref_forward):
    W = unit_traces(ref_forward)
    g = ref_forward.grid
    xi = g.xi[140]
    X, Y = g.mesh()
    out = apply_S(ref_forward, W, 1, xi).values
    expected = ref_forward.value(1, xi) * np.exp(1j * (X + xi * Y))
    assert np.abs(out - expected).max() < 1e-17


def test_apply_S_matches_jump_of_direct_boundary_values(ref_u0, ref_forward, ref_traces):
    g = ref_u0.grid
    for n, k in ((1, 128), (-1, 140), (2, 120)):
        xi = g.xi[k]
        tau = -xi / (2 * g.omega * n)
        plus = jost_boundary(ref_u0, n, 1, tau).mu.values
        minus = jost_boundary(ref_u0, n, -1, tau).mu.values
        jump = plus - minus
        got = apply_S(ref_forward, ref_traces, n, xi).values
        assert np.abs(got - jump).max() <= 1e-3 * np.abs(jump).max()


def test_cauchy_sum_matches_direct_summation(ref_forward):
    W = unit_traces(ref_forward)
    g = ref_forward.grid
    z = 0.25 + 0.5j
    X, Y = g.mesh()
    expected = np.zeros((g.Nx, g.Ny), complex)
    for n in ref_forward.contours.ns:
        for k in range(1, g.Ny):
            G = ref_forward.G[ref_forward.contours.row(n), k]
            if G == 0 or abs(G) <= 1e-11 * np.abs(ref_forward.G).max():
                continue
            p = (g.omega * n) ** 2 + 2 * g.omega * n * z + 1j * g.xi[k]
            expected += np.sign(n) * g.dxi * G / p * np.exp(1j * (g.omega * n * X + g.xi[k] * Y)) / (2 * math.pi)
    got = cauchy_sum(ref_forward, W, z).values
    assert np.abs(got - expected).max() <= 1e-13 * np.abs(expected).max()


@pytest.mark.parametrize("z", [0.25 + 0.5j, -0.8 + 1j])
def test_cauchy_sum_of_born_data_is_first_neumann_term(born_small, z):
    eps, u, F = born_small
    g = u.grid
    got = cauchy_sum(F, unit_traces(F), z).values
    neumann = neumann_apply(u, Field(g, np.ones((g.Nx, g.Ny))), z, zero_row="primed").values
    assert np.abs(got - neumann).max() <= 1e-2 * np.abs(neumann).max()
    # Riemann-Lebesgue: the sum fades towards the ends of the y line
    shell = g.Ny // 10
    outer = max(np.abs(got[:, :shell]).max(), np.abs(got[:, -shell:]).max())
    assert outer <= 1e-2 * np.abs(got).max()


def test_cauchy_sum_refuses_contour_points(ref_forward, ref_traces):
    with pytest.raises(ValueError):
        cauchy_sum(ref_forward, ref_traces, -1.0 + 0.3j)


# --- fixed point --------------------------------------------------------------------


def test_born_traces_are_close_to_one(born_small):
    eps, _, F = born_small
    W = solve_inverse(F)
    assert np.abs(W.W - 1).max() <= 2 * eps


def test_contraction_of_inverse_iteration(ref_forward, ref_traces):
    margin = decay_report(ref_forward).forward_margin
    assert margin < 0.9
    assert ref_traces.ratios and max(ref_traces.ratios) <= margin + 0.1
    assert ref_traces.residual <= 1e-12 and not ref_traces.outside_theory


def test_inverse_non_convergence(ref_forward):
    with pytest.raises(ConvergenceError):
        solve_inverse(ref_forward, InverseConfig(max_iter=2))


def test_inverse_rejects_non_finite_data(small_grid):
    F = SpectralData.zeros(make_contours(small_grid, 1))
    F.G[0, 3] = np.nan
    with pytest.raises(ValueError):
        solve_inverse(F)


# --- reconstruction -----------------------------------------------------------------


def test_round_trip_reference(ctx):
    ref = ctx.reference
    err = np.linalg.norm(ref.reconstruction0.values - ref.u0.values) / np.linalg.norm(ref.u0.values)
    assert err <= 2e-2
    assert "imag_ratio" in ref.reconstruction0.meta


def test_round_trip_in_born_regime_is_first_order(born_small):
    eps, u, F = born_small
    rec = reconstruct_u(F, solve_inverse(F))
    assert np.linalg.norm(rec.values - u.values) / np.linalg.norm(u.values) <= 1.0 * eps


def test_offset_side_limit_also_reconstructs(small_u0):
    F = forward_transform(small_u0, make_contours(small_u0.grid, 3))
    errs = {}
    for mode in ("plemelj", "offset"):
        rec = reconstruct_u(F, solve_inverse(F, InverseConfig(side_limit=mode)))
        errs[mode] = np.linalg.norm(rec.values - small_u0.values) / np.linalg.norm(small_u0.values)
    assert errs["offset"] <= 2e-2
    assert errs["plemelj"] < errs["offset"]


def test_reconstruct_checks_traces_belong_to_data(ref_forward, ref_traces):
    other = SpectralData(ref_forward.contours, 2 * ref_forward.G)
    with pytest.raises(ValueError):
        reconstruct_u(other, ref_traces)


def test_orientation_calibration(born_small):
    eps, u, F = born_small
    assert calibrate_orientation(F, u) == CALIBRATED_ORIENTATION
    errors = orientation_errors(F, u)
    assert errors[CALIBRATED_ORIENTATION] < 1e-3 and errors[-CALIBRATED_ORIENTATION] > 1.0


# --- L1 estimate --------------------------------------------------------------------


def test_l1_diagnostic_cases(ref_forward, ref_traces, born_small):
    g = ref_forward.grid
    unit = l1_diagnostic(Field(g, np.ones((g.Nx, g.Ny))), ref_forward)
    assert unit.lhs == 0 and unit.ok
    diag = l1_diagnostic(Field(g, ref_traces.W[0]), ref_forward)
    assert diag.applicable and diag.ok
    eps, u, F = born_small
    # Born regime: both sides are first order, so doubling the data doubles them
    sides = []
    for scale in (1, 2):
        Fs = SpectralData(F.contours, scale * F.G)
        W = solve_inverse(Fs)
        d = l1_diagnostic(Field(u.grid, W.W[len(W.W) // 2]), Fs)
        assert d.ok
        sides.append((d.lhs, d.rhs))
    assert sides[1][0] / sides[0][0] == pytest.approx(2, rel=1e-2)
    assert sides[1][1] / sides[0][1] == pytest.approx(2, rel=1e-2)
    big = SpectralData(ref_forward.contours, 50 * ref_forward.G)
    report_only = l1_diagnostic(Field(g, ref_traces.W[0]), big)
    assert not report_only.applicable and report_only.ok is None


# --- persistence --------------------------------------------------------------------


def test_traces_round_trip_through_directory(tmp_path, born_small):
    _, _, F = born_small
    W = solve_inverse(F)
    save_traces(W, tmp_path / "traces")
    back = load_traces(tmp_path / "traces", F)
    assert np.array_equal(back.W, W.W)
    assert back.config == W.config and back.iterations == W.iterations
    assert (tmp_path / "traces" / f"n_1_k_{int(W.support.k[W.support.blocks[1][0]])}").exists()
