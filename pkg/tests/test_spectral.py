import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kpist import Field, make_grid, norms, reference_potential
from kpist.heatjost import smallness_report
from kpist.spectral import (
    SpectralData,
    decay_report,
    evolution_phase,
    evolve,
    forward_transform,
    jump_residual,
    make_contours,
    r0,
    zeta,
)
from oracles import gaussian_mode_coefficient


def test_r0_examples():
    assert r0(2 + 3j, 1.0) == (-4.0, 24.0)
    assert r0(3.5j, 1.0) == (0.0, 0.0)
    assert zeta(-4, 24, 1.0) == 2 + 3j


def test_zeta_examples():
    assert zeta(1, 2, 1.0) == -0.5 - 1j
    assert zeta(-1, 2, 1.0) == 0.5 + 1j
    with pytest.raises(ValueError):
        zeta(0, 1.0, 1.0)


@given(
    n=st.integers(-50, 50).filter(bool),
    xi=st.floats(-1e3, 1e3, allow_nan=False),
    omega=st.sampled_from([1.0, math.pi, 0.5]),
)
def test_r0_inverts_zeta(n, xi, omega):
    m, x = r0(zeta(n, xi, omega), omega)
    assert m == pytest.approx(n, rel=1e-14)
    assert x == pytest.approx(xi, rel=1e-13, abs=1e-12)


def test_contour_grid_layout(small_grid):
    cg = make_contours(small_grid, 3)
    assert list(cg.ns) == [-3, -2, -1, 1, 2, 3]
    assert sorted(cg.row(n) for n in cg.ns) == list(range(6))
    for n in (-2, 1):
        pts = cg.points(n)
        assert np.all(pts.real == -(small_grid.omega / 2) * n)
        assert np.allclose(pts.imag, cg.tau_im(n))
        # the shift z -> -conj z lands on the stored sample (-n, -xi)
        assert np.allclose(-np.conj(pts[1:]), cg.points(-n)[1:][::-1])
    with pytest.raises(ValueError):
        make_contours(small_grid, 0)


# --- forward transform -------------------------------------------------------------


def test_forward_of_zero_potential(small_grid):
    F = forward_transform(Field(small_grid, np.zeros((32, 128)), "real"), make_contours(small_grid, 2))
    assert not F.G.any() and F.time == 0 and F.provenance == "forward"


def test_born_regime_matches_signed_fourier_transform(small_grid):
    eps = 1e-4
    u = reference_potential(small_grid, eps)
    F = forward_transform(u, make_contours(small_grid, 2))
    expected = gaussian_mode_coefficient(small_grid.xi, eps)
    assert np.abs(F.row(1) - expected).max() <= eps**2
    assert np.abs(F.row(-1) + expected).max() <= eps**2
    assert np.abs(F.row(2)).max() <= eps**2 and np.abs(F.row(-2)).max() <= eps**2


def test_forward_data_obey_explicit_bound(ref_forward, ref_u0):
    rep = norms(ref_u0)
    ratio = smallness_report(ref_u0).ratio
    bound = ref_u0.grid.omega * rep.l1 / (1 - ratio)
    assert np.isfinite(ref_forward.G).all()
    assert np.abs(ref_forward.G).max() < bound


def test_forward_refuses_large_potential(small_grid):
    with pytest.raises(ValueError):
        forward_transform(reference_potential(small_grid, 0.1), make_contours(small_grid, 1))


def test_failed_samples_are_flagged(small_u0):
    F = forward_transform(small_u0, make_contours(small_u0.grid, 1), max_iter=1)
    assert F.meta["failed"] and np.isnan(F.G).any()


# --- jump relation -----------------------------------------------------------------


def test_jump_of_zero_potential(small_grid):
    u = Field(small_grid, np.zeros((32, 128)))
    assert jump_residual(u, None, [(1, 0.0), (-2, 1.0)]) == [0.0, 0.0]


def test_jump_relation_holds(ref_u0, ref_forward):
    res = jump_residual(ref_u0, ref_forward, [(1, 0.0), (-1, 1.0), (2, -1.0)])
    assert max(res) <= 1e-3


# --- decay report ------------------------------------------------------------------


def test_decay_report_of_zero_data(small_grid):
    rep = decay_report(SpectralData.zeros(make_contours(small_grid, 3)))
    assert rep.forward_margin == 0 and rep.lambda_norm == 0 and rep.gamma_c == 0
    assert all(v == 0 for v in rep.sup_bound.values())


def test_decay_report_of_reference_data(ref_forward):
    rep = decay_report(ref_forward)
    assert rep.forward_margin < 1
    values = [*rep.sup_bound.values(), *rep.l2_bound.values(), rep.lambda_norm, rep.gamma_c, rep.wzeta2, rep.tail_sup]
    assert all(v >= 0 and math.isfinite(v) for v in values)
    assert rep.sup_bound[1] > rep.sup_bound[2] > rep.sup_bound[3]


# --- evolution ---------------------------------------------------------------------


def test_evolution_identity_at_zero(ref_forward):
    assert np.array_equal(evolve(ref_forward, 0.0).G, ref_forward.G)


def test_evolution_phase_example(small_grid):
    # z = -1/2 (n = 1, xi = 0): z^3 + conj(z)^3 = -1/4, factor exp(-4i * -1/4) = e^i
    cg = make_contours(small_grid, 1)
    F = SpectralData(cg, np.ones((2, 128)))
    k = small_grid.xi_index(0.0)
    assert evolve(F, 1.0).value(1, 0.0) == pytest.approx(complex(math.cos(1), math.sin(1)), abs=1e-15)
    z = complex(zeta(1, 0.0, 1.0))
    assert evolution_phase(cg, 1.0)[cg.row(1), k] == pytest.approx((-4j * (z**3 + z.conjugate() ** 3)).imag)


@given(s=st.floats(0, 3), t=st.floats(0, 3))
@settings(max_examples=25, deadline=None)
def test_evolution_is_an_isometric_group(s, t):
    g = make_grid(math.pi, 16, 64, 12.0)
    rng = np.random.default_rng(7)
    F = SpectralData(make_contours(g, 3), rng.normal(size=(6, 64)) + 1j * rng.normal(size=(6, 64)))
    Fs = evolve(F, s)
    assert np.abs(np.abs(Fs.G) - np.abs(F.G)).max() <= 1e-15 * np.abs(F.G).max() * 4
    two = evolve(Fs, t)
    assert two.time == pytest.approx(s + t)
    # phases grow like tau^2 t, so compare with a tolerance that scales with the phase size
    phase_scale = 1 + np.abs(evolution_phase(F.contours, s + t)).max()
    assert np.abs(two.G - evolve(F, s + t).G).max() <= 1e-15 * phase_scale * np.abs(F.G).max() * 8
    assert two.provenance == "evolved"


def test_evolution_rejects_negative_time(ref_forward):
    with pytest.raises(ValueError):
        evolve(ref_forward, -0.1)
