"""Acceptance suite: fourteen numbered checks of the whole pipeline.

Each check returns a :class:`CriterionResult`.  Expensive intermediate runs
(forward data, inverse traces, split-step trajectories) are computed once per
:class:`ValidationContext` and shared between checks.

The reference configuration is ``ell = pi, Nx = 32, Ny = 256, Ly = 12,
n_max = 3`` with ``u0 = 0.02 cos(x) exp(-y^2)``; the refined configuration
doubles ``Ny``, raises ``n_max`` to 4 and halves the time step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .cylinder import Field, analyze, basic_lemma_report, convolve, make_grid, norms, synthesize
from .heatjost import compare_boundary_methods, jost_boundary, jost_diagnostics, smallness_report, solve_jost
from .inverse import InverseConfig, born_reconstruction, l1_diagnostic, reconstruct_u, solve_inverse
from .kpsolver import PdeConfig, builtin_potential, pde_solve, reference_potential
from .spectral import decay_report, evolve, forward_transform, jump_residual, make_contours

__all__ = ["CriterionResult", "ValidationContext", "CRITERIA", "run_criterion", "run_all", "format_table"]

REFERENCE = dict(ell=math.pi, Nx=32, Ny=256, Ly=12.0, n_max=3, dt=1e-3)
REFINED = dict(ell=math.pi, Nx=32, Ny=512, Ly=12.0, n_max=4, dt=5e-4)
AMPLITUDE = 0.02
BORN_EPS = (1e-3, 1e-3 / math.sqrt(10.0))
T_COMPARE = 0.2
BOUNDARY_SAMPLES = [(n, v) for n in (1, -1, 2, -2) for v in (0.0, 1.0, -1.0)]


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d}. {self.name}: {self.detail}"


class _Resolution:
    """Forward data, inverse runs and split-step runs at one resolution."""

    def __init__(self, params: dict, inverse_cfg: InverseConfig):
        self.params = params
        self.grid = make_grid(params["ell"], params["Nx"], params["Ny"], params["Ly"])
        self.contours = make_contours(self.grid, params["n_max"])
        self.u0 = reference_potential(self.grid, AMPLITUDE)
        self.inverse_cfg = inverse_cfg
        self._pde = {}

    @cached_property
    def forward(self):
        return forward_transform(self.u0, self.contours)

    @cached_property
    def traces0(self):
        return solve_inverse(self.forward, self.inverse_cfg)

    @cached_property
    def reconstruction0(self) -> Field:
        return reconstruct_u(self.forward, self.traces0)

    @cached_property
    def ist_at_compare(self) -> Field:
        Ft = evolve(self.forward, T_COMPARE)
        return reconstruct_u(Ft, solve_inverse(Ft, self.inverse_cfg))

    def pde(self, dt: float):
        if dt not in self._pde:
            self._pde[dt] = pde_solve(self.u0, PdeConfig(dt=dt, t_end=T_COMPARE))
        return self._pde[dt]


class ValidationContext:
    """Lazily computed runs shared by the criteria."""

    def __init__(self, inverse_cfg: InverseConfig | None = None, seed: int = 20240601):
        self.inverse_cfg = inverse_cfg or InverseConfig()
        self.seed = seed
        self.reference = _Resolution(REFERENCE, self.inverse_cfg)
        self.refined = _Resolution(REFINED, self.inverse_cfg)
        self.mass_ratios: list[float] = []

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])

    @cached_property
    def born(self) -> dict:
        """Forward data of ``eps * cos(x) exp(-y^2)`` for the two small amplitudes."""
        ref = self.reference
        out = {}
        for eps in BORN_EPS:
            u = reference_potential(ref.grid, eps)
            out[eps] = (u, forward_transform(u, ref.contours))
        return out

    def pde(self, res: _Resolution, dt: float):
        result = res.pde(dt)
        self.mass_ratios.append(result.max_mass_ratio)
        return result


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def criterion_vacuum(ctx: ValidationContext) -> CriterionResult:
    grid = make_grid(math.pi, 32, 64, 12.0)
    u = builtin_potential(grid, "zero")
    worst = {}
    sol = solve_jost(u, complex(0.25, 0.5))
    worst["mu_strip"] = float(np.abs(sol.mu.values - 1.0).max())
    for method in ("offset", "halfplane"):
        for side in (1, -1):
            b = jost_boundary(u, 1, side, 0.3, method=method)
            worst[f"mu_{method}"] = max(worst.get(f"mu_{method}", 0.0), float(np.abs(b.mu.values - 1.0).max()))
    F = forward_transform(u, make_contours(grid, 2))
    worst["F"] = float(np.abs(F.G).max())
    W = solve_inverse(F)
    worst["u_rec"] = float(np.abs(reconstruct_u(F, W).values).max())
    pde = pde_solve(u, PdeConfig(dt=1e-2, t_end=0.1), keep_every=1)
    worst["pde"] = max(float(np.abs(f.values).max()) for f in pde.trajectory)
    bad = max(worst.values())
    return CriterionResult(1, "vacuum identities", bad <= 1e-14, f"max deviation {bad:.1e} (tol 1e-14)", worst)


def criterion_transforms(ctx: ValidationContext) -> CriterionResult:
    grid = ctx.reference.grid
    X, Y = grid.mesh()
    rng = ctx.rng(2)
    worst = {"roundtrip": 0.0, "plancherel": 0.0, "convolution": 0.0}
    for _ in range(5):
        a = rng.normal(size=4) + 1j * rng.normal(size=4)
        u = Field(grid, (a[0] * np.cos(X) + a[1] * np.sin(2 * X) + a[2]) * np.exp(-((Y - a[3].real) ** 2)))
        h = Field(grid, (1 + a[3] * np.cos(X + 0.3)) * np.exp(-0.5 * Y**2))
        c = analyze(u)
        worst["roundtrip"] = max(worst["roundtrip"], _rel(synthesize(c).values, u.values))
        worst["plancherel"] = max(worst["plancherel"], norms(u).plancherel_residual)
        direct = analyze(Field(grid, u.values * h.values)).values
        via = convolve(c, analyze(h)).values / (2.0 * math.pi)
        worst["convolution"] = max(worst["convolution"], _rel(via, direct))
    ok = worst["roundtrip"] <= 1e-12 and worst["plancherel"] <= 1e-10 and worst["convolution"] <= 1e-10
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    return CriterionResult(2, "transform algebra", ok, detail, worst)


def _random_lemma_input(grid, rng) -> np.ndarray:
    values = np.zeros((grid.Nx, grid.Ny), dtype=complex)
    band_m = rng.integers(2, 6)
    width = rng.uniform(0.5, 3.0)
    centre = rng.uniform(-2.0, 2.0)
    profile = np.exp(-((grid.xi - centre) ** 2) / (2 * width**2))
    for m in range(-band_m, band_m + 1):
        if m == 0:
            continue
        amp = complex(rng.normal(), rng.normal()) / (1 + m * m)
        values[m + grid.Nx // 2] = amp * profile * np.exp(1j * rng.uniform(0, 2 * np.pi, grid.Ny))
    return values


def criterion_basic_lemma(ctx: ValidationContext) -> CriterionResult:
    from .cylinder import SpectralCoeffs

    grid = make_grid(math.pi, 32, 128, 12.0)
    rng = ctx.rng(3)
    omega = grid.omega
    trials, failures, worst = 120, 0, 0.0
    for _ in range(trials):
        coeffs = SpectralCoeffs(grid, _random_lemma_input(grid, rng))
        strip = rng.integers(-3, 4)
        re = (strip + rng.uniform(0.05, 0.95) * (1 if strip >= 0 else -1)) * omega / 2.0
        if strip == 0:
            re = rng.uniform(-0.45, 0.45) * omega
        z = complex(re, rng.uniform(-5, 5))
        rep = basic_lemma_report(coeffs, z)
        worst = max(worst, rep.lhs / rep.rhs)
        failures += not rep.satisfied
    C = basic_lemma_report(SpectralCoeffs(grid, np.zeros((grid.Nx, grid.Ny), complex)), 0.3j + 0.2).C
    ok = failures == 0 and abs(C - 16.3744) < 1e-4
    detail = f"{trials} trials, {failures} violations, max lhs/rhs {worst:.3f}, C {C:.4f}"
    return CriterionResult(3, "basic lemma bound", ok, detail, {"worst": worst, "C": C})


def criterion_contraction(ctx: ValidationContext) -> CriterionResult:
    u = ctx.reference.u0
    ratio = smallness_report(u).ratio
    worst, geometric = 0.0, True
    for z in (complex(0.25, 0.5), complex(-0.7, 2.0), complex(1.2, -1.0), complex(0.0, 0.0)):
        sol = solve_jost(u, z)
        est = sol.contraction_estimates
        worst = max([worst, *est])
        geometric &= all(r < 1.0 for r in est) and sol.residual <= 1e-13
    ok = worst <= ratio + 0.1 and geometric
    detail = f"max ratio {worst:.3e} <= {ratio:.4f} + 0.1; geometric decay {geometric}"
    return CriterionResult(4, "contraction certificate", ok, detail, {"max_ratio": worst, "bound": ratio})


def criterion_one_sided(ctx: ValidationContext) -> CriterionResult:
    u = ctx.reference.u0
    worst = 0.0
    agree = True
    for n, tau in BOUNDARY_SAMPLES:
        for side in (1, -1):
            cmp = compare_boundary_methods(u, n, side, tau)
            worst = max(worst, cmp.difference)
            agree &= cmp.agree
    ok = worst <= 1e-3 and agree
    return CriterionResult(5, "one-sided limits agree", ok, f"max offset/halfplane difference {worst:.2e}", {"max": worst})


def criterion_jump(ctx: ValidationContext) -> CriterionResult:
    ref, fine = ctx.reference, ctx.refined
    r_ref = jump_residual(ref.u0, ref.forward, BOUNDARY_SAMPLES)
    r_fine = jump_residual(fine.u0, fine.forward, BOUNDARY_SAMPLES)
    m_ref, m_fine = max(r_ref), max(r_fine)
    ok = m_ref <= 1e-3 and m_fine < m_ref
    detail = f"max residual {m_ref:.2e} at Ny={ref.grid.Ny}, {m_fine:.2e} at Ny={fine.grid.Ny}"
    return CriterionResult(6, "jump relation", ok, detail, {"reference": r_ref, "refined": r_fine})


def criterion_decay(ctx: ValidationContext) -> CriterionResult:
    rep = decay_report(ctx.reference.forward)
    ok = True
    for n in (1, 2):
        for sign in (1, -1):
            a, b = sign * n, sign * (n + 1)
            ok &= rep.sup_bound[b] <= 2.0 * rep.sup_bound[a]
            ok &= rep.l2_bound[b] <= 2.0 * rep.l2_bound[a]
    sup = ", ".join(f"{rep.sup_bound[n]:.1e}" for n in (1, 2, 3))
    l2 = ", ".join(f"{rep.l2_bound[n]:.1e}" for n in (1, 2, 3))
    detail = f"n^2 sup|G| = [{sup}], n^4 int|G|^2 = [{l2}]"
    return CriterionResult(7, "spectral data decay", ok, detail, {"sup": rep.sup_bound, "l2": rep.l2_bound})


def criterion_isometry(ctx: ValidationContext) -> CriterionResult:
    F = ctx.reference.forward
    scale = float(np.abs(F.G).max())
    iso = max(float(np.abs(np.abs(evolve(F, t).G) - np.abs(F.G)).max()) for t in (0.1, 0.2, 1.0))
    group = 0.0
    for s, t in ((0.1, 0.2), (0.3, 0.7), (1.0, 0.5)):
        two = evolve(evolve(F, s), t).G
        one = evolve(F, s + t).G
        group = max(group, float(np.abs(two - one).max()) / scale)
    ok = iso <= 1e-15 * scale and group <= 1e-13
    detail = f"modulus drift {iso / scale:.1e} relative, group defect {group:.1e}"
    return CriterionResult(8, "evolution isometry", ok, detail, {"isometry": iso / scale, "group": group})


def born_defect(u: Field, F) -> float:
    """``max |G[n, xi] - sgn(n) u_hat(n, xi)|`` over all stored samples."""
    coeffs = analyze(u)
    worst = 0.0
    for n in F.contours.ns:
        predicted = np.sign(n) * coeffs.mode_row(int(n))
        worst = max(worst, float(np.abs(F.row(int(n)) - predicted).max()))
    return worst


def criterion_born(ctx: ValidationContext) -> CriterionResult:
    (e1, (u1, F1)), (e2, (u2, F2)) = ctx.born.items()
    d1, d2 = born_defect(u1, F1), born_defect(u2, F2)
    ratio = d1 / d2
    errs = {}
    for sign in (1, -1):
        errs[sign] = [_rel(born_reconstruction(F, sign).values, u.values) for u, F in ((u1, F1), (u2, F2))]
    calibrated = errs[1][1] < errs[1][0] / 2.0 and errs[1][0] < 0.05
    flipped = min(errs[-1]) > 0.5
    ok = 5.0 <= ratio <= 20.0 and calibrated and flipped
    detail = (
        f"defect ratio {ratio:.2f} ({d1:.2e}/{d2:.2e}); "
        f"orientation +1 errors {errs[1][0]:.1e}->{errs[1][1]:.1e}, -1 errors {errs[-1][0]:.2f}->{errs[-1][1]:.2f}"
    )
    return CriterionResult(9, "Born limit and orientation", ok, detail, {"ratio": ratio, "errors": errs})


def criterion_round_trip(ctx: ValidationContext) -> CriterionResult:
    ref, fine = ctx.reference, ctx.refined
    e_ref = _rel(ref.reconstruction0.values, ref.u0.values)
    e_fine = _rel(fine.reconstruction0.values, fine.u0.values)
    ok = e_ref <= 2e-2 and e_fine < e_ref
    detail = f"relative L2 {e_ref:.2e} at (256, 3), {e_fine:.2e} at (512, 4)"
    return CriterionResult(10, "round trip", ok, detail, {"reference": e_ref, "refined": e_fine})


def criterion_mutual_oracle(ctx: ValidationContext) -> CriterionResult:
    ref, fine = ctx.reference, ctx.refined
    norm0 = np.linalg.norm(ref.u0.values)
    e_ref = float(np.linalg.norm(ref.ist_at_compare.values - ctx.pde(ref, ref.params["dt"]).field.values) / norm0)
    norm1 = np.linalg.norm(fine.u0.values)
    e_fine = float(np.linalg.norm(fine.ist_at_compare.values - ctx.pde(fine, fine.params["dt"]).field.values) / norm1)
    runs = [ctx.pde(ref, dt).field.values for dt in (4e-3, 2e-3, 1e-3)]
    order = float(np.linalg.norm(runs[0] - runs[1]) / np.linalg.norm(runs[1] - runs[2]))
    ok = e_ref <= 5e-2 and e_fine < e_ref and 3.5 <= order <= 4.5
    detail = f"IST vs PDE {e_ref:.2e} -> {e_fine:.2e} under refinement; dt self-convergence ratio {order:.3f}"
    return CriterionResult(11, "IST vs split-step", ok, detail, {"reference": e_ref, "refined": e_fine, "order": order})


def criterion_m1(ctx: ValidationContext) -> CriterionResult:
    u = ctx.reference.u0
    sol = solve_jost(u, complex(0.25, 0.5))
    diag = jost_diagnostics(u, sol)
    ok = diag.u_from_m1_error <= 5e-2
    return CriterionResult(12, "u from m1", ok, f"relative L2 {diag.u_from_m1_error:.2e}", {"error": diag.u_from_m1_error})


def criterion_l1(ctx: ValidationContext) -> CriterionResult:
    ref = ctx.reference
    F, W = ref.forward, ref.traces0
    lam = decay_report(F).lambda_norm
    lhs = 0.0
    rhs = math.inf
    ok = True
    for trace in W.W:
        diag = l1_diagnostic(Field(ref.grid, trace), F)
        lhs = max(lhs, diag.lhs)
        rhs = diag.rhs
        if diag.applicable:
            ok &= bool(diag.ok)
    ok &= lam < 0.9
    detail = f"max lhs {lhs:.3e} <= {rhs:.3e} * 1.1 (Lambda norm {lam:.3f}) over {len(W.W)} traces"
    return CriterionResult(13, "L1 estimate", ok, detail, {"lhs": lhs, "rhs": rhs, "lambda": lam})


def criterion_zero_mass(ctx: ValidationContext) -> CriterionResult:
    # make sure every trajectory of the suite has run at least once
    ctx.pde(ctx.reference, ctx.reference.params["dt"])
    ctx.pde(ctx.refined, ctx.refined.params["dt"])
    worst = max(ctx.mass_ratios)
    return CriterionResult(
        14, "zero-mass conservation", worst <= 1e-12,
        f"max |u_hat(0, xi)| / ||u0||_2 = {worst:.1e} over {len(ctx.mass_ratios)} runs", {"max": worst},
    )


CRITERIA = {
    1: criterion_vacuum,
    2: criterion_transforms,
    3: criterion_basic_lemma,
    4: criterion_contraction,
    5: criterion_one_sided,
    6: criterion_jump,
    7: criterion_decay,
    8: criterion_isometry,
    9: criterion_born,
    10: criterion_round_trip,
    11: criterion_mutual_oracle,
    12: criterion_m1,
    13: criterion_l1,
    14: criterion_zero_mass,
}


def run_criterion(number: int, ctx: ValidationContext) -> CriterionResult:
    """Run one criterion; an exception counts as a failure with its message."""
    check = CRITERIA[number]
    try:
        return check(ctx)
    except Exception as exc:  # a crashing check is reported, not propagated
        name = check.__name__.removeprefix("criterion_").replace("_", " ")
        return CriterionResult(number, name, False, f"raised {type(exc).__name__}: {exc}")


def run_all(ctx: ValidationContext | None = None, numbers=None) -> list[CriterionResult]:
    ctx = ctx or ValidationContext()
    return [run_criterion(k, ctx) for k in (numbers or sorted(CRITERIA))]


def format_table(results) -> str:
    return "\n".join(r.line() for r in results)
