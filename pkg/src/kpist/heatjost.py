"""Jost eigenfunctions of the perturbed heat operator.

For a small zero-mass potential ``u`` and a spectral parameter ``z`` off the
lines ``Re z = (omega/2) k`` (``k != 0``), the Jost function solves::

    (-d/dy + d^2/dx^2 + 2 i z d/dx + u) mu = 0,    mu -> 1 as |y| -> infinity

It is computed as the fixed point of ``mu = 1 + N_u mu``, where ``N_u``
inverts the constant-coefficient operator mode by mode in x.  Each x-mode
``m`` reduces to a first-order ODE in y with rate
``kappa_m = omega m (omega m + 2 z)``; see :mod:`kpist.yline`.

On a line ``Re z = -(omega/2) n`` the rate of mode ``m = n`` becomes purely
imaginary and ``mu`` has two one-sided limits ``mu_plus`` (from the right,
larger ``Re z``) and ``mu_minus``.  They are computed either directly, by
integrating the marginal mode in the direction inherited from the chosen side
(``method="halfplane"``), or by solving slightly off the line and
Richardson-extrapolating (``method="offset"``).

The x-constant row ``m = 0`` has ``kappa_0 = 0`` for every ``z``.  The default
``zero_row="halfplane"`` integrates it backward (from ``+inf``) when
``Re z > 0``, forward when ``Re z < 0`` and symmetrically at ``Re z = 0``.  With
this choice the jump across each contour is exactly the rank-one shifted
jump of the scattering theory.  ``zero_row="primed"`` drops the row instead
(no x-constant part of ``mu - 1``); the jump relation then only holds to
first order in the potential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cylinder import CylinderGrid, Field, analyze, basic_lemma_constant, norms
from .yline import BACKWARD, FORWARD, SYMMETRIC, make_line_solver

__all__ = [
    "ConvergenceError",
    "SpectralPoint",
    "JostSolution",
    "JostDiagnostics",
    "SmallnessReport",
    "BoundaryComparison",
    "pz",
    "smallness_report",
    "neumann_apply",
    "solve_jost",
    "solve_jost_batch",
    "boundary_traces",
    "jost_boundary",
    "compare_boundary_methods",
    "default_offset",
    "extract_m1",
    "cauchy_riemann_residual",
    "jost_diagnostics",
]

MARGIN_MIN = 1e-6
_BATCH_ELEMENTS = 1 << 20


class ConvergenceError(RuntimeError):
    """A fixed-point iteration did not reach its tolerance."""

    def __init__(self, message: str, last_ratio: float = math.nan, residual: float = math.nan):
        super().__init__(message)
        self.last_ratio = last_ratio
        self.residual = residual


def _strip_index(z: complex, omega: float) -> int:
    t = 2.0 * z.real / omega
    if abs(t) < 1.0:
        return 0
    return int(math.copysign(math.floor(abs(t)), t))


def _line_margin(z: complex, omega: float) -> float:
    half = omega / 2.0
    k = round(z.real / half)
    return min(abs(z.real - half * c) for c in (k - 1, k, k + 1) if c != 0)


@dataclass(frozen=True)
class SpectralPoint:
    """A spectral parameter, either inside a strip or on a contour with a side.

    ``side`` is ``+1`` for the limit from larger ``Re z`` and ``-1`` for the
    limit from smaller ``Re z``; it is ``None`` for points inside a strip.
    """

    z: complex
    omega: float
    contour: int | None = None
    side: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", complex(self.z))
        if self.contour is None:
            if self.side is not None:
                raise ValueError("side is only meaningful for contour points")
        else:
            if self.contour == 0:
                raise ValueError("contour index n must be nonzero")
            if self.side not in (1, -1):
                raise ValueError("contour points need side +1 (plus) or -1 (minus)")
            if self.z.real != -(self.omega / 2.0) * self.contour:
                raise ValueError("contour point does not satisfy Re z = -(omega/2) n")

    @classmethod
    def on_contour(cls, n: int, tau: float, side: int, omega: float) -> "SpectralPoint":
        return cls(complex(-(omega / 2.0) * n, tau), omega, int(n), int(side))

    @property
    def margin(self) -> float:
        """Distance from ``Re z`` to the nearest line (zero for contour points)."""
        return 0.0 if self.contour is not None else _line_margin(self.z, self.omega)

    @property
    def strip_index(self) -> int | None:
        return None if self.contour is not None else _strip_index(self.z, self.omega)


@dataclass
class JostSolution:
    z: SpectralPoint
    mu: Field
    iterations: int
    residual: float
    contraction_estimates: list[float] = field(default_factory=list)
    outside_theory: bool = False
    method: str = "strip"


@dataclass(frozen=True)
class JostDiagnostics:
    y_decay: float
    strip_l2: float
    cr_residual: float
    zero_row_residual: float
    m1_field: Field
    u_from_m1_error: float


@dataclass(frozen=True)
class SmallnessReport:
    C: float
    trinorm: float
    ratio: float
    ok: bool


@dataclass
class BoundaryComparison:
    offset: JostSolution
    halfplane: JostSolution
    difference: float
    agree: bool


def pz(m, xi, z, omega):
    """The symbol ``(omega m)^2 + 2 omega m z + i xi``."""
    return (omega * m) ** 2 + 2.0 * omega * m * z + 1j * xi


def _check_zero_mass(u: Field) -> None:
    scale = np.abs(u.values).max(initial=0.0)
    if scale and np.abs(u.values.mean(axis=0)).max() > 1e-12 * scale:
        raise ValueError("potential must satisfy the zero-mass constraint (zero x-mean on every row)")


def smallness_report(u: Field) -> SmallnessReport:
    """Compare ``C * max(omega ||u||_1, sqrt(omega) ||u||_2)`` with ``2 pi``.

    ``ratio < 1`` is the hypothesis under which the Jost iteration is a
    contraction, and ``ratio`` bounds its contraction factor.
    """
    _check_zero_mass(u)
    C = basic_lemma_constant(u.grid.omega)
    trinorm = norms(u).trinorm
    ratio = C * trinorm / (2.0 * math.pi)
    return SmallnessReport(C, trinorm, ratio, ratio < 1.0)


# --------------------------------------------------------------------------
# batched operator


def _row_directions(grid: CylinderGrid, z: np.ndarray, side, zero_row: str):
    """Decay rates, integration directions and an active-row mask, shape ``(B, Nx)``.

    ``side`` (scalar or per-point array, entries ``+1``, ``-1`` or ``0``) resolves
    rows whose rate is purely imaginary with ``m != 0``; ``0`` means no side
    was given, and then such a row is an error.
    """
    omega = grid.omega
    m = grid.fft_modes.astype(float)[None, :]
    z = np.asarray(z, dtype=complex)[:, None]
    kappa = omega * m * (omega * m + 2.0 * z)
    tol = 1e-12 * max(1.0, omega**2)
    directions = np.where(kappa.real > tol, FORWARD, BACKWARD).astype(int)
    side = np.broadcast_to(np.asarray(side, dtype=int), (z.shape[0],))[:, None]
    marginal = (np.abs(kappa.real) <= tol) & (m != 0)
    if np.any(marginal & (side == 0)):
        raise ValueError("z lies on a contour; a side (+1 or -1) is required")
    directions = np.where(marginal, np.where(np.sign(m) * side > 0, FORWARD, BACKWARD), directions)
    zero = m == 0
    re = z.real
    zero_dir = np.where(re > 0, BACKWARD, np.where(re < 0, FORWARD, SYMMETRIC))
    directions = np.where(zero, zero_dir, directions)
    if zero_row == "halfplane":
        active = np.ones(kappa.shape, dtype=bool)
    elif zero_row == "primed":
        active = np.broadcast_to(~zero, kappa.shape).copy()
    else:
        raise ValueError(f"zero_row must be 'halfplane' or 'primed', got {zero_row!r}")
    return kappa, directions, active


class _JostOperator:
    """``h -> N_u h`` for a batch of spectral points sharing one potential.

    Fields are stored y-major, shape ``(Ny, B, Nx)``, so the x transforms run
    over contiguous memory and the y-line solvers see one row per column.
    """

    def __init__(self, u: Field, z: np.ndarray, side, kernel: str, zero_row: str):
        grid = u.grid
        self.grid = grid
        self.u = np.ascontiguousarray(u.values.T)[:, None, :]
        kappa, directions, active = _row_directions(grid, z, side, zero_row)
        self.shape = kappa.shape
        self.inactive = None if active.all() else ~active.ravel()
        self.solver = make_line_solver(kernel, grid, kappa.ravel(), directions.ravel())

    def apply(self, h: np.ndarray) -> np.ndarray:
        B, Nx = self.shape
        Ny = self.grid.Ny
        modes = np.fft.fft(self.u * h, axis=-1)
        modes /= Nx
        rows = self.solver.apply(modes.reshape(Ny, B * Nx))
        if self.inactive is not None:
            rows[:, self.inactive] = 0.0
        out = np.fft.ifft(rows.reshape(Ny, B, Nx), axis=-1)
        out *= Nx
        return out


@dataclass
class _BatchResult:
    mu: np.ndarray
    iterations: int
    residual: np.ndarray
    ratios: list[float]


def _iterate(op: _JostOperator, tol: float, max_iter: int, stagnation: int = 5) -> _BatchResult:
    B, Nx = op.shape
    mu = np.ones((op.grid.Ny, B, Nx), dtype=complex)
    ratios: list[float] = []
    previous = math.inf
    rising = 0
    floor = 100.0 * np.finfo(float).eps
    for iteration in range(1, max_iter + 1):
        new = 1.0 + op.apply(mu)
        change = float(np.abs(new - mu).max())
        mu = new
        if previous > floor and math.isfinite(previous) and previous > 0:
            ratios.append(change / previous)
        if change < tol:
            residual = np.abs(1.0 + op.apply(mu) - mu).max(axis=(0, 2))
            return _BatchResult(np.ascontiguousarray(mu.transpose(1, 2, 0)), iteration, residual, ratios)
        rising = rising + 1 if change >= previous else 0
        if rising >= stagnation or not math.isfinite(change):
            break
        previous = change
    last = ratios[-1] if ratios else math.nan
    raise ConvergenceError(
        f"Jost iteration stopped after {iteration} steps with update {change:.3e} (tol {tol:.1e})",
        last_ratio=last,
        residual=change,
    )


def _batches(count: int, grid: CylinderGrid):
    size = max(1, _BATCH_ELEMENTS // (grid.Nx * grid.Ny))
    for start in range(0, count, size):
        yield slice(start, min(count, start + size))


def _check_off_contour(z: complex, omega: float, margin_min: float) -> None:
    if _line_margin(z, omega) < margin_min * omega:
        raise ValueError(
            f"z = {z} is within {margin_min:g} omega of a line 2 Re z in omega Z*; use jost_boundary"
        )


def neumann_apply(
    u: Field,
    h: Field,
    z: SpectralPoint | complex,
    zero_row: str = "halfplane",
    kernel: str = "spectral",
    margin_min: float = MARGIN_MIN,
) -> Field:
    """Apply ``N_u`` to ``h`` at a point inside a strip.

    Mode by mode this is ``[analyze(u h)](m, xi) / P_z(m, xi)`` synthesized back,
    evaluated on the truncated y-line with exact boundary conditions.
    """
    _check_zero_mass(u)
    point = z if isinstance(z, SpectralPoint) else SpectralPoint(z, u.grid.omega)
    if point.contour is not None:
        raise ValueError("neumann_apply needs a point off the contours")
    _check_off_contour(point.z, u.grid.omega, margin_min)
    op = _JostOperator(u, np.array([point.z]), 0, kernel, zero_row)
    return Field(u.grid, op.apply(h.values.T[:, None, :])[:, 0, :].T)


def solve_jost_batch(
    u: Field,
    z,
    side=0,
    tol: float = 1e-13,
    max_iter: int = 200,
    kernel: str = "spectral",
    zero_row: str = "halfplane",
) -> _BatchResult:
    """Solve ``mu = 1 + N_u mu`` for many ``z`` at once; returns raw arrays.

    Points on a contour need ``side``; points inside strips should pass ``side=0``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    side_arr = np.broadcast_to(np.asarray(side, dtype=int), z.shape)
    mu = np.empty((z.size, u.grid.Nx, u.grid.Ny), dtype=complex)
    residual = np.empty(z.size)
    iterations = 0
    ratios: list[float] = []
    for sl in _batches(z.size, u.grid):
        op = _JostOperator(u, z[sl], side_arr[sl], kernel, zero_row)
        res = _iterate(op, tol, max_iter)
        mu[sl] = res.mu
        residual[sl] = res.residual
        iterations = max(iterations, res.iterations)
        if len(res.ratios) > len(ratios):
            ratios.extend([0.0] * (len(res.ratios) - len(ratios)))
        for i, r in enumerate(res.ratios):
            ratios[i] = max(ratios[i], r)
    return _BatchResult(mu, iterations, residual, ratios)


def solve_jost(
    u: Field,
    z: SpectralPoint | complex,
    tol: float = 1e-13,
    max_iter: int = 200,
    kernel: str = "spectral",
    zero_row: str = "halfplane",
    margin_min: float = MARGIN_MIN,
) -> JostSolution:
    """Jost function at one point inside a strip."""
    point = z if isinstance(z, SpectralPoint) else SpectralPoint(z, u.grid.omega)
    if point.contour is not None:
        raise ValueError("solve_jost needs a point off the contours; use jost_boundary")
    _check_off_contour(point.z, u.grid.omega, margin_min)
    small = smallness_report(u)
    res = solve_jost_batch(u, point.z, 0, tol, max_iter, kernel, zero_row)
    return JostSolution(
        point,
        Field(u.grid, res.mu[0]),
        res.iterations,
        float(res.residual[0]),
        res.ratios,
        outside_theory=not small.ok,
        method=f"strip/{kernel}",
    )


def default_offset(grid: CylinderGrid, n: int) -> float:
    """Offset used by the off-line limit: ``min(omega/64, 1 / (16 omega |n| Ly))``.

    The second bound keeps the width of the near-resonant mode
    (``2 omega |n| delta``) small compared with the inverse domain length.
    """
    return min(grid.omega / 64.0, 1.0 / (16.0 * grid.omega * abs(n) * grid.Ly))


def boundary_traces(
    u: Field,
    n: int,
    tau,
    side: int,
    method: str = "halfplane",
    kernel: str | None = None,
    delta: float | None = None,
    tol: float = 1e-13,
    max_iter: int = 200,
    zero_row: str = "halfplane",
) -> _BatchResult:
    """One-sided limits at ``z = -(omega/2) n + i tau`` for an array of ``tau``."""
    if n == 0:
        raise ValueError("contour index n must be nonzero")
    if side not in (1, -1):
        raise ValueError("side must be +1 or -1")
    grid = u.grid
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    z = -(grid.omega / 2.0) * n + 1j * tau
    if method == "halfplane":
        return solve_jost_batch(u, z, side, tol, max_iter, kernel or "scan", zero_row)
    if method == "offset":
        d = default_offset(grid, n) if delta is None else float(delta)
        if not 0 < d < grid.omega / 4:
            raise ValueError(f"offset delta must lie in (0, omega/4), got {d}")
        far = solve_jost_batch(u, z + side * d, 0, tol, max_iter, kernel or "spectral", zero_row)
        near = solve_jost_batch(u, z + side * d / 2, 0, tol, max_iter, kernel or "spectral", zero_row)
        mu = 2.0 * near.mu - far.mu
        ratios = [max(a, b) for a, b in zip(far.ratios, near.ratios)]
        return _BatchResult(mu, max(far.iterations, near.iterations), np.maximum(far.residual, near.residual), ratios)
    raise ValueError(f"method must be 'halfplane' or 'offset', got {method!r}")


def jost_boundary(
    u: Field,
    n: int,
    side: int | str,
    tau: float,
    method: str = "halfplane",
    kernel: str | None = None,
    delta: float | None = None,
    tol: float = 1e-13,
    max_iter: int = 200,
    zero_row: str = "halfplane",
) -> JostSolution:
    """One-sided limit ``mu_plus`` (``side=+1``) or ``mu_minus`` (``side=-1``) on ``L_n``."""
    side = {"plus": 1, "minus": -1, "+": 1, "-": -1}.get(side, side)
    small = smallness_report(u)
    res = boundary_traces(u, n, tau, side, method, kernel, delta, tol, max_iter, zero_row)
    point = SpectralPoint.on_contour(n, tau, side, u.grid.omega)
    return JostSolution(
        point,
        Field(u.grid, res.mu[0]),
        res.iterations,
        float(res.residual[0]),
        res.ratios,
        outside_theory=not small.ok,
        method=method,
    )


def compare_boundary_methods(
    u: Field, n: int, side: int, tau: float, cross_tol: float = 1e-3, **kwargs
) -> BoundaryComparison:
    """Compute a one-sided limit with both methods and compare them in sup norm.

    Agreement is judged relative to ``||mu||_inf``; disagreement is reported,
    not raised, and both solutions are returned.
    """
    offset = jost_boundary(u, n, side, tau, method="offset", **kwargs)
    halfplane = jost_boundary(u, n, side, tau, method="halfplane", **kwargs)
    diff = float(np.abs(offset.mu.values - halfplane.mu.values).max())
    scale = float(np.abs(halfplane.mu.values).max())
    return BoundaryComparison(offset, halfplane, diff, diff <= cross_tol * scale)


# --------------------------------------------------------------------------
# diagnostics


def _dx_spectral(grid: CylinderGrid, values: np.ndarray) -> np.ndarray:
    k = grid.omega * grid.fft_modes.astype(float)
    k[grid.Nx // 2] = 0.0
    return np.fft.ifft(1j * k[:, None] * np.fft.fft(values, axis=0), axis=0)


def extract_m1(
    u: Field,
    re_z: float | None = None,
    im_values: tuple[float, float] = (25.0, 50.0),
    tol: float = 1e-13,
) -> Field:
    """First coefficient of the large-``z`` expansion ``mu = 1 + m1/z + ...``.

    ``z (mu - 1)`` is sampled at two points on a vertical ray and extrapolated
    linearly in ``1/z`` to ``1/z = 0``.
    """
    grid = u.grid
    re_z = grid.omega / 4.0 if re_z is None else re_z
    zs = np.array([complex(re_z, im_values[0]), complex(re_z, im_values[1])])
    res = solve_jost_batch(u, zs, 0, tol)
    a1, a2 = (zs[:, None, None] * (res.mu - 1.0))
    h1, h2 = 1.0 / zs
    return Field(grid, (a1 * h2 - a2 * h1) / (h2 - h1))


def cauchy_riemann_residual(u: Field, z: complex, step: float, tol: float = 1e-13) -> float:
    """Sup of the centred-difference ``d mu / d conj(z)`` relative to ``sup |d mu / dz|``."""
    z = complex(z)
    stencil = z + step * np.array([1, -1, 1j, -1j])
    mu = solve_jost_batch(u, stencil, 0, tol).mu
    d_re = (mu[0] - mu[1]) / (2 * step)
    d_im = (mu[2] - mu[3]) / (2 * step)
    dzbar = 0.5 * (d_re + 1j * d_im)
    dz = 0.5 * (d_re - 1j * d_im)
    scale = float(np.abs(dz).max())
    return 0.0 if scale == 0 else float(np.abs(dzbar).max() / scale)


def _cr_center(z: complex, omega: float) -> complex:
    if z.real == 0.0:
        return complex(omega / 4.0, z.imag)
    return z


def jost_diagnostics(
    u: Field,
    sol: JostSolution,
    cr_step: float | None = None,
    strip_points: int = 33,
    strip_extent: float = 16.0,
    m1_im_values: tuple[float, float] = (25.0, 50.0),
) -> JostDiagnostics:
    """Decay, square-integrability, holomorphy and large-``z`` checks around ``sol``."""
    grid = u.grid
    omega = grid.omega
    deviation = np.abs(sol.mu.values - 1.0)
    y_decay = float((np.abs(grid.y)[None, :] * deviation).max())
    zero_row = float(np.abs(analyze(Field(grid, u.values * sol.mu.values)).mode_row(0)).max())
    z = sol.z.z
    if np.abs(u.values).max() == 0:
        return JostDiagnostics(y_decay, 0.0, 0.0, zero_row, Field(grid, np.zeros_like(u.values)), 0.0)

    # holomorphy is checked strictly inside a strip
    center = _cr_center(z if sol.z.contour is None else z + sol.z.side * omega / 4.0, omega)
    room = min(_line_margin(center, omega), abs(center.real) if center.real else math.inf)
    step = min(cr_step or omega / 16.0, room / 2.0)
    cr = cauchy_riemann_residual(u, center, step)

    re_line = center.real
    ims = np.linspace(-strip_extent, strip_extent, strip_points)
    line = solve_jost_batch(u, re_line + 1j * ims, 0).mu
    strip_l2 = float(np.trapezoid(np.abs(line - 1.0) ** 2, ims, axis=0).max())

    m1 = extract_m1(u, im_values=m1_im_values)
    u_rec = -2j * _dx_spectral(grid, m1.values)
    u_norm = np.linalg.norm(u.values)
    m1_err = float(np.linalg.norm(u.values - u_rec) / u_norm)
    return JostDiagnostics(y_decay, strip_l2, cr, zero_row, m1, m1_err)
