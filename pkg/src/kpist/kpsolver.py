"""Solution pipelines for KP-II on the cylinder.

Two independent routes to ``u(x, y, t)``:

* :func:`ist_solve`: forward transform, phase evolution of the spectral data,
  then the inverse transform at each requested time.
* :func:`pde_solve`: a Strang split-step pseudo-spectral integrator of::

      u_t = -3 (u^2)_x - u_xxx - 3 d_x^{-1} u_yy

  with the linear part advanced exactly in Fourier space and the quadratic
  part by an explicit midpoint rule in physical space.

Agreement of the two is the main end-to-end check of the package.
"""

from __future__ import annotations

import math
import platform
from dataclasses import asdict, dataclass, field

import numpy as np

from .cylinder import CylinderGrid, Field, analyze, make_grid
from .heatjost import smallness_report
from .inverse import BoundaryTraceSet, InverseConfig, reconstruct_u, solve_inverse
from .spectral import SpectralData, decay_report, evolve, forward_transform, make_contours

__all__ = [
    "BlowUpError",
    "PdeConfig",
    "PdeResult",
    "RunManifest",
    "IstResult",
    "dispersion",
    "pde_solve",
    "ist_solve",
    "compare",
    "reference_potential",
    "builtin_potential",
    "POTENTIAL_FAMILIES",
]


class BlowUpError(RuntimeError):
    """The split-step solution grew beyond the guard."""


@dataclass(frozen=True)
class PdeConfig:
    dt: float = 1e-3
    t_end: float = 0.2
    scheme: str = "strang"
    dealias: bool = True
    growth_limit: float = 100.0

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= 0:
            raise ValueError("t_end must be nonnegative")
        if self.scheme != "strang":
            raise ValueError(f"unsupported scheme {self.scheme!r}; only 'strang' is implemented")


@dataclass
class PdeResult:
    field: Field
    times: np.ndarray
    trajectory: list[Field]
    max_mass_ratio: float
    steps: int


def dispersion(m, xi, omega: float):
    """Linear frequency of mode ``(m, xi)``: ``(omega m)^3 - 3 xi^2 / (omega m)``.

    A solution ``exp(i omega m x + i xi y)`` of the linearized equation evolves
    as ``exp(i * dispersion * t)``.
    """
    m_arr = np.asarray(m)
    if np.any(m_arr == 0):
        raise ValueError("the dispersion relation is undefined for m = 0")
    k = omega * m_arr
    return k**3 - 3.0 * np.asarray(xi) ** 2 / k


class _SplitStep:
    def __init__(self, grid: CylinderGrid, cfg: PdeConfig, dt: float):
        self.grid = grid
        k = grid.omega * grid.fft_modes.astype(float)
        xi = grid.fft_xi
        safe = np.where(k == 0, 1.0, k)
        symbol = np.where(k[:, None] == 0, 0.0, safe[:, None] ** 3 - 3.0 * xi[None, :] ** 2 / safe[:, None])
        self.linear = np.exp(1j * symbol * dt)
        self.linear[k == 0, :] = 0.0
        dk = 1j * k
        dk[grid.Nx // 2] = 0.0
        self.dx = dk[:, None]
        if cfg.dealias:
            keep_x = np.abs(grid.fft_modes) < grid.Nx / 3.0
            keep_y = np.abs(np.fft.fftfreq(grid.Ny, 1.0 / grid.Ny)) < grid.Ny / 3.0
            self.filter = np.outer(keep_x, keep_y).astype(float)
        else:
            self.filter = np.ones((grid.Nx, grid.Ny))
        self.half = 0.5 * dt

    def nonlinear(self, u: np.ndarray) -> np.ndarray:
        """``-3 (u^2)_x`` with the product dealiased."""
        sq = np.fft.fft2(u * u) * self.filter
        return np.real(np.fft.ifft2(-3.0 * self.dx * sq))

    def nonlinear_half(self, u: np.ndarray) -> np.ndarray:
        h = self.half
        mid = u + 0.5 * h * self.nonlinear(u)
        return u + h * self.nonlinear(mid)

    def step(self, u: np.ndarray) -> tuple[np.ndarray, float]:
        u = self.nonlinear_half(u)
        spectrum = np.fft.fft2(u) * self.linear
        u = np.real(np.fft.ifft2(spectrum))
        u = self.nonlinear_half(u)
        mass = float(np.abs(np.fft.fft(u.mean(axis=0))).max())
        return u, mass


def pde_solve(u0: Field, cfg: PdeConfig, keep_every: int = 0) -> PdeResult:
    """Integrate KP-II from ``u0`` to ``cfg.t_end`` with the split-step scheme.

    ``keep_every > 0`` stores every that many steps in the trajectory.  The
    zero-mass defect is monitored at every step and returned as
    ``max_mass_ratio = max_t max_xi |u_hat(0, xi)| / ||u0||_2``.
    """
    grid = u0.grid
    u = np.real(u0.values).astype(float)
    if u0.kind != "real" and np.abs(u0.values.imag).max() > 1e-12 * max(np.abs(u0.values).max(), 1e-300):
        raise ValueError("initial data must be real")
    scale = float(np.abs(u).max())
    if scale and np.abs(u.mean(axis=0)).max() > 1e-12 * scale:
        raise ValueError("initial data must satisfy the zero-mass constraint")
    steps = int(round(cfg.t_end / cfg.dt))
    if steps and abs(steps * cfg.dt - cfg.t_end) > 1e-9 * cfg.t_end:
        raise ValueError("t_end must be an integer multiple of dt")
    if cfg.dt * scale >= 0.5:
        raise ValueError(f"dt * max|u0| = {cfg.dt * scale:.3g} violates the nonlinear step bound 0.5")
    stepper = _SplitStep(grid, cfg, cfg.dt)
    l2 = float(np.sqrt((u**2).sum() * grid.dx * grid.dy))
    times = [0.0]
    trajectory = [Field(grid, u.copy(), "real")] if keep_every else []
    # |u_hat(0, xi)| is dy times the y-DFT of the row means
    worst = grid.dy * float(np.abs(np.fft.fft(u.mean(axis=0))).max())
    for step in range(1, steps + 1):
        u, mass = stepper.step(u)
        worst = max(worst, grid.dy * mass)
        peak = float(np.abs(u).max())
        if not math.isfinite(peak) or (scale and peak > cfg.growth_limit * scale):
            raise BlowUpError(f"sup norm grew from {scale:.3e} to {peak:.3e} by step {step}")
        if peak * cfg.dt >= 0.5:
            raise BlowUpError(f"dt * max|u| reached {peak * cfg.dt:.3g} at step {step}")
        if keep_every and step % keep_every == 0:
            times.append(step * cfg.dt)
            trajectory.append(Field(grid, u.copy(), "real"))
    ratio = 0.0 if l2 == 0 else worst / l2
    return PdeResult(Field(grid, u, "real"), np.array(times), trajectory, ratio, steps)


@dataclass
class RunManifest:
    """Everything needed to reproduce a run."""

    ell: float = math.pi
    Nx: int = 32
    Ny: int = 256
    Ly: float = 12.0
    n_max: int = 3
    forward_method: str = "halfplane"
    forward_kernel: str = "scan"
    jost_tol: float = 1e-13
    inverse: InverseConfig = field(default_factory=InverseConfig)
    dt: float = 1e-3
    times: tuple = (0.0,)
    potential: str = "cosgauss"
    amplitude: float = 0.02
    seed: int = 0
    versions: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.versions:
            self.versions = {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "kpist": _package_version(),
            }

    @property
    def orientation(self) -> int:
        return self.inverse.orientation

    def grid(self) -> CylinderGrid:
        return make_grid(self.ell, self.Nx, self.Ny, self.Ly)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["times"] = list(self.times)
        data["orientation"] = self.orientation
        return data


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:
        return "unknown"


@dataclass
class IstResult:
    fields: list[Field]
    times: list[float]
    data: SpectralData
    traces: list[BoundaryTraceSet]


def ist_solve(u0: Field, times, manifest: RunManifest | None = None, data: SpectralData | None = None) -> IstResult:
    """Solve by the inverse spectral transform at each time in ``times``.

    ``data`` may carry precomputed forward data of ``u0`` to skip the forward stage.
    """
    manifest = manifest or RunManifest(ell=u0.grid.ell, Nx=u0.grid.Nx, Ny=u0.grid.Ny, Ly=u0.grid.Ly)
    if data is None:
        small = smallness_report(u0)
        if not small.ok:
            raise ValueError(f"forward stage: potential outside the small-data region (ratio {small.ratio:.3f})")
        contours = make_contours(u0.grid, manifest.n_max)
        data = forward_transform(
            u0, contours, manifest.forward_method, manifest.forward_kernel, tol=manifest.jost_tol
        )
    margin = decay_report(data).forward_margin
    if not margin < 1.0:
        raise ValueError(f"inverse stage: spectral data too large (margin {margin:.3f})")
    fields, traces = [], []
    for t in times:
        Ft = evolve(data, float(t))
        W = solve_inverse(Ft, manifest.inverse)
        fields.append(reconstruct_u(Ft, W))
        traces.append(W)
    return IstResult(fields, [float(t) for t in times], data, traces)


def compare(a: Field, b: Field) -> dict:
    """Relative discrepancies, normalised by the larger of the two norms."""
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")
    diff = a.values - b.values
    out = {}
    for name, fn in (
        ("l2_rel", np.linalg.norm),
        ("linf_rel", lambda v: np.abs(v).max(initial=0.0)),
    ):
        scale = max(fn(a.values), fn(b.values))
        out[name] = 0.0 if scale == 0 else float(fn(diff) / scale)
    ca, cb = analyze(a).values, analyze(b).values
    scale = max(np.linalg.norm(ca), np.linalg.norm(cb))
    out["spectral_l2_rel"] = 0.0 if scale == 0 else float(np.linalg.norm(ca - cb) / scale)
    return out


def _cosgauss(X, Y, omega):
    return np.cos(omega * X) * np.exp(-(Y**2))


def _twomode(X, Y, omega):
    return (np.cos(omega * X) + 0.5 * np.sin(2 * omega * X)) * np.exp(-(Y**2) / 2.0)


def _zero(X, Y, omega):
    return np.zeros_like(X)


POTENTIAL_FAMILIES = {"cosgauss": _cosgauss, "twomode": _twomode, "zero": _zero}


def builtin_potential(grid: CylinderGrid, family: str = "cosgauss", amplitude: float = 0.02) -> Field:
    """A named smooth zero-mass potential scaled by ``amplitude``."""
    try:
        shape = POTENTIAL_FAMILIES[family]
    except KeyError:
        raise ValueError(f"unknown potential family {family!r}; choose from {sorted(POTENTIAL_FAMILIES)}") from None
    X, Y = grid.mesh()
    return Field(grid, amplitude * shape(X, Y, grid.omega), "real")


def reference_potential(grid: CylinderGrid, amplitude: float = 0.02) -> Field:
    """``amplitude * cos(omega x) * exp(-y^2)``."""
    return builtin_potential(grid, "cosgauss", amplitude)

