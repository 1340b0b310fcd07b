"""Grids, Fourier analysis and norms on the cylinder.

The physical domain is ``[-ell, ell) x R`` (periodic in x, decaying in y);
the y line is truncated to ``[-Ly, Ly)`` and sampled uniformly, so every
transform below is a DFT with trapezoid weights.  The dual lattice is
``Z x R``: integer x-modes ``m`` paired with a continuous y-frequency ``xi``.

Conventions::

    u_hat(m, xi) = 1/(2 ell) * int int u(x, y) exp(-i omega m x - i xi y) dx dy
    u(x, y)      = 1/(2 pi) * sum_m int u_hat(m, xi) exp(i omega m x + i xi y) dxi

with ``omega = pi / ell``.  Coefficient arrays are stored in centred order:
row ``i`` is mode ``m = i - Nx/2`` and column ``k`` is ``xi = (k - Ny/2) * pi/Ly``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "CylinderGrid",
    "Field",
    "SpectralCoeffs",
    "NormReport",
    "BasicLemmaReport",
    "GridError",
    "make_grid",
    "analyze",
    "synthesize",
    "zero_mass_project",
    "convolve",
    "norms",
    "basic_lemma_constant",
    "basic_lemma_report",
]


class GridError(ValueError):
    """Raised for invalid grid parameters or mismatched grids."""


@dataclass(frozen=True)
class CylinderGrid:
    """Uniform sampling of ``[-ell, ell) x [-Ly, Ly)`` and its dual lattice."""

    ell: float
    Nx: int
    Ny: int
    Ly: float

    def __post_init__(self) -> None:
        for name in ("Nx", "Ny"):
            count = getattr(self, name)
            if int(count) != count or count < 4 or count % 2:
                raise GridError(f"{name} must be an even integer >= 4, got {count!r}")
        if not (self.ell > 0 and math.isfinite(self.ell)):
            raise GridError(f"ell must be positive, got {self.ell!r}")
        if not (self.Ly > 0 and math.isfinite(self.Ly)):
            raise GridError(f"Ly must be positive, got {self.Ly!r}")

    @property
    def omega(self) -> float:
        return math.pi / self.ell

    @property
    def dx(self) -> float:
        return 2.0 * self.ell / self.Nx

    @property
    def dy(self) -> float:
        return 2.0 * self.Ly / self.Ny

    @property
    def dxi(self) -> float:
        """Spacing of the y-frequency grid, ``pi / Ly``."""
        return math.pi / self.Ly

    @cached_property
    def x(self) -> np.ndarray:
        return -self.ell + np.arange(self.Nx) * self.dx

    @cached_property
    def y(self) -> np.ndarray:
        return -self.Ly + np.arange(self.Ny) * self.dy

    @cached_property
    def modes(self) -> np.ndarray:
        """Centred x-mode integers ``-Nx/2 .. Nx/2-1``."""
        return np.arange(-self.Nx // 2, self.Nx // 2)

    @cached_property
    def xi(self) -> np.ndarray:
        """Centred y-frequencies ``(pi/Ly) * (-Ny/2 .. Ny/2-1)``."""
        return np.arange(-self.Ny // 2, self.Ny // 2) * self.dxi

    @cached_property
    def fft_modes(self) -> np.ndarray:
        """x-mode integers in numpy FFT order."""
        return np.fft.ifftshift(self.modes)

    @cached_property
    def fft_xi(self) -> np.ndarray:
        """y-frequencies in numpy FFT order."""
        return np.fft.ifftshift(self.xi)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` arrays of shape ``(Nx, Ny)``."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    def xi_index(self, xi: float) -> int:
        """Centred column index of a grid frequency; raises if ``xi`` is off-grid."""
        k = xi / self.dxi + self.Ny // 2
        kr = int(round(k))
        if abs(k - kr) > 1e-9 or not 0 <= kr < self.Ny:
            raise GridError(f"xi = {xi!r} is not a grid frequency")
        return kr

    @cached_property
    def _sign_pattern(self) -> np.ndarray:
        # exp(-i omega m x_0 - i xi_k y_0) = (-1)^(m + k) because x_0 = -ell, y_0 = -Ly
        sx = np.where(self.modes % 2 == 0, 1.0, -1.0)
        sy = np.where((np.arange(self.Ny) - self.Ny // 2) % 2 == 0, 1.0, -1.0)
        return np.outer(sx, sy)


@dataclass
class Field:
    """Complex samples ``values[j, k] = f(x_j, y_k)`` on a grid."""

    grid: CylinderGrid
    values: np.ndarray
    kind: str = "complex"
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.Nx, self.grid.Ny):
            raise GridError(
                f"field shape {self.values.shape} does not match grid "
                f"({self.grid.Nx}, {self.grid.Ny})"
            )
        if self.kind not in ("real", "complex"):
            raise ValueError(f"kind must be 'real' or 'complex', got {self.kind!r}")

    @property
    def boundary_residual(self) -> float:
        """Largest modulus on the two outermost y rows."""
        return float(max(np.abs(self.values[:, 0]).max(), np.abs(self.values[:, -1]).max()))

    def imag_ratio(self) -> float:
        scale = np.abs(self.values).max()
        return 0.0 if scale == 0 else float(np.abs(self.values.imag).max() / scale)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.kind, dict(self.meta))


@dataclass
class SpectralCoeffs:
    """Fourier coefficients ``values[i, k] = u_hat(m_i, xi_k)`` in centred order."""

    grid: CylinderGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.Nx, self.grid.Ny):
            raise GridError(
                f"coefficient shape {self.values.shape} does not match grid "
                f"({self.grid.Nx}, {self.grid.Ny})"
            )

    def mode_row(self, m: int) -> np.ndarray:
        return self.values[m + self.grid.Nx // 2]


@dataclass(frozen=True)
class NormReport:
    l1: float
    l2: float
    linf: float
    trinorm: float
    plancherel_residual: float


@dataclass(frozen=True)
class BasicLemmaReport:
    lhs: float
    rhs: float
    C: float
    tail_slack: float
    satisfied: bool


def make_grid(ell: float, Nx: int, Ny: int, Ly: float) -> CylinderGrid:
    """Build a grid, validating counts (even, >= 4) and lengths (positive)."""
    counts = []
    for name, count in (("Nx", Nx), ("Ny", Ny)):
        if int(count) != count:
            raise GridError(f"{name} must be an integer, got {count!r}")
        counts.append(int(count))
    return CylinderGrid(float(ell), counts[0], counts[1], float(Ly))


def analyze(f: Field) -> SpectralCoeffs:
    """Cylinder Fourier transform with trapezoid (DFT) weights."""
    grid = f.grid
    raw = np.fft.fftshift(np.fft.fft2(f.values))
    return SpectralCoeffs(grid, raw * (grid.dy / grid.Nx) * grid._sign_pattern)


def synthesize(c: SpectralCoeffs) -> Field:
    """Inverse of :func:`analyze` on the grid."""
    grid = c.grid
    raw = np.fft.ifftshift(c.values * grid._sign_pattern)
    return Field(grid, np.fft.ifft2(raw) * (grid.Nx / grid.dy))


def zero_mass_project(f: Field) -> Field:
    """Remove the x-mean on every y row (the m = 0 Fourier row)."""
    values = f.values - f.values.mean(axis=0, keepdims=True)
    return Field(f.grid, values, f.kind, dict(f.meta))


def _check_same_grid(a, b) -> None:
    if a.grid != b.grid:
        raise GridError("operands live on different grids")


def convolve(a: SpectralCoeffs, b: SpectralCoeffs) -> SpectralCoeffs:
    """Cylinder convolution ``sum_m' int a(m-m', xi-xi') b(m', xi') dxi'``.

    Evaluated as a product in physical space; on the grid it is the cyclic
    convolution with weight ``dxi``, so ``analyze(u*h) == convolve(u_hat, h_hat)/(2 pi)``.
    """
    _check_same_grid(a, b)
    product = synthesize(a).values * synthesize(b).values
    out = analyze(Field(a.grid, product))
    return SpectralCoeffs(a.grid, 2.0 * math.pi * out.values)


def _field_norms(grid: CylinderGrid, values: np.ndarray) -> tuple[float, float, float]:
    mod = np.abs(values)
    cell = grid.dx * grid.dy
    return float(mod.sum() * cell), float(math.sqrt((mod**2).sum() * cell)), float(mod.max(initial=0.0))


def _coeff_norms(grid: CylinderGrid, values: np.ndarray) -> tuple[float, float, float]:
    mod = np.abs(values)
    return (
        float(mod.sum() * grid.dxi),
        float(math.sqrt((mod**2).sum() * grid.dxi)),
        float(mod.max(initial=0.0)),
    )


def norms(obj: Field | SpectralCoeffs) -> NormReport:
    """Quadrature norms of a field (or of coefficients on the cylinder).

    For a field, ``l1/l2/linf`` are the usual norms on the truncated domain and
    ``trinorm = max(omega*l1, sqrt(omega)*l2)``.  For coefficients they are the
    ``L^p`` norms on ``Z x R`` (sum over m, ``dxi``-weighted sum over xi) and
    ``trinorm`` is computed from the synthesized field.  In both cases
    ``plancherel_residual`` compares ``||u_hat||_2`` with ``sqrt(omega) ||u||_2``.
    """
    grid = obj.grid
    if isinstance(obj, Field):
        field_values = obj.values
        coeff_values = analyze(obj).values
        l1, l2, linf = _field_norms(grid, field_values)
        fl1, fl2 = l1, l2
    elif isinstance(obj, SpectralCoeffs):
        coeff_values = obj.values
        field_values = synthesize(obj).values
        l1, l2, linf = _coeff_norms(grid, coeff_values)
        fl1, fl2, _ = _field_norms(grid, field_values)
    else:
        raise TypeError(f"expected Field or SpectralCoeffs, got {type(obj).__name__}")
    coeff_l2 = _coeff_norms(grid, coeff_values)[1]
    residual = 0.0 if coeff_l2 == 0 else abs(coeff_l2 - math.sqrt(grid.omega) * fl2) / coeff_l2
    trinorm = max(grid.omega * fl1, math.sqrt(grid.omega) * fl2)
    return NormReport(l1, l2, linf, trinorm, residual)


def basic_lemma_constant(omega: float) -> float:
    """``4 pi^2 / (3 omega^2) + (pi/omega) sqrt(pi/3)``."""
    return 4.0 * math.pi**2 / (3.0 * omega**2) + (math.pi / omega) * math.sqrt(math.pi / 3.0)


def _line_offset(z: complex, omega: float) -> float:
    """Distance from ``Re z`` to the nearest line ``Re z = (omega/2) k`` with ``k != 0``."""
    half = omega / 2.0
    k = round(z.real / half)
    candidates = [k - 1, k, k + 1]
    return min(abs(z.real - half * c) for c in candidates if c != 0)


def basic_lemma_report(f: SpectralCoeffs, z: complex, tail_slack: float = 0.05) -> BasicLemmaReport:
    """Evaluate both sides of the basic resolvent bound for data ``f`` at ``z``.

    ``lhs = sum_{m != 0} sum_k dxi |f(m, xi_k) / P_z(m, xi_k)|`` and
    ``rhs = C * max(||f||_2, ||f||_inf)``.  ``f`` is taken to vanish off the grid,
    so the only slack needed is for the quadrature of ``1/|P_z|`` near its
    minimum; ``tail_slack`` sets it.
    """
    grid = f.grid
    z = complex(z)
    if _line_offset(z, grid.omega) < 1e-12 * grid.omega:
        raise ValueError(f"z = {z} lies on a forbidden line 2 Re z in omega Z*")
    scale = np.abs(f.values).max(initial=0.0)
    if np.abs(f.mode_row(0)).max() > 1e-12 * scale:
        raise ValueError("the m = 0 row of f must vanish")
    m = grid.modes[:, None].astype(float)
    pz = (grid.omega * m) ** 2 + 2.0 * grid.omega * m * z + 1j * grid.xi[None, :]
    mask = grid.modes != 0
    lhs = float(np.sum(np.abs(f.values[mask] / pz[mask])) * grid.dxi)
    _, l2, linf = _coeff_norms(grid, f.values)
    C = basic_lemma_constant(grid.omega)
    rhs = C * max(l2, linf)
    return BasicLemmaReport(lhs, rhs, C, tail_slack, lhs <= rhs * (1.0 + tail_slack))
