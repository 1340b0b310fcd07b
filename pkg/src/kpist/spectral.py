"""Spectral data of a potential and its linear time evolution.

The Jost function jumps across each line ``L_n: Re z = -(omega/2) n``; the
size of the jump is a scalar ``F(z)``, the spectral data.  On ``L_n`` it is
sampled through the parametrization::

    zeta(n, xi) = -(omega/2) n - i xi / (2 omega n)

whose inverse is ``r0(z) = (-2 Re z / omega, 4 Re z Im z)``.  With ``xi`` on the
cylinder grid every sample lands on a grid frequency, and

    G[n, xi] = F(zeta(n, xi)) = sgn(n) * [analyze(u * mu_plus)](n, xi).

For small ``u`` this is ``sgn(n) * u_hat(n, xi)`` to first order, so ``G`` is a
nonlinear Fourier transform of the potential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cylinder import CylinderGrid, Field, basic_lemma_constant
from .heatjost import ConvergenceError, boundary_traces, smallness_report

__all__ = [
    "ContourGrid",
    "SpectralData",
    "DecayReport",
    "r0",
    "zeta",
    "make_contours",
    "contour_coefficient",
    "forward_transform",
    "jump_residual",
    "decay_report",
    "evolve",
    "evolution_phase",
]


def r0(z: complex, omega: float) -> tuple[float, float]:
    """Nontrivial root of ``P_z``: the cylinder point ``(m, xi)`` attached to ``z``."""
    z = complex(z)
    return (-2.0 * z.real / omega, 4.0 * z.real * z.imag)


def zeta(n, xi, omega: float):
    """Contour point ``-(omega/2) n - i xi / (2 omega n)``; vectorised over ``n`` and ``xi``."""
    n_arr = np.asarray(n)
    if np.any(n_arr == 0):
        raise ValueError("zeta is undefined on n = 0")
    return -(omega / 2.0) * n - 1j * np.asarray(xi) / (2.0 * omega * n)


@dataclass(frozen=True)
class ContourGrid:
    """Contours ``L_n`` for ``0 < |n| <= n_max``, each sampled at the grid frequencies."""

    grid: CylinderGrid
    n_max: int

    def __post_init__(self) -> None:
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be a positive integer, got {self.n_max!r}")
        if 2 * self.n_max >= self.grid.Nx // 2:
            raise ValueError("n_max too large for the x resolution (need 2 n_max < Nx/2)")

    @property
    def omega(self) -> float:
        return self.grid.omega

    @property
    def ns(self) -> np.ndarray:
        return np.array([n for n in range(-self.n_max, self.n_max + 1) if n != 0])

    @property
    def xi(self) -> np.ndarray:
        return self.grid.xi

    def row(self, n: int) -> int:
        if n == 0 or abs(n) > self.n_max:
            raise KeyError(f"contour n = {n} not in this grid")
        return n + self.n_max if n < 0 else n + self.n_max - 1

    def tau_im(self, n: int) -> np.ndarray:
        """``Im zeta(n, xi_k)`` for every grid frequency."""
        return -self.grid.xi / (2.0 * self.omega * n)

    def points(self, n: int) -> np.ndarray:
        return zeta(n, self.grid.xi, self.omega)


def make_contours(grid: CylinderGrid, n_max: int = 3) -> ContourGrid:
    return ContourGrid(grid, int(n_max))


@dataclass
class SpectralData:
    """Samples ``G[row(n), k] = F(zeta(n, xi_k))`` of the spectral data."""

    contours: ContourGrid
    G: np.ndarray
    time: float = 0.0
    provenance: str = "forward"
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.G = np.asarray(self.G, dtype=complex)
        expected = (2 * self.contours.n_max, self.contours.grid.Ny)
        if self.G.shape != expected:
            raise ValueError(f"G has shape {self.G.shape}, expected {expected}")

    @property
    def grid(self) -> CylinderGrid:
        return self.contours.grid

    def row(self, n: int) -> np.ndarray:
        return self.G[self.contours.row(n)]

    def value(self, n: int, xi: float) -> complex:
        return complex(self.G[self.contours.row(n), self.grid.xi_index(xi)])

    @classmethod
    def zeros(cls, contours: ContourGrid) -> "SpectralData":
        return cls(contours, np.zeros((2 * contours.n_max, contours.grid.Ny), dtype=complex))


@dataclass(frozen=True)
class DecayReport:
    sup_bound: dict
    l2_bound: dict
    lambda_norm: float
    gamma_c: float
    forward_margin: float
    wzeta2: float
    tail_sup: float


def contour_coefficient(grid: CylinderGrid, products: np.ndarray, n: int, xi) -> np.ndarray:
    """``[analyze(p_b)](n, xi_b)`` for a stack of fields ``p_b``; ``xi`` may be off-grid."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    phase_x = np.exp(-1j * grid.omega * n * grid.x)
    phase_y = np.exp(-1j * xi[:, None] * grid.y[None, :])
    rows = np.einsum("bjk,j->bk", products, phase_x)
    return (grid.dy / grid.Nx) * np.einsum("bk,bk->b", rows, phase_y)


def forward_transform(
    u: Field,
    contours: ContourGrid,
    method: str = "halfplane",
    kernel: str | None = None,
    tol: float = 1e-13,
    max_iter: int = 200,
    zero_row: str = "halfplane",
    chunk: int = 64,
    force: bool = False,
) -> SpectralData:
    """Spectral data of ``u`` on every stored contour sample.

    Samples whose Jost iteration fails are stored as NaN and listed in
    ``meta["failed"]``; the transform itself does not raise for them.
    """
    if u.grid != contours.grid:
        raise ValueError("potential and contours use different grids")
    small = smallness_report(u)
    if not small.ok and not force:
        raise ValueError(f"potential outside the small-data region (ratio {small.ratio:.3f}); pass force=True")
    grid = u.grid
    G = np.zeros((2 * contours.n_max, grid.Ny), dtype=complex)
    failed: list[tuple[int, int]] = []
    iterations = 0
    if np.abs(u.values).max() > 0:
        for n in contours.ns:
            tau = contours.tau_im(n)
            for start in range(0, grid.Ny, chunk):
                ks = np.arange(start, min(grid.Ny, start + chunk))
                try:
                    res = boundary_traces(u, int(n), tau[ks], +1, method, kernel, None, tol, max_iter, zero_row)
                except ConvergenceError:
                    G[contours.row(n), ks] = np.nan
                    failed.extend((int(n), int(k)) for k in ks)
                    continue
                iterations = max(iterations, res.iterations)
                coeff = contour_coefficient(grid, u.values[None] * res.mu, int(n), grid.xi[ks])
                G[contours.row(n), ks] = np.sign(n) * coeff
    meta = {
        "method": method,
        "kernel": kernel or ("scan" if method == "halfplane" else "spectral"),
        "zero_row": zero_row,
        "tol": tol,
        "iterations": iterations,
        "smallness_ratio": small.ratio,
        "failed": failed,
    }
    return SpectralData(contours, G, 0.0, "forward", meta)


def jump_residual(
    u: Field,
    F: SpectralData | None,
    samples,
    method: str = "halfplane",
    kernel: str | None = None,
    tol: float = 1e-13,
    zero_row: str = "halfplane",
    floor: float = 1e-300,
) -> list[float]:
    """Relative defect of the shifted jump relation at each ``(n, xi)`` sample.

    The relation is ``mu_plus - mu_minus = F e^{i omega n x + i xi y} mu_minus(-conj z)``
    at ``z = zeta(n, xi)``; the shifted point ``-conj z = zeta(-n, -xi)`` lies on
    ``L_{-n}`` at the same height.  ``F`` is read from the stored data when
    ``xi`` is a grid frequency and otherwise computed from ``mu_plus`` by direct
    quadrature.
    """
    grid = u.grid
    omega = grid.omega
    X, Y = grid.mesh()
    out = []
    for n, xi in samples:
        n = int(n)
        tau = -xi / (2.0 * omega * n)
        plus = boundary_traces(u, n, tau, +1, method, kernel, tol=tol, zero_row=zero_row).mu[0]
        minus = boundary_traces(u, n, tau, -1, method, kernel, tol=tol, zero_row=zero_row).mu[0]
        shifted = boundary_traces(u, -n, tau, -1, method, kernel, tol=tol, zero_row=zero_row).mu[0]
        value = None
        if F is not None:
            try:
                value = F.value(n, xi)
            except (KeyError, ValueError):
                value = None
        if value is None:
            value = np.sign(n) * contour_coefficient(grid, (u.values * plus)[None], n, xi)[0]
        jump = plus - minus
        predicted = value * np.exp(1j * (omega * n * X + xi * Y)) * shifted
        out.append(float(np.abs(jump - predicted).max() / (np.abs(jump).max() + floor)))
    return out


def decay_report(F: SpectralData) -> DecayReport:
    """Decay and smallness measures of sampled spectral data."""
    cg = F.contours
    grid = cg.grid
    omega = grid.omega
    sup_bound, l2_bound = {}, {}
    l2_weighted = 0.0
    sup_all = 0.0
    wz = 0.0
    for n in cg.ns:
        row = np.abs(F.row(int(n)))
        dtau = grid.dxi / (2.0 * omega * abs(n))
        sup_n = float(row.max())
        sup_bound[int(n)] = n**2 * sup_n
        l2_bound[int(n)] = float(n**4 * dtau * np.sum(row**2))
        l2_weighted += float(dtau * np.sum(row**2) * omega * abs(n) / 2.0)
        sup_all = max(sup_all, sup_n)
        bracket = 1.0 + n**2 + grid.xi**2
        wz = max(wz, float(np.max(bracket * row)))
    C = basic_lemma_constant(omega)
    lam = C * max(2.0 * math.sqrt(l2_weighted), sup_all)
    c = max(sup_bound.values(), default=0.0)
    tail_c = max(sup_bound[cg.n_max], sup_bound[-cg.n_max])
    tail = 2.0 * tail_c * (math.pi**2 / 6.0 - sum(1.0 / k**2 for k in range(1, cg.n_max + 1)))
    return DecayReport(
        sup_bound=sup_bound,
        l2_bound=l2_bound,
        lambda_norm=lam,
        gamma_c=c * math.pi**2 / 3.0,
        forward_margin=lam / (2.0 * math.pi),
        wzeta2=wz,
        tail_sup=tail,
    )


def evolution_phase(contours: ContourGrid, t: float) -> np.ndarray:
    """``-8 (sigma^3 - 3 sigma tau^2) t`` at every sample, ``zeta = sigma + i tau``."""
    omega = contours.omega
    ns = contours.ns.astype(float)[:, None]
    sigma = -(omega / 2.0) * ns
    tau = -contours.grid.xi[None, :] / (2.0 * omega * ns)
    return -8.0 * (sigma**3 - 3.0 * sigma * tau**2) * t


def evolve(F: SpectralData, t: float) -> SpectralData:
    """Advance spectral data by time ``t``: a unimodular phase per sample."""
    if not t >= 0:
        raise ValueError(f"t must be nonnegative, got {t!r}")
    phase = evolution_phase(F.contours, t)
    G = F.G * (np.cos(phase) + 1j * np.sin(phase))
    return SpectralData(F.contours, G, F.time + t, "evolved", dict(F.meta))
