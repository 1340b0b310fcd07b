"""Inverse transform: from spectral data back to the potential.

Given samples ``G[n, xi] = F(zeta(n, xi))``, the Jost function is recovered
from the Cauchy-integral equation::

    mu(z) = 1 + sum_n int  o_n G(n, xi) / P_z(n, xi)
                 * exp(i omega n x + i xi y) * mu_minus(-conj zeta(n, xi))  dxi / (2 pi)

with ``o_n = orientation * sgn(n)`` the traversal sign of ``L_n``.  The unknowns
are the left traces ``W[n, xi] = mu_minus(zeta(n, xi))``; the shift
``-conj zeta(n, xi) = zeta(-n, -xi)`` maps every sample to another sample, so
the traces close on themselves and no interpolation in ``z`` is needed.

Evaluating the equation on the contours themselves requires a side limit of
a Cauchy integral.  The default ``side_limit="plemelj"`` uses the discrete
Plemelj formula: a punctured principal-value sum, its derivative correction
and the half residue.  ``side_limit="offset"`` instead evaluates slightly off
the contour and Richardson-extrapolates; it is kept for comparison, and it is
only accurate when the offset is large compared with the sample spacing,
which in turn spoils the extrapolation.

The potential follows from the traces by::

    u = (1/pi) d/dx sum_n int o_n (-i / (2 omega n)) G W_shift exp(i omega n x + i xi y) dxi
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cylinder import Field, analyze, norms, zero_mass_project
from .heatjost import ConvergenceError
from .spectral import ContourGrid, SpectralData, decay_report, zeta

__all__ = [
    "CALIBRATED_ORIENTATION",
    "InverseConfig",
    "ActiveSet",
    "BoundaryTraceSet",
    "L1Diagnostic",
    "active_set",
    "apply_S",
    "cauchy_sum",
    "solve_inverse",
    "reconstruct_u",
    "born_reconstruction",
    "orientation_errors",
    "calibrate_orientation",
    "l1_diagnostic",
]

#: Orientation sign fixed by the Born-limit calibration (see :func:`calibrate_orientation`).
CALIBRATED_ORIENTATION = 1


@dataclass(frozen=True)
class InverseConfig:
    """Settings of the inverse solver.

    ``delta`` is only used by ``side_limit="offset"``; ``None`` means half the
    induced ``Im z`` spacing of the finest contour.  ``support_tol`` trims
    samples with ``|G| <= support_tol * max|G|`` from the iteration.
    """

    delta: float | None = None
    tol: float = 1e-12
    max_iter: int = 100
    orientation: int = CALIBRATED_ORIENTATION
    side_limit: str = "plemelj"
    support_tol: float = 1e-11

    def __post_init__(self) -> None:
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.side_limit not in ("plemelj", "offset"):
            raise ValueError("side_limit must be 'plemelj' or 'offset'")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")

    def resolved_delta(self, contours: ContourGrid) -> float:
        if self.delta is not None:
            return self.delta
        return 0.5 * contours.grid.dxi / (2.0 * contours.omega * contours.n_max)


@dataclass
class ActiveSet:
    """Contour samples carrying non-negligible data, ordered by contour then ``xi``."""

    n: np.ndarray
    k: np.ndarray
    xi: np.ndarray
    G: np.ndarray
    partner: np.ndarray
    blocks: dict

    @property
    def size(self) -> int:
        return int(self.n.size)

    def index(self, n: int, k: int) -> int | None:
        lo, hi = self.blocks.get(int(n), (0, 0))
        if hi == lo:
            return None
        pos = int(k) - int(self.k[lo])
        return lo + pos if 0 <= pos < hi - lo else None


def active_set(F: SpectralData, support_tol: float = 1e-11) -> ActiveSet:
    """Symmetric ``xi`` windows per contour pair ``(n, -n)`` enclosing the data.

    The window on ``L_n`` and ``L_{-n}`` is ``|xi| <= K_n``, so the partner
    ``(-n, -xi)`` of every kept sample is kept too.  The Nyquist column, which
    has no mirror frequency on the grid, is never included.
    """
    cg = F.contours
    grid = cg.grid
    xi = grid.xi
    scale = float(np.nanmax(np.abs(F.G))) if F.G.size else 0.0
    ns, ks, blocks = [], [], {}
    if scale > 0:
        threshold = support_tol * scale
        for n in range(1, cg.n_max + 1):
            big = (np.abs(F.row(n)) > threshold) | (np.abs(F.row(-n)) > threshold)
            if not big.any():
                continue
            reach = np.abs(xi[big]).max()
            window = np.nonzero((np.abs(xi) <= reach + 1e-9 * grid.dxi) & (np.arange(grid.Ny) > 0))[0]
            for sign in (-1, 1):
                blocks[sign * n] = window
    n_list = []
    for n in cg.ns:
        if int(n) in blocks:
            window = blocks[int(n)]
            start = len(ks)
            ks.extend(window.tolist())
            n_list.extend([int(n)] * window.size)
            blocks[int(n)] = (start, len(ks))
    n_arr = np.array(n_list, dtype=int)
    k_arr = np.array(ks, dtype=int)
    G = np.array([F.G[cg.row(n), k] for n, k in zip(n_arr, k_arr)], dtype=complex)
    aset = ActiveSet(n_arr, k_arr, xi[k_arr] if k_arr.size else np.zeros(0), G, np.zeros(0, dtype=int), blocks)
    aset.partner = np.array([aset.index(-n, grid.Ny - k) for n, k in zip(n_arr, k_arr)], dtype=int)
    return aset


@dataclass
class BoundaryTraceSet:
    """Left traces ``W[n, xi] = mu_minus(zeta(n, xi))`` on the active samples.

    Traces off the active set are evaluated on demand from the same
    equation, so :meth:`trace` answers for every stored contour sample.
    """

    contours: ContourGrid
    data: SpectralData
    config: InverseConfig
    support: ActiveSet
    W: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    ratios: list = field(default_factory=list)
    outside_theory: bool = False

    def trace(self, n: int, k: int) -> Field:
        grid = self.contours.grid
        i = self.support.index(n, k)
        if i is not None:
            return Field(grid, self.W[i])
        if n == 0 or abs(n) > self.contours.n_max or not 0 <= k < grid.Ny:
            raise KeyError(f"no contour sample (n={n}, k={k})")
        return Field(grid, 1.0 + _contour_sum(self, n, k))


def _phases(grid, n, xi):
    ex = np.exp(1j * grid.omega * np.asarray(n, dtype=float)[:, None] * grid.x[None, :])
    ey = np.exp(1j * np.asarray(xi, dtype=float)[:, None] * grid.y[None, :])
    return ex, ey


def _shifted(W: np.ndarray, aset: ActiveSet, ex: np.ndarray) -> np.ndarray:
    """``V_i = exp(i omega n_i x) W[partner(i)]``."""
    return ex[:, :, None] * W[aset.partner]


def _source_weights(aset: ActiveSet, orientation: int, z: complex, omega: float) -> np.ndarray:
    """Cauchy weights ``o_i dxi G_i / (2 pi P_z(n_i, xi_i))`` at an off-contour ``z``."""
    o = orientation * np.sign(aset.n)
    p = (omega * aset.n) ** 2 + 2.0 * omega * aset.n * z + 1j * aset.xi
    return o * aset.G / (2.0 * math.pi * p)


def _contour_weights(aset: ActiveSet, orientation: int, k_target: int, eta: float, omega: float, dxi: float, skip=None):
    """Weights of the punctured discrete Cauchy sum at a point of ``L_k``."""
    o = orientation * np.sign(aset.n)
    target = zeta(k_target, eta, omega)
    same = aset.n == k_target
    p = (omega * aset.n) ** 2 + 2.0 * omega * aset.n * target + 1j * aset.xi
    # on the same contour P = i (xi - eta) exactly; use that form to avoid cancellation
    p = np.where(same, 1j * (aset.xi - eta), p)
    if skip is not None:
        p[skip] = 1.0
    weights = o * dxi * aset.G / (2.0 * math.pi * p)
    if skip is not None:
        weights[skip] = 0.0
    return weights


def _contour_sum(traces: BoundaryTraceSet, n: int, k: int) -> np.ndarray:
    grid = traces.contours.grid
    aset = traces.support
    if aset.size == 0:
        return np.zeros((grid.Nx, grid.Ny), dtype=complex)
    ex, ey = _phases(grid, aset.n, aset.xi)
    H = ey[:, None, :] * _shifted(traces.W, aset, ex)
    w = _contour_weights(aset, traces.config.orientation, n, grid.xi[k], grid.omega, grid.dxi)
    return np.tensordot(w, H, axes=(0, 0))


def _diff_matrix(size: int, spacing: float) -> np.ndarray:
    """Periodic spectral differentiation matrix for ``size`` (odd) samples."""
    k = 2.0 * math.pi * np.fft.fftfreq(size, d=spacing)
    if size % 2 == 0:
        k[size // 2] = 0.0
    eye = np.eye(size)
    return np.real(np.fft.ifft(1j * k[:, None] * np.fft.fft(eye, axis=0), axis=0))


class _PlemeljSystem:
    """The discrete fixed-point map ``W -> 1 + (Cauchy sum on the contours)``."""

    def __init__(self, F: SpectralData, aset: ActiveSet, cfg: InverseConfig):
        grid = F.grid
        self.grid = grid
        self.aset = aset
        omega, dxi = grid.omega, grid.dxi
        M = aset.size
        s = cfg.orientation
        o = s * np.sign(aset.n)
        self.ex, self.ey = _phases(grid, aset.n, aset.xi)
        if cfg.side_limit == "plemelj":
            A = np.empty((M, M), dtype=complex)
            for j in range(M):
                A[j] = _contour_weights(aset, s, int(aset.n[j]), float(aset.xi[j]), omega, dxi, skip=j)
            A[np.arange(M), np.arange(M)] = -0.5 * s * aset.G
            self.A = A
            # derivative correction of the punctured sum, block by block
            self.blocks = []
            for n, (lo, hi) in aset.blocks.items():
                D = _diff_matrix(hi - lo, dxi)
                coeff = (o[lo:hi, None] / (2.0 * math.pi)) * (-1j) * dxi * D * aset.G[None, lo:hi]
                self.blocks.append((lo, hi, coeff))
            self.diag_y = o * dxi * aset.G / (2.0 * math.pi)
        else:
            delta = cfg.resolved_delta(F.contours)
            targets = zeta(aset.n, aset.xi, omega)
            far = np.stack([_source_weights(aset, s, z - delta, omega) for z in targets])
            near = np.stack([_source_weights(aset, s, z - delta / 2.0, omega) for z in targets])
            self.A = dxi * (2.0 * near - far)
            self.blocks = []
            self.diag_y = None

    def apply(self, W: np.ndarray) -> np.ndarray:
        grid = self.grid
        M = self.aset.size
        V = _shifted(W, self.aset, self.ex)
        H = self.ey[:, None, :] * V
        out = (self.A @ H.reshape(M, -1)).reshape(H.shape)
        if self.diag_y is not None:
            corr = np.empty_like(V)
            for lo, hi, coeff in self.blocks:
                corr[lo:hi] = (coeff @ V[lo:hi].reshape(hi - lo, -1)).reshape(V[lo:hi].shape)
            corr += self.diag_y[:, None, None] * grid.y[None, None, :] * V
            out += self.ey[:, None, :] * corr
        out += 1.0
        return out


def solve_inverse(F: SpectralData, cfg: InverseConfig | None = None) -> BoundaryTraceSet:
    """Solve for the left traces by Jacobi iteration of the discrete equation."""
    cfg = cfg or InverseConfig()
    grid = F.grid
    if not np.all(np.isfinite(F.G)):
        raise ValueError("spectral data contain non-finite samples")
    report = decay_report(F)
    outside = not report.forward_margin < 1.0
    aset = active_set(F, cfg.support_tol)
    M = aset.size
    W = np.ones((M, grid.Nx, grid.Ny), dtype=complex)
    if M == 0:
        return BoundaryTraceSet(F.contours, F, cfg, aset, W, 1, 0.0, [], outside)
    system = _PlemeljSystem(F, aset, cfg)
    ratios: list[float] = []
    previous = math.inf
    for iteration in range(1, cfg.max_iter + 1):
        new = system.apply(W)
        change = float(np.abs(new - W).max())
        W = new
        if math.isfinite(previous) and previous > 100 * np.finfo(float).eps:
            ratios.append(change / previous)
        if change < cfg.tol:
            return BoundaryTraceSet(F.contours, F, cfg, aset, W, iteration, change, ratios, outside)
        if not math.isfinite(change):
            break
        previous = change
    raise ConvergenceError(
        f"inverse iteration did not converge in {cfg.max_iter} steps (last update {change:.3e})",
        last_ratio=ratios[-1] if ratios else math.nan,
        residual=change,
    )


def _dx(grid, values: np.ndarray) -> np.ndarray:
    k = grid.omega * grid.fft_modes.astype(float)
    k[grid.Nx // 2] = 0.0
    return np.fft.ifft(1j * k[:, None] * np.fft.fft(values, axis=0), axis=0)


def _reconstruct(F: SpectralData, aset: ActiveSet, W: np.ndarray, orientation: int) -> Field:
    grid = F.grid
    if aset.size == 0:
        out = Field(grid, np.zeros((grid.Nx, grid.Ny)), "real")
        out.meta["imag_ratio"] = 0.0
        return out
    ex, ey = _phases(grid, aset.n, aset.xi)
    o = orientation * np.sign(aset.n)
    c = grid.dxi * o * (-1j / (2.0 * grid.omega * aset.n)) * aset.G
    H = ey[:, None, :] * _shifted(W, aset, ex)
    total = np.tensordot(c, H, axes=(0, 0))
    u = _dx(grid, total) / math.pi
    scale = float(np.abs(u).max())
    imag_ratio = 0.0 if scale == 0 else float(np.abs(u.imag).max() / scale)
    out = zero_mass_project(Field(grid, u.real, "real"))
    out.meta["imag_ratio"] = imag_ratio
    return out


def reconstruct_u(F: SpectralData, W: BoundaryTraceSet) -> Field:
    """Potential from spectral data and solved traces.

    The imaginary part, which vanishes for data of a real potential, is
    dropped; its relative size is kept in ``meta["imag_ratio"]``.
    """
    if W.support.size and not np.array_equal(W.support.G, active_set(F, W.config.support_tol).G):
        raise ValueError("traces were solved for different spectral data")
    return _reconstruct(F, W.support, W.W, W.config.orientation)


def born_reconstruction(F: SpectralData, orientation: int = CALIBRATED_ORIENTATION, support_tol: float = 1e-11) -> Field:
    """First-order reconstruction: the inverse formula with every trace set to one."""
    aset = active_set(F, support_tol)
    W = np.ones((aset.size, F.grid.Nx, F.grid.Ny), dtype=complex)
    return _reconstruct(F, aset, W, orientation)


def orientation_errors(F: SpectralData, u0: Field) -> dict:
    """Relative L2 error of the Born reconstruction for both orientation signs."""
    ref = np.linalg.norm(u0.values)
    return {
        s: float(np.linalg.norm(born_reconstruction(F, s).values - u0.values) / ref) for s in (1, -1)
    }


def calibrate_orientation(F: SpectralData, u0: Field) -> int:
    """The orientation sign under which the Born reconstruction reproduces ``u0``.

    ``F`` should be the forward data of a potential small enough that the
    first-order term dominates.
    """
    errors = orientation_errors(F, u0)
    return min(errors, key=errors.get)


def apply_S(F: SpectralData, W: BoundaryTraceSet, n: int, xi: float) -> Field:
    """Jump operator at ``zeta(n, xi)``: ``G[n, xi] exp(i omega n x + i xi y) W[-n, -xi]``."""
    grid = F.grid
    k = grid.xi_index(xi)
    value = F.value(n, xi)
    if k == 0:
        raise KeyError("the Nyquist column has no mirror sample")
    shifted = W.trace(-n, grid.Ny - k).values
    X, Y = grid.mesh()
    return Field(grid, value * np.exp(1j * (grid.omega * n * X + xi * Y)) * shifted)


def cauchy_sum(F: SpectralData, W: BoundaryTraceSet, z: complex) -> Field:
    """Cauchy sum ``(C S mu)(x, y; z)`` at a point off the contours."""
    grid = F.grid
    z = complex(z)
    on_line = abs(2.0 * z.real / grid.omega - round(2.0 * z.real / grid.omega)) < 1e-12
    if on_line and round(2.0 * z.real / grid.omega) != 0:
        raise ValueError(f"z = {z} lies on a contour; evaluate a side limit instead")
    aset = W.support
    if aset.size == 0:
        return Field(grid, np.zeros((grid.Nx, grid.Ny), dtype=complex))
    ex, ey = _phases(grid, aset.n, aset.xi)
    H = ey[:, None, :] * _shifted(W.W, aset, ex)
    w = grid.dxi * _source_weights(aset, W.config.orientation, z, grid.omega)
    return Field(grid, np.tensordot(w, H, axes=(0, 0)))


@dataclass(frozen=True)
class L1Diagnostic:
    lhs: float
    rhs: float
    lambda_norm: float
    applicable: bool
    ok: bool | None


def l1_diagnostic(mu_field: Field, F: SpectralData, slack: float = 0.1) -> L1Diagnostic:
    """Compare ``||analyze(mu - 1)||_{L1}`` with ``Lambda / (1 - Lambda)``.

    When ``Lambda >= 1`` the bound is void; the diagnostic then only reports.
    """
    lam = decay_report(F).lambda_norm
    lhs = norms(analyze(Field(mu_field.grid, mu_field.values - 1.0))).l1
    if lam >= 1.0:
        return L1Diagnostic(lhs, math.inf, lam, False, None)
    rhs = lam / (1.0 - lam)
    return L1Diagnostic(lhs, rhs, lam, True, lhs <= rhs * (1.0 + slack))


def config_to_dict(cfg: InverseConfig) -> dict:
    return asdict(cfg)


def save_traces(traces: BoundaryTraceSet, directory: str | Path) -> None:
    """Write every active trace as a field file ``n_<n>_k_<k>`` plus a manifest."""
    from .fileio import save_field

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, (n, k) in enumerate(zip(traces.support.n, traces.support.k)):
        name = f"n_{int(n)}_k_{int(k)}"
        save_field(Field(traces.contours.grid, traces.W[i]), directory / name, binary=True)
        names.append(name)
    manifest = {
        "config": config_to_dict(traces.config),
        "n_max": traces.contours.n_max,
        "iterations": traces.iterations,
        "residual": traces.residual,
        "traces": names,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))


def load_traces(directory: str | Path, F: SpectralData) -> BoundaryTraceSet:
    """Read traces written by :func:`save_traces` for the same spectral data."""
    from .fileio import load_field

    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    cfg = InverseConfig(**manifest["config"])
    aset = active_set(F, cfg.support_tol)
    expected = [f"n_{int(n)}_k_{int(k)}" for n, k in zip(aset.n, aset.k)]
    if expected != manifest["traces"]:
        raise ValueError("trace directory does not match the support of the spectral data")
    W = np.stack([load_field(directory / name).values for name in expected]) if expected else np.ones((0, F.grid.Nx, F.grid.Ny), complex)
    return BoundaryTraceSet(F.contours, F, cfg, aset, W, manifest["iterations"], manifest["residual"])
