"""One-dimensional solvers for the y-line problems behind the Jost iteration.

Fourier-expanding ``mu - 1`` in x turns the Jost integral equation into a
family of scalar ODEs, one per x-mode ``m``::

    phi_m'(y) + kappa_m * phi_m(y) = f_m(y),    kappa_m = omega m (omega m + 2 z)

where ``f_m`` is the x-Fourier coefficient of ``u * mu``.  The bounded solution
integrates from whichever end makes the kernel ``exp(-kappa (y - y'))`` decay:

* ``FORWARD``  (``Re kappa > 0``): ``phi(y) =  int_{-inf}^{y} exp(-kappa (y - y')) f(y') dy'``
* ``BACKWARD`` (``Re kappa < 0``): ``phi(y) = -int_{y}^{+inf} exp(-kappa (y - y')) f(y') dy'``
* ``SYMMETRIC``: the average of the two, used only for a marginal ``m = 0`` row.

Rows with ``Re kappa = 0`` (the marginal mode on a contour, and ``m = 0``)
have an oscillatory kernel, and the direction is a choice that the caller makes.

Two interchangeable kernels are provided.  :class:`SpectralLineSolver` is
spectrally accurate: a periodic Fourier solve with an exact boundary
correction.  :class:`ScanLineSolver` is a fourth-order exponential prefix scan,
the stable recursive form of the same integrals.  Both precompute everything
that depends only on ``kappa`` so that one instance can be applied at every
fixed-point iteration.
"""

from __future__ import annotations

from math import factorial

import numpy as np

from .cylinder import CylinderGrid

FORWARD = 1
BACKWARD = -1
SYMMETRIC = 0

__all__ = [
    "FORWARD",
    "BACKWARD",
    "SYMMETRIC",
    "SpectralLineSolver",
    "ScanLineSolver",
    "make_line_solver",
    "scan_weights",
]


class SpectralLineSolver:
    """Spectrally accurate line solver.

    Parameters
    ----------
    grid : CylinderGrid
    kappa : complex array, shape ``(R,)``
        One decay rate per row.
    directions : int array, shape ``(R,)``
        ``FORWARD``, ``BACKWARD`` or ``SYMMETRIC`` per row.
    """

    def __init__(self, grid: CylinderGrid, kappa: np.ndarray, directions: np.ndarray, marginal_tol: float = 1e-12):
        kappa = np.asarray(kappa, dtype=complex).ravel()
        directions = np.asarray(directions, dtype=int).ravel()
        if kappa.shape != directions.shape:
            raise ValueError("kappa and directions must have the same shape")
        self.grid = grid
        self.kappa = kappa
        self.directions = directions
        xi = grid.fft_xi
        s = grid.y - grid.y[0]
        self._s = s
        marginal = np.abs(kappa.real) <= marginal_tol * max(1.0, grid.omega**2)
        self._marginal = np.nonzero(marginal)[0]
        self._regular = np.nonzero(~marginal)[0]
        bad_dir = directions[self._regular] * np.sign(kappa.real[self._regular]) <= 0
        if np.any(bad_dir):
            raise ValueError("non-marginal rows must integrate in their decaying direction")

        kr = kappa[self._regular][None, :]
        self._inv_symbol = 1.0 / (kr + 1j * xi[:, None])
        # boundary correction exp(-kappa (s - s_anchor)), anchored where the solution vanishes
        anchor = np.where(directions[self._regular] == FORWARD, 0.0, 2.0 * grid.Ly)[None, :]
        self._boundary = np.exp(-kr * (s[:, None] - anchor))

        km = kappa[self._marginal][None, :]
        self._phase_in = np.exp(km * s[:, None])
        self._phase_out = np.exp(-km * s[:, None])
        nonzero = (xi != 0) & (np.abs(xi) < np.abs(xi).max())
        self._anti_symbol = np.where(nonzero, 1.0 / (1j * np.where(nonzero, xi, 1.0)), 0.0)[:, None]
        self._total_weight = np.choose(directions[self._marginal] + 1, [1.0, 0.5, 0.0])[None, :]
        self._all_regular = self._marginal.size == 0

    def apply(self, f: np.ndarray) -> np.ndarray:
        """Solve every row; ``f`` has shape ``(Ny, R)`` (one row per column)."""
        f = np.asarray(f, dtype=complex)
        if self._all_regular:
            periodic = np.fft.ifft(np.fft.fft(f, axis=0) * self._inv_symbol, axis=0)
            periodic -= periodic[:1] * self._boundary
            return periodic
        out = np.empty_like(f)
        if self._regular.size:
            periodic = np.fft.ifft(np.fft.fft(f[:, self._regular], axis=0) * self._inv_symbol, axis=0)
            out[:, self._regular] = periodic - periodic[:1] * self._boundary
        g = self._phase_in * f[:, self._marginal]
        spectrum = np.fft.fft(g, axis=0)
        mean = spectrum[:1] / g.shape[0]
        anti = np.fft.ifft(spectrum * self._anti_symbol, axis=0)
        cumulative = anti - anti[:1] + mean * self._s[:, None]
        total = mean * 2.0 * self.grid.Ly
        out[:, self._marginal] = self._phase_out * (cumulative - self._total_weight * total)
        return out


_NODES = np.array([-1.0, 0.0, 1.0, 2.0])
# Lagrange basis on the nodes as monomial coefficients: l_r(t) = sum_p _LAGRANGE[r, p] t**p
_LAGRANGE = np.linalg.inv(np.vander(_NODES, 4, increasing=True)).T
_SERIES_TERMS = 30
_SERIES_COEFF = np.array(
    [[factorial(p) / factorial(p + k + 1) for p in range(4)] for k in range(_SERIES_TERMS)]
)


def _exp_moments(a: np.ndarray) -> np.ndarray:
    """``I_p(a) = int_0^1 exp(-a (1 - t)) t**p dt`` for ``p = 0..3``.

    Small ``|a|`` uses the power series, the rest the upward recursion
    ``I_p = (1 - p I_{p-1}) / a``, which is stable once ``|a| >= 1``.
    """
    a = np.asarray(a, dtype=complex)
    small = np.abs(a) < 1.0
    powers = (-a[..., None]) ** np.arange(_SERIES_TERMS)
    series = powers @ _SERIES_COEFF
    safe = np.where(small, 1.0, a)
    moments = [-np.expm1(-safe) / safe]
    for p in range(1, 4):
        moments.append((1.0 - p * moments[-1]) / safe)
    recursion = np.stack(moments, axis=-1)
    return np.where(small[..., None], series, recursion)


def scan_weights(a: np.ndarray) -> np.ndarray:
    """Quadrature weights ``w_r(a) = int_0^1 exp(-a (1 - t)) l_r(t) dt`` for the cubic nodes."""
    return _exp_moments(a) @ _LAGRANGE.T


class ScanLineSolver:
    """Fourth-order exponential prefix scan.

    Each step advances ``phi`` across one cell exactly for the cubic
    interpolant of ``f`` through the four surrounding samples::

        phi_{j+1} = exp(-a) phi_j + dy * sum_r w_r(a) f_{j-1+r},   a = kappa dy

    Backward rows are run as forward scans on the reversed samples with
    ``a = -kappa dy``, so a single recurrence serves every row.  The
    multiplier ``exp(-a)`` has modulus at most one in the chosen direction,
    which is what makes the scan stable.
    """

    def __init__(self, grid: CylinderGrid, kappa: np.ndarray, directions: np.ndarray):
        kappa = np.asarray(kappa, dtype=complex).ravel()
        directions = np.asarray(directions, dtype=int).ravel()
        self.grid = grid
        self.kappa = kappa
        self.directions = directions
        dy = grid.dy
        a_fwd = kappa * dy
        a_bwd = -kappa * dy
        uses_fwd = directions != BACKWARD
        uses_bwd = directions != FORWARD
        if np.any(uses_fwd & (a_fwd.real < -1e-12)) or np.any(uses_bwd & (a_bwd.real < -1e-12)):
            raise ValueError("scan direction does not match the decay of the kernel")
        share = np.where(directions == SYMMETRIC, 0.5, 1.0)
        # rows not scanned in a direction get zero weights and a zero multiplier,
        # so every pass runs over all rows without gathering
        self._w_fwd = np.where(uses_fwd, share, 0.0) * (scan_weights(np.where(uses_fwd, a_fwd, 0.0)) * dy).T
        self._w_bwd = -np.where(uses_bwd, share, 0.0) * (scan_weights(np.where(uses_bwd, a_bwd, 0.0)) * dy).T
        self._m_fwd = np.where(uses_fwd, np.exp(-np.where(uses_fwd, a_fwd, 0.0)), 0.0)
        self._m_bwd = np.where(uses_bwd, np.exp(-np.where(uses_bwd, a_bwd, 0.0)), 0.0)
        self._any_fwd = bool(uses_fwd.any())
        self._any_bwd = bool(uses_bwd.any())

    @staticmethod
    def _scan(f: np.ndarray, out: np.ndarray, w: np.ndarray, mult: np.ndarray) -> None:
        """Forward recurrence over axis 0, accumulating into ``out[1:]``."""
        ny = f.shape[0]
        phi = np.zeros(f.shape[1], dtype=complex)
        tmp = np.empty_like(phi)
        w0, w1, w2, w3 = w
        for j in range(ny - 1):
            phi *= mult
            if j >= 1:
                np.multiply(w0, f[j - 1], out=tmp)
                phi += tmp
            np.multiply(w1, f[j], out=tmp)
            phi += tmp
            np.multiply(w2, f[j + 1], out=tmp)
            phi += tmp
            if j + 2 < ny:
                np.multiply(w3, f[j + 2], out=tmp)
                phi += tmp
            out[j + 1] += phi

    def apply(self, f: np.ndarray) -> np.ndarray:
        """Solve every row; ``f`` has shape ``(Ny, R)`` (one row per column)."""
        f = np.asarray(f, dtype=complex)
        out = np.zeros_like(f)
        if self._any_fwd:
            self._scan(f, out, self._w_fwd, self._m_fwd)
        if self._any_bwd:
            # a backward integral is a forward scan of the reversed samples
            self._scan(f[::-1], out[::-1], self._w_bwd, self._m_bwd)
        return out


def make_line_solver(kind: str, grid: CylinderGrid, kappa: np.ndarray, directions: np.ndarray):
    if kind == "spectral":
        return SpectralLineSolver(grid, kappa, directions)
    if kind == "scan":
        return ScanLineSolver(grid, kappa, directions)
    raise ValueError(f"unknown line solver {kind!r}; expected 'spectral' or 'scan'")
