"""Text and binary formats for fields, spectral data, configs and metrics.

Field file
    A text header of ``key: value`` lines ending with ``end_header``, then the
    payload.  ``payload: csv`` stores rows ``j,k,re,im`` with 17 significant
    digits; ``payload: binary`` stores little-endian float64 ``(re, im)`` pairs
    with ``k`` outer and ``j`` inner.  Extra header keys are preserved in
    ``Field.meta``.

Spectral data file
    ``# key: value`` metadata lines followed by CSV with header
    ``n,xi,tau_im,reF,imF``.

Run config
    An INI document (sections of ``key = value``) read with :mod:`configparser`.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cylinder import Field, make_grid
from .heatjost import JostSolution, SpectralPoint
from .spectral import SpectralData, make_contours

__all__ = [
    "FormatError",
    "save_field",
    "load_field",
    "save_spectral",
    "load_spectral",
    "save_jost",
    "load_jost",
    "write_metrics",
    "read_metrics",
    "RunConfig",
    "load_config",
    "save_config",
    "manifest_text",
]

FIELD_MAGIC = "kpist-field"
SPECTRAL_MAGIC = "kpist-spectral"
FORMAT_VERSION = "1"
_END = "end_header"


class FormatError(ValueError):
    """A file is truncated, malformed or written by an incompatible version."""


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_header(handle, items: dict) -> None:
    for key, value in items.items():
        handle.write(f"{key}: {value}\n".encode())
    handle.write(f"{_END}\n".encode())


def _read_header(raw: bytes, magic: str) -> tuple[dict, int]:
    header = {}
    pos = 0
    while True:
        end = raw.find(b"\n", pos)
        if end < 0:
            raise FormatError("header is not terminated")
        line = raw[pos:end].decode("utf-8", errors="replace").strip()
        pos = end + 1
        if line == _END:
            break
        key, sep, value = line.partition(":")
        if not sep:
            raise FormatError(f"malformed header line {line!r}")
        header[key.strip()] = value.strip()
    if header.get("format") != magic:
        raise FormatError(f"expected a {magic} file, found format {header.get('format')!r}")
    if header.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported {magic} version {header.get('version')!r}")
    return header, pos


def save_field(f: Field, path, binary: bool = True, extra: dict | None = None) -> None:
    """Write a field; ``binary`` selects the float64 payload over CSV."""
    grid = f.grid
    header = {
        "format": FIELD_MAGIC,
        "version": FORMAT_VERSION,
        "ell": _fmt(grid.ell),
        "Nx": grid.Nx,
        "Ny": grid.Ny,
        "Ly": _fmt(grid.Ly),
        "kind": f.kind,
        "payload": "binary" if binary else "csv",
    }
    for key, value in (extra or {}).items():
        header[key] = value
    with open(path, "wb") as handle:
        _write_header(handle, header)
        if binary:
            pairs = np.empty((grid.Ny, grid.Nx, 2), dtype="<f8")
            pairs[..., 0] = f.values.real.T
            pairs[..., 1] = f.values.imag.T
            handle.write(pairs.tobytes())
        else:
            text = io.StringIO()
            text.write("j,k,re,im\n")
            for k in range(grid.Ny):
                for j in range(grid.Nx):
                    v = f.values[j, k]
                    text.write(f"{j},{k},{v.real:.17g},{v.imag:.17g}\n")
            handle.write(text.getvalue().encode())


_FIELD_KEYS = {"format", "version", "ell", "Nx", "Ny", "Ly", "kind", "payload"}


def load_field(path) -> Field:
    raw = Path(path).read_bytes()
    header, pos = _read_header(raw, FIELD_MAGIC)
    try:
        grid = make_grid(float(header["ell"]), int(header["Nx"]), int(header["Ny"]), float(header["Ly"]))
        kind = header["kind"]
        payload = header["payload"]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad field header: {exc}") from exc
    body = raw[pos:]
    if payload == "binary":
        expected = grid.Nx * grid.Ny * 16
        if len(body) != expected:
            raise FormatError(f"binary payload has {len(body)} bytes, expected {expected}")
        pairs = np.frombuffer(body, dtype="<f8").reshape(grid.Ny, grid.Nx, 2)
        # assign the parts separately: re + 1j * im would lose signed zeros
        values = np.empty((grid.Nx, grid.Ny), dtype=complex)
        values.real = pairs[..., 0].T
        values.imag = pairs[..., 1].T
    elif payload == "csv":
        rows = body.decode().strip().splitlines()
        if not rows or rows[0].strip() != "j,k,re,im" or len(rows) - 1 != grid.Nx * grid.Ny:
            raise FormatError("CSV payload is truncated or lacks the j,k,re,im header")
        values = np.empty((grid.Nx, grid.Ny), dtype=complex)
        try:
            for line in rows[1:]:
                j, k, re, im = line.split(",")
                values[int(j), int(k)] = complex(float(re), float(im))
        except ValueError as exc:
            raise FormatError(f"bad CSV row: {exc}") from exc
    else:
        raise FormatError(f"unknown payload type {payload!r}")
    meta = {k: v for k, v in header.items() if k not in _FIELD_KEYS}
    return Field(grid, values, kind, meta)


def save_spectral(F: SpectralData, path) -> None:
    grid = F.grid
    meta = {
        "format": SPECTRAL_MAGIC,
        "version": FORMAT_VERSION,
        "ell": _fmt(grid.ell),
        "omega": _fmt(grid.omega),
        "n_max": F.contours.n_max,
        "time": _fmt(F.time),
        "Nx": grid.Nx,
        "Ny": grid.Ny,
        "Ly": _fmt(grid.Ly),
        "provenance": F.provenance,
    }
    with open(path, "w", newline="") as handle:
        for key, value in meta.items():
            handle.write(f"# {key}: {value}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["n", "xi", "tau_im", "reF", "imF"])
        for n in F.contours.ns:
            tau = F.contours.tau_im(int(n))
            for k, xi in enumerate(grid.xi):
                g = F.G[F.contours.row(int(n)), k]
                writer.writerow([int(n), f"{xi:.17g}", f"{tau[k]:.17g}", f"{g.real:.17g}", f"{g.imag:.17g}"])


def load_spectral(path) -> SpectralData:
    text = Path(path).read_text()
    lines = text.splitlines()
    meta = {}
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        else:
            body_start = i
            break
    if meta.get("format") != SPECTRAL_MAGIC or meta.get("version") != FORMAT_VERSION:
        raise FormatError("not a spectral data file of a supported version")
    try:
        grid = make_grid(float(meta["ell"]), int(meta["Nx"]), int(meta["Ny"]), float(meta["Ly"]))
        contours = make_contours(grid, int(meta["n_max"]))
        time = float(meta["time"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad spectral metadata: {exc}") from exc
    rows = lines[body_start:]
    if not rows or rows[0].strip() != "n,xi,tau_im,reF,imF":
        raise FormatError("missing n,xi,tau_im,reF,imF header")
    expected = 2 * contours.n_max * grid.Ny
    if len(rows) - 1 != expected:
        raise FormatError(f"spectral file has {len(rows) - 1} rows, expected {expected}")
    G = np.empty((2 * contours.n_max, grid.Ny), dtype=complex)
    try:
        for line in rows[1:]:
            n, xi, _tau, re, im = line.split(",")
            G[contours.row(int(n)), grid.xi_index(float(xi))] = complex(float(re), float(im))
    except (ValueError, KeyError) as exc:
        raise FormatError(f"bad spectral row: {exc}") from exc
    return SpectralData(contours, G, time, "loaded", {"source": str(path)})


def save_jost(sol: JostSolution, path, binary: bool = True) -> None:
    extra = {
        "z_re": _fmt(sol.z.z.real),
        "z_im": _fmt(sol.z.z.imag),
        "omega": _fmt(sol.z.omega),
        "contour": "none" if sol.z.contour is None else sol.z.contour,
        "side": "none" if sol.z.side is None else ("plus" if sol.z.side > 0 else "minus"),
        "iterations": sol.iterations,
        "residual": _fmt(sol.residual),
        "method": sol.method,
    }
    save_field(sol.mu, path, binary=binary, extra=extra)


def load_jost(path) -> JostSolution:
    mu = load_field(path)
    m = mu.meta
    try:
        z = complex(float(m["z_re"]), float(m["z_im"]))
        omega = float(m["omega"])
        contour = None if m["contour"] == "none" else int(m["contour"])
        side = None if m["side"] == "none" else (1 if m["side"] == "plus" else -1)
        point = SpectralPoint(z, omega, contour, side)
        return JostSolution(point, mu, int(m["iterations"]), float(m["residual"]), method=m.get("method", ""))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad Jost metadata: {exc}") from exc


def write_metrics(rows, path) -> None:
    """CSV ``t,l2_rel,linf_rel``; ``rows`` yields ``(t, l2_rel, linf_rel)``."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t", "l2_rel", "linf_rel"])
        for t, l2, linf in rows:
            writer.writerow([f"{t:.17g}", f"{l2:.17g}", f"{linf:.17g}"])


def read_metrics(path) -> list[tuple[float, float, float]]:
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["t", "l2_rel", "linf_rel"]:
            raise FormatError("metrics file lacks the t,l2_rel,linf_rel header")
        return [tuple(float(v) for v in row) for row in reader]


@dataclass
class RunConfig:
    """Parsed run configuration."""

    ell: float = math.pi
    Nx: int = 32
    Ny: int = 256
    Ly: float = 12.0
    n_max: int = 3
    potential: str = "cosgauss"
    amplitude: float = 0.02
    potential_file: str | None = None
    spectral_file: str | None = None
    times: list = field(default_factory=lambda: [0.0])
    tol: float = 1e-13
    inverse_tol: float = 1e-12
    max_iter: int = 200
    forward_method: str = "halfplane"
    forward_kernel: str = "scan"
    orientation: int = 1
    dt: float = 1e-3
    out: str = "out"
    threads: int = 1


_CONFIG_SCHEMA = {
    "grid": {"ell": float, "Nx": int, "Ny": int, "Ly": float},
    "contours": {"n_max": int},
    "potential": {"family": str, "amplitude": float, "file": str},
    "spectral": {"file": str},
    "solver": {
        "tol": float,
        "inverse_tol": float,
        "max_iter": int,
        "forward_method": str,
        "forward_kernel": str,
        "orientation": int,
        "dt": float,
    },
    "run": {"times": str, "out": str, "threads": int},
}
_ATTR = {("potential", "family"): "potential", ("potential", "file"): "potential_file", ("spectral", "file"): "spectral_file"}


def _parse_times(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError as exc:
        raise FormatError(f"bad times list {text!r}") from exc


def load_config(path, base_dir: Path | None = None) -> RunConfig:
    """Read an INI run config; unknown sections or keys are errors."""
    parser = configparser.ConfigParser()
    parser.optionxform = str
    try:
        with open(path) as handle:
            parser.read_file(handle)
    except (OSError, configparser.Error) as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from exc
    cfg = RunConfig()
    base_dir = Path(base_dir) if base_dir else Path(path).parent
    for section in parser.sections():
        if section not in _CONFIG_SCHEMA:
            raise FormatError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            kind = _CONFIG_SCHEMA[section].get(key)
            if kind is None:
                raise FormatError(f"unknown key {key!r} in [{section}]")
            if section == "run" and key == "times":
                cfg.times = _parse_times(raw)
                continue
            try:
                value = kind(raw)
            except ValueError as exc:
                raise FormatError(f"[{section}] {key}: {exc}") from exc
            if key == "file":
                candidate = Path(value)
                if not candidate.is_absolute():
                    candidate = base_dir / candidate
                if not candidate.exists():
                    raise FormatError(f"[{section}] file {value!r} does not exist")
                value = str(candidate)
            setattr(cfg, _ATTR.get((section, key), key), value)
    return cfg


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(config_text(cfg))


def config_text(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser["grid"] = {"ell": _fmt(cfg.ell), "Nx": str(cfg.Nx), "Ny": str(cfg.Ny), "Ly": _fmt(cfg.Ly)}
    parser["contours"] = {"n_max": str(cfg.n_max)}
    pot = {"family": cfg.potential, "amplitude": _fmt(cfg.amplitude)}
    if cfg.potential_file:
        pot["file"] = cfg.potential_file
    parser["potential"] = pot
    if cfg.spectral_file:
        parser["spectral"] = {"file": cfg.spectral_file}
    parser["solver"] = {
        "tol": _fmt(cfg.tol),
        "inverse_tol": _fmt(cfg.inverse_tol),
        "max_iter": str(cfg.max_iter),
        "forward_method": cfg.forward_method,
        "forward_kernel": cfg.forward_kernel,
        "orientation": str(cfg.orientation),
        "dt": _fmt(cfg.dt),
    }
    parser["run"] = {"times": ",".join(_fmt(t) for t in cfg.times), "out": cfg.out, "threads": str(cfg.threads)}
    text = io.StringIO()
    parser.write(text)
    return text.getvalue()


def manifest_text(manifest: dict) -> str:
    """Render a run manifest (nested dict) as an INI document."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    flat = {}
    sections = {}
    for key, value in manifest.items():
        if isinstance(value, dict):
            sections[key] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in value.items()}
        else:
            flat[key] = repr(value) if isinstance(value, float) else str(value)
    parser["run"] = flat
    for name, items in sections.items():
        parser[name] = items
    text = io.StringIO()
    parser.write(text)
    return text.getvalue()
