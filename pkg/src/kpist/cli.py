"""Command-line entry point.

Commands::

    kpist forward   u0 -> spectral data file and decay report
    kpist evolve    spectral data, times -> evolved spectral data files
    kpist inverse   spectral data -> reconstructed field and boundary traces
    kpist pde       u0, times -> split-step fields
    kpist solve     u0, times -> IST fields (plus split-step comparison with --oracle)
    kpist validate  run the acceptance checks and write a pass/fail table

Exit status: 0 success, 2 configuration error, 3 convergence failure,
4 validation failure.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click
import numpy as np

from .cylinder import Field, make_grid
from .fileio import (
    FormatError,
    RunConfig,
    config_text,
    load_config,
    load_field,
    load_spectral,
    manifest_text,
    save_field,
    save_spectral,
    write_metrics,
)
from .heatjost import ConvergenceError, smallness_report
from .inverse import InverseConfig, reconstruct_u, save_traces, solve_inverse
from .kpsolver import BlowUpError, PdeConfig, RunManifest, builtin_potential, compare, pde_solve
from .spectral import decay_report, evolve, forward_transform, make_contours

EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_VALIDATION = 4


class StageError(click.ClickException):
    """A failure tagged with the pipeline stage and mapped to an exit status."""

    def __init__(self, stage: str, message: str, exit_code: int):
        super().__init__(f"[{stage}] {message}")
        self.exit_code = exit_code


def _stage(name: str):
    """Translate library exceptions raised inside a stage into exit statuses."""

    def wrap(fn):
        @functools.wraps(fn)
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except (ConvergenceError, BlowUpError) as exc:
                raise StageError(name, str(exc), EXIT_CONVERGENCE) from exc
            except (FormatError, ValueError, OSError) as exc:
                raise StageError(name, str(exc), EXIT_CONFIG) from exc

        return inner

    return wrap


def _common(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="INI run configuration."),
        click.option("--out", "out_dir", type=click.Path(file_okay=False), help="Output directory."),
        click.option("--times", help="Comma-separated list of times."),
        click.option("--tol", type=float, help="Tolerance of the Jost and inverse iterations."),
        click.option("--max-iter", type=int, help="Iteration cap of the fixed-point solvers."),
        click.option("--n-max", type=int, help="Highest contour index |n|."),
        click.option("--threads", type=int, help="Parallel width cap (recorded; the solvers run single-threaded)."),
        click.option("--force", is_flag=True, help="Run even when the potential fails the smallness check."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _resolve_config(config_path, out_dir, times, tol, max_iter, n_max, threads) -> RunConfig:
    try:
        cfg = load_config(config_path) if config_path else RunConfig()
    except FormatError as exc:
        raise StageError("config", str(exc), EXIT_CONFIG) from exc
    if out_dir:
        cfg.out = out_dir
    if times:
        try:
            cfg.times = [float(t) for t in times.split(",") if t.strip()]
        except ValueError as exc:
            raise StageError("config", f"bad --times {times!r}", EXIT_CONFIG) from exc
    if tol is not None:
        cfg.tol = tol
        cfg.inverse_tol = max(tol, cfg.inverse_tol)
    if max_iter is not None:
        cfg.max_iter = max_iter
    if n_max is not None:
        cfg.n_max = n_max
    if threads is not None:
        cfg.threads = threads
    if any(t < 0 for t in cfg.times) or list(cfg.times) != sorted(cfg.times):
        raise StageError("config", "times must be nonnegative and nondecreasing", EXIT_CONFIG)
    if cfg.n_max < 1 or cfg.max_iter < 1:
        raise StageError("config", "n_max and max_iter must be positive", EXIT_CONFIG)
    return cfg


class _Run:
    """Output directory plus a manifest that records progress and failures."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.artifacts: list[str] = []
        self.manifest = RunManifest(
            ell=cfg.ell,
            Nx=cfg.Nx,
            Ny=cfg.Ny,
            Ly=cfg.Ly,
            n_max=cfg.n_max,
            forward_method=cfg.forward_method,
            forward_kernel=cfg.forward_kernel,
            jost_tol=cfg.tol,
            inverse=self.inverse_config(),
            dt=cfg.dt,
            times=tuple(cfg.times),
            potential=cfg.potential_file or cfg.potential,
            amplitude=cfg.amplitude,
        )
        (self.out / "config.ini").write_text(config_text(cfg))
        self.write_manifest("running")

    def inverse_config(self) -> InverseConfig:
        return InverseConfig(tol=self.cfg.inverse_tol, max_iter=self.cfg.max_iter, orientation=self.cfg.orientation)

    def write_manifest(self, status: str) -> None:
        data = self.manifest.to_dict()
        data.pop("inverse")
        body = {"command": self.command, "status": status, "threads": self.cfg.threads, **data}
        body["versions"] = dict(self.manifest.versions)
        body["inverse"] = {k: v for k, v in vars(self.manifest.inverse).items()}
        body["artifacts"] = {f"file{i}": name for i, name in enumerate(self.artifacts)}
        (self.out / "manifest.ini").write_text(manifest_text(body))

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name


def _time_tag(t: float) -> str:
    return f"{t:.6g}"


def _run_command(command: str, body):
    """Shared wrapper: run ``body(run)`` and flag the manifest on failure."""

    def execute(cfg: RunConfig, *args):
        run = _Run(cfg, command)
        try:
            body(run, *args)
        except StageError as exc:
            run.write_manifest(f"failed: {exc.message}")
            raise
        run.write_manifest("complete")

    return execute


@_stage("potential")
def _initial_field(cfg: RunConfig, force: bool) -> Field:
    grid = make_grid(cfg.ell, cfg.Nx, cfg.Ny, cfg.Ly)
    if cfg.potential_file:
        u0 = load_field(cfg.potential_file)
        if u0.grid != grid:
            raise ValueError("potential file grid differs from the configured grid")
    else:
        u0 = builtin_potential(grid, cfg.potential, cfg.amplitude)
    report = smallness_report(u0)
    if not report.ok and not force:
        raise ValueError(f"smallness ratio {report.ratio:.3f} >= 1; rerun with --force to proceed")
    return u0


@_stage("forward")
def _forward(run: _Run, u0: Field, force: bool):
    cfg = run.cfg
    contours = make_contours(u0.grid, cfg.n_max)
    F = forward_transform(u0, contours, cfg.forward_method, cfg.forward_kernel, cfg.tol, cfg.max_iter, force=force)
    if F.meta.get("failed"):
        raise ConvergenceError(f"{len(F.meta['failed'])} contour samples did not converge")
    return F


def _write_decay(run: _Run, F) -> None:
    rep = decay_report(F)
    lines = ["n,sup_bound,l2_bound"]
    lines += [f"{n},{rep.sup_bound[n]:.17g},{rep.l2_bound[n]:.17g}" for n in sorted(rep.sup_bound)]
    for key in ("lambda_norm", "gamma_c", "forward_margin", "wzeta2", "tail_sup"):
        lines.append(f"# {key}: {getattr(rep, key):.17g}")
    run.path("decay.csv").write_text("\n".join(lines) + "\n")


@_stage("inverse")
def _inverse(run: _Run, F):
    # data outside the contraction region is attempted; the trace set carries the flag
    W = solve_inverse(F, run.inverse_config())
    return W, reconstruct_u(F, W)


@_stage("pde")
def _pde_fields(run: _Run, u0: Field) -> list[Field]:
    cfg = run.cfg
    fields, u, now = [], u0, 0.0
    for t in cfg.times:
        span = t - now
        if span > 0:
            u = pde_solve(u, PdeConfig(dt=cfg.dt, t_end=span)).field
            now = t
        fields.append(u)
    return fields


@_stage("spectral")
def _load_spectral(cfg: RunConfig, path: str | None):
    source = path or cfg.spectral_file
    if not source:
        raise ValueError("no spectral data given; pass --spectral or set [spectral] file")
    return load_spectral(source)


@click.group()
@click.version_option(package_name="artifact")
def main() -> None:
    """Inverse spectral transform solver for KP-II on the cylinder."""


@main.command()
@_common
def forward(config_path, out_dir, times, tol, max_iter, n_max, threads, force):
    """Compute spectral data of the initial potential."""
    cfg = _resolve_config(config_path, out_dir, times, tol, max_iter, n_max, threads)

    def body(run):
        u0 = _initial_field(cfg, force)
        save_field(u0, run.path("u0.field"))
        F = _forward(run, u0, force)
        save_spectral(F, run.path("spectral_t0.csv"))
        _write_decay(run, F)

    _run_command("forward", body)(cfg)


@main.command(name="evolve")
@_common
@click.option("--spectral", "spectral_path", type=click.Path(dir_okay=False), help="Spectral data file.")
def evolve_cmd(config_path, out_dir, times, tol, max_iter, n_max, threads, force, spectral_path):
    """Evolve spectral data to each requested time."""
    cfg = _resolve_config(config_path, out_dir, times, tol, max_iter, n_max, threads)

    def body(run):
        F = _load_spectral(cfg, spectral_path)
        for t in cfg.times:
            save_spectral(evolve(F, t), run.path(f"spectral_t{_time_tag(F.time + t)}.csv"))

    _run_command("evolve", body)(cfg)


@main.command()
@_common
@click.option("--spectral", "spectral_path", type=click.Path(dir_okay=False), help="Spectral data file.")
def inverse(config_path, out_dir, times, tol, max_iter, n_max, threads, force, spectral_path):
    """Reconstruct the potential from spectral data."""
    cfg = _resolve_config(config_path, out_dir, times, tol, max_iter, n_max, threads)

    def body(run):
        F = _load_spectral(cfg, spectral_path)
        W, u = _inverse(run, F)
        tag = _time_tag(F.time)
        save_field(u, run.path(f"u_t{tag}.field"))
        save_traces(W, run.path(f"traces_t{tag}"))

    _run_command("inverse", body)(cfg)


@main.command()
@_common
def pde(config_path, out_dir, times, tol, max_iter, n_max, threads, force):
    """Integrate the equation with the split-step scheme."""
    cfg = _resolve_config(config_path, out_dir, times, tol, max_iter, n_max, threads)

    def body(run):
        u0 = _initial_field(cfg, force)
        for t, u in zip(cfg.times, _pde_fields(run, u0)):
            save_field(u, run.path(f"pde_t{_time_tag(t)}.field"))

    _run_command("pde", body)(cfg)


@main.command()
@_common
@click.option("--oracle", is_flag=True, help="Also run the split-step solver and compare.")
def solve(config_path, out_dir, times, tol, max_iter, n_max, threads, force, oracle):
    """Full inverse-spectral-transform solution at each requested time."""
    cfg = _resolve_config(config_path, out_dir, times, tol, max_iter, n_max, threads)

    def body(run):
        u0 = _initial_field(cfg, force)
        F = _forward(run, u0, force)
        save_spectral(F, run.path("spectral_t0.csv"))
        _write_decay(run, F)
        references = _pde_fields(run, u0) if oracle else [None] * len(cfg.times)
        metrics = []
        for t, ref in zip(cfg.times, references):
            Ft = evolve(F, t)
            _, u = _inverse(run, Ft)
            save_field(u, run.path(f"u_t{_time_tag(t)}.field"))
            if ref is not None:
                save_field(ref, run.path(f"pde_t{_time_tag(t)}.field"))
            elif t == 0:
                ref = u0
            if ref is not None:
                m = compare(u, ref)
                metrics.append((t, m["l2_rel"], m["linf_rel"]))
        write_metrics(metrics, run.path("metrics.csv"))

    _run_command("solve", body)(cfg)


@main.command()
@_common
@click.option("--only", help="Comma-separated criterion numbers to run (default: all).")
def validate(config_path, out_dir, times, tol, max_iter, n_max, threads, force, only):
    """Run the acceptance checks and write a pass/fail table."""
    from .validation import CRITERIA, ValidationContext, format_table, run_all

    cfg = _resolve_config(config_path, out_dir, times, tol, max_iter, n_max, threads)
    try:
        numbers = sorted(int(k) for k in only.split(",")) if only else sorted(CRITERIA)
    except ValueError as exc:
        raise StageError("config", f"bad --only {only!r}", EXIT_CONFIG) from exc
    unknown = [k for k in numbers if k not in CRITERIA]
    if unknown:
        raise StageError("config", f"unknown criteria {unknown}", EXIT_CONFIG)
    run = _Run(cfg, "validate")
    results = run_all(ValidationContext(run.inverse_config()), numbers)
    table = format_table(results)
    run.path("validation.txt").write_text(table + "\n")
    click.echo(table)
    failed = [r.number for r in results if not r.passed]
    run.write_manifest("complete" if not failed else f"failed criteria {failed}")
    if failed:
        sys.exit(EXIT_VALIDATION)


if __name__ == "__main__":
    main()
