import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from kpist import Field, make_grid, solve_jost
from kpist.fileio import (
    FormatError,
    RunConfig,
    load_config,
    load_field,
    load_jost,
    load_spectral,
    read_metrics,
    save_config,
    save_field,
    save_jost,
    save_spectral,
    write_metrics,
)
from kpist.spectral import SpectralData, make_contours

GRID = make_grid(math.pi, 8, 16, 5.0)
finite = st.floats(allow_nan=False, allow_infinity=False, width=64)
values = arrays(np.complex128, (8, 16), elements=st.complex_numbers(allow_nan=False, allow_infinity=False))


@given(values)
@settings(max_examples=25, deadline=None)
def test_binary_field_round_trip_is_bit_exact(tmp_path_factory, v):
    path = tmp_path_factory.mktemp("f") / "u.field"
    save_field(Field(GRID, v), path)
    back = load_field(path)
    assert back.grid == GRID and back.kind == "complex"
    assert back.values.tobytes() == v.tobytes()


@given(values)
@settings(max_examples=10, deadline=None)
def test_csv_field_round_trip_is_exact(tmp_path_factory, v):
    path = tmp_path_factory.mktemp("f") / "u.csv"
    save_field(Field(GRID, v), path, binary=False)
    assert np.array_equal(load_field(path).values, v)


def test_field_header_and_extra_keys(tmp_path):
    path = tmp_path / "u.field"
    save_field(Field(GRID, np.ones((8, 16)), "real"), path, extra={"note": "hello"})
    text = path.read_bytes().split(b"end_header")[0].decode()
    for key in ("ell:", "Nx: 8", "Ny: 16", "Ly: 5.0", "kind: real", "payload: binary"):
        assert key in text
    back = load_field(path)
    assert back.kind == "real" and back.meta == {"note": "hello"}


@pytest.mark.parametrize("binary", [True, False])
def test_truncated_field_is_a_format_error(tmp_path, binary):
    path = tmp_path / "u.field"
    save_field(Field(GRID, np.ones((8, 16))), path, binary=binary)
    raw = path.read_bytes()
    path.write_bytes(raw[:-40])
    with pytest.raises(FormatError):
        load_field(path)
    path.write_bytes(raw[:20])
    with pytest.raises(FormatError):
        load_field(path)


def test_version_mismatch_is_explicit(tmp_path):
    path = tmp_path / "u.field"
    save_field(Field(GRID, np.ones((8, 16))), path)
    path.write_bytes(path.read_bytes().replace(b"version: 1", b"version: 9"))
    with pytest.raises(FormatError, match="version"):
        load_field(path)


def test_spectral_round_trip(tmp_path, rng):
    cg = make_contours(GRID, 1)
    F = SpectralData(cg, rng.normal(size=(2, 16)) + 1j * rng.normal(size=(2, 16)), time=0.25)
    path = tmp_path / "F.csv"
    save_spectral(F, path)
    lines = path.read_text().splitlines()
    assert "n,xi,tau_im,reF,imF" in lines
    assert any(line.startswith("# omega:") for line in lines)
    back = load_spectral(path)
    assert np.array_equal(back.G, F.G) and back.time == 0.25 and back.provenance == "loaded"
    path.write_text("\n".join(lines[:-3]))
    with pytest.raises(FormatError):
        load_spectral(path)


def test_jost_solution_round_trip(tmp_path):
    sol = solve_jost(Field(GRID, 0.001 * np.cos(GRID.mesh()[0]) * np.exp(-GRID.mesh()[1] ** 2)), 0.25 + 0.5j)
    save_jost(sol, tmp_path / "mu.field")
    back = load_jost(tmp_path / "mu.field")
    assert back.z == sol.z and back.iterations == sol.iterations and back.residual == sol.residual
    assert np.array_equal(back.mu.values, sol.mu.values)


def test_metrics_round_trip(tmp_path):
    rows = [(0.0, 1e-8, 2e-8), (0.2, 3.5e-8, 1.25e-7)]
    write_metrics(rows, tmp_path / "m.csv")
    assert (tmp_path / "m.csv").read_text().startswith("t,l2_rel,linf_rel\n")
    assert read_metrics(tmp_path / "m.csv") == rows


def test_config_round_trip_and_validation(tmp_path):
    cfg = RunConfig(Ny=128, n_max=2, times=[0.0, 0.1], amplitude=0.01, potential="twomode")
    save_config(cfg, tmp_path / "run.ini")
    assert load_config(tmp_path / "run.ini") == cfg
    (tmp_path / "bad.ini").write_text("[grid]\nNz = 3\n")
    with pytest.raises(FormatError, match="unknown key"):
        load_config(tmp_path / "bad.ini")
    (tmp_path / "bad.ini").write_text("[mesh]\nNx = 3\n")
    with pytest.raises(FormatError, match="unknown config section"):
        load_config(tmp_path / "bad.ini")
    (tmp_path / "bad.ini").write_text("[potential]\nfile = missing.field\n")
    with pytest.raises(FormatError, match="does not exist"):
        load_config(tmp_path / "bad.ini")
    (tmp_path / "bad.ini").write_text("[grid]\nNx = many\n")
    with pytest.raises(FormatError):
        load_config(tmp_path / "bad.ini")


def test_binary_field_keeps_signed_zeros(tmp_path):
    v = np.full((8, 16), complex(-0.0, 0.0))
    v[0, 0] = complex(0.0, -0.0)
    save_field(Field(GRID, v), tmp_path / "z.field")
    assert load_field(tmp_path / "z.field").values.tobytes() == v.tobytes()
