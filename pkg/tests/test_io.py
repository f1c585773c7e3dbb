import json

import numpy as np
import pytest

from penalty_forge import SolverConfig, solve_algorithm1
from penalty_forge.io import (
    format_float,
    read_grid_text,
    read_pgm,
    read_trace_csv,
    write_grid_text,
    write_json,
    write_pgm,
    write_trace_csv,
)
from penalty_forge.problems import scalar_problem
from penalty_forge.solvers import TRACE_COLUMNS


def test_format_float_round_trips():
    rng = np.random.default_rng(0)
    for v in np.concatenate([rng.standard_normal(100) * 10.0 ** rng.integers(-300, 300, 100), [0.0, -0.0]]):
        assert float(format_float(v)) == v
    assert format_float(float("nan")) == "nan"
    assert format_float(float("inf")) == "inf"


def test_trace_csv(tmp_path):
    rep = solve_algorithm1(np.array([-1.2]), scalar_problem(), SolverConfig(epsilon=0.1, tol=1e-12))
    path = tmp_path / "trace.csv"
    write_trace_csv(rep.trace, path)
    header = path.read_text().splitlines()[0]
    assert header == ",".join(TRACE_COLUMNS)
    cols = read_trace_csv(path)
    assert np.array_equal(cols["J_eps"], rep.trace.column("J_eps"))
    assert np.array_equal(cols["k"], np.arange(6))
    assert np.isnan(cols["step_norm"][-1])


def test_json_handles_numpy(tmp_path):
    write_json({"a": np.float64(1.5), "b": np.arange(3), "c": np.inf, "d": [np.int64(2)]}, tmp_path / "r.json")
    d = json.loads((tmp_path / "r.json").read_text())
    assert d == {"a": 1.5, "b": [0, 1, 2], "c": "inf", "d": [2]}


def test_grid_text(tmp_path):
    a = np.random.default_rng(1).standard_normal((4, 5)) / 7
    write_grid_text(tmp_path / "g.txt", a)
    assert np.array_equal(read_grid_text(tmp_path / "g.txt"), a)
    write_grid_text(tmp_path / "v.txt", np.array([1.0, 2.0]))
    assert read_grid_text(tmp_path / "v.txt").shape == (1, 2)


def test_pgm(tmp_path):
    img = np.linspace(0, 1, 12).reshape(3, 4)
    write_pgm(tmp_path / "i.pgm", img)
    back = read_pgm(tmp_path / "i.pgm")
    assert back.shape == (3, 4) and back.dtype == np.uint8
    assert back[0, 0] == 0 and back[-1, -1] == 255
    assert np.array_equal(back, np.rint(img * 255).astype(np.uint8))
    write_pgm(tmp_path / "c.pgm", np.ones((2, 2)))
    assert not np.any(read_pgm(tmp_path / "c.pgm"))


def test_pgm_rejects_ascii(tmp_path):
    (tmp_path / "a.pgm").write_bytes(b"P2\n1 1\n255\n0\n")
    with pytest.raises(ValueError):
        read_pgm(tmp_path / "a.pgm")
