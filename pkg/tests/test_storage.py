import math

import numpy as np
import pytest

from app import storage
from app.diagnostics import CSV_FIELDS, IterationTrace
from app.errors import ConfigError


def _trace():
    return [
        IterationTrace(0, 1.0, 2.0, 0.0, 0.0, math.nan, math.nan, actions=np.array([0.0, 1.0])),
        IterationTrace(1, 0.1 + 0.2, 1 / 3, 1e-300, 2.5e-17, 7.0, 7.0, actions=np.array([0.25, 0.75])),
    ]


def test_trace_csv_header_and_line_endings(tmp_path):
    path = storage.write_trace_csv(_trace(), tmp_path / "sub" / "trace.csv")
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == ",".join(CSV_FIELDS)
    assert lines[1].startswith("0,1,2,0,0,nan,nan")
    assert len(lines) == 3


def test_trace_csv_round_trip_is_exact(tmp_path):
    trace = _trace()
    back = storage.read_trace_csv(storage.write_trace_csv(trace, tmp_path / "t.csv"))
    assert [t.k for t in back] == [0, 1]
    for a, b in zip(trace, back):
        np.testing.assert_array_equal(np.array(a.row()), np.array(b.row()))


def test_trace_csv_bad_header(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("k,foo\n0,1\n")
    with pytest.raises(ConfigError) as exc:
        storage.read_trace_csv(p)
    assert exc.value.location == str(p)


def test_paths_csv(tmp_path):
    path = storage.write_paths_csv(_trace(), [0, 1], tmp_path / "paths.csv")
    assert path.read_text() == "k,x_1,x_2\n0,0,1\n1,0.25,0.75\n"


def test_format_summary():
    text = storage.format_summary({
        "mode": "admm",
        "iterations": 12,
        "converged": True,
        "rel_error": math.nan,
        "c0": 13.0,
        "x_star": np.array([2.25, 2.25]),
        "baseline": None,
    })
    assert text == (
        "mode = admm\n"
        "iterations = 12\n"
        "converged = true\n"
        "rel_error = nan\n"
        "c0 = 13\n"
        "x_star = 2.25 2.25\n"
        "baseline = -\n"
    )


def test_write_summary(tmp_path):
    path = storage.write_summary({"a": 1}, tmp_path / "x" / "summary.txt")
    assert path.read_text() == "a = 1\n"


def test_run_dirs_and_listing(tmp_path):
    d = storage.run_dir("b-run", root=tmp_path)
    (d / "trace.csv").write_text("k\n")
    storage.run_dir("a-run", root=tmp_path)
    runs = storage.list_runs(root=tmp_path)
    assert [r["run_id"] for r in runs] == ["a-run", "b-run"]
    assert runs[0]["files"] == []
    assert runs[1]["files"][0]["name"] == "trace.csv"
    assert runs[1]["files"][0]["size"] == 2


def test_list_runs_missing_root(tmp_path):
    assert storage.list_runs(root=tmp_path / "nope") == []


def test_format_summary_numpy_scalars():
    text = storage.format_summary({"ok": np.bool_(False), "mu_bar": np.float64(0.5), "n": np.int64(3)})
    assert text == "ok = false\nmu_bar = 0.5\nn = 3\n"
