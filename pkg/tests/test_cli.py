import json

import pytest

from app.cli import main
from app.storage import read_trace_csv

CONFIG = {
    "seed": 7,
    "game": {
        "kind": "cournot",
        "participation": [[1, 1]],
        "price_intercepts": [10],
        "price_slopes": [1],
        "cost_quad": [0.5, 0.5],
        "cost_lin": [1, 1],
        "upper": [10, 10],
    },
    "graph": {"preset": "complete2"},
    "solver": {"c": 1.0, "c0": 13.0, "beta": 10.0},
    "stopping": {"tol": 1e-10, "max_iter": 20000},
}


@pytest.fixture
def config_path(tmp_path):
    p = tmp_path / "exp.json"
    p.write_text(json.dumps(CONFIG))
    return p


def _summary(text):
    return dict(line.split(" = ", 1) for line in text.splitlines())


def test_run(config_path, tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert main(["run", "--config", str(config_path), "--out", str(out)]) == 0
    summary = _summary(capsys.readouterr().out)
    assert summary["mode"] == "admm"
    assert summary["converged"] == "true"
    assert summary["x_star"] == "2.25 2.25"
    trace = read_trace_csv(out)
    assert trace[0].k == 0
    assert trace[-1].k == int(summary["iterations"])


def test_run_overrides_max_iter(config_path, tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert main(["run", "--config", str(config_path), "--out", str(out), "--max-iter", "0"]) == 0
    assert _summary(capsys.readouterr().out)["iterations"] == "0"
    assert [t.k for t in read_trace_csv(out)] == [0]


def test_compare(config_path, tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    argv = ["compare", "--config", str(config_path), "--out", str(out), "--tol", "1e-3", "--max-iter", "5000"]
    assert main(argv) == 0
    summary = _summary(capsys.readouterr().out)
    assert summary["mode"] == "compare"
    assert any(k.startswith("speedup_iterations") for k in summary)
    assert "baseline_iterations" in summary
    assert (tmp_path / "cmp_baseline.csv").is_file()


def test_check_params(config_path, capsys):
    assert main(["check-params", "--config", str(config_path)]) == 0
    summary = _summary(capsys.readouterr().out)
    assert summary["c_min"] == "6"
    assert summary["lambda2"] == "2"
    assert summary["beta_satisfies_condition"] == "false"


def test_bad_config_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"game": ')
    assert main(["run", "--config", str(p)]) == 2
    assert capsys.readouterr().err.startswith("error: ")


def test_solver_error_exits_2(tmp_path, capsys):
    p = tmp_path / "exp.json"
    p.write_text(json.dumps({**CONFIG, "graph": {"n": 2, "edges": [[1, 2], [2, 5]]}}))
    assert main(["run", "--config", str(p)]) == 2
    assert "error" in capsys.readouterr().err


def test_io_error_exits_1(config_path, tmp_path, capsys):
    blocker = tmp_path / "file.txt"
    blocker.write_text("x")
    assert main(["run", "--config", str(config_path), "--out", str(blocker / "trace.csv")]) == 1
    assert "io error" in capsys.readouterr().err


@pytest.mark.parametrize("seed", ["--seed=-1", "--seed=18446744073709551616", "--seed=abc"])
def test_seed_must_be_u64(config_path, seed):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--config", str(config_path), seed])
    assert exc.value.code == 2


def test_example1_record_every(tmp_path, capsys):
    argv = ["example1", "--seed", "3", "--out", str(tmp_path), "--max-iter", "5", "--record-every", "2"]
    assert main(argv) == 0
    assert _summary(capsys.readouterr().out)["iterations"] == "5"
    assert [t.k for t in read_trace_csv(tmp_path / "trace.csv")] == [0, 2, 4, 5]


def test_example2_record_every(tmp_path, capsys):
    argv = ["example2", "--seed", "3", "--out", str(tmp_path), "--max-iter", "3",
            "--baseline-max-iter", "3", "--record-every", "2"]
    assert main(argv) == 0
    capsys.readouterr()
    assert [t.k for t in read_trace_csv(tmp_path / "admm.csv")] == [0, 2, 3]
    assert [t.k for t in read_trace_csv(tmp_path / "baseline.csv")] == [0, 2, 3]
