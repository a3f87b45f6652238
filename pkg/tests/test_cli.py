import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hopfhj import cli
from hopfhj.hopf_solver import ProblemSpec, reference_potential, solve
from hopfhj.initial_costs import QuadraticCost

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def small_grid(cost, counts=(5, 4), times=(0.0, 0.25)):
    return {"problem": {"n": 10, "cost": cost},
            "query": {"type": "grid", "counts": list(counts), "times": list(times)}}


def test_single_point(tmp_path, capsys):
    out = tmp_path / "sp.csv"
    assert cli.main(["--config", str(CONFIGS / "single_point.json"), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "value = " in text and "p_star" in text
    rows = read_csv(out)
    spec = ProblemSpec(*reference_potential(10), QuadraticCost(np.ones(10)))
    x = np.zeros(10)
    x[:2] = [1, -1]
    assert float(rows[1][0]) == solve(x, 0.25, spec).value


def test_grid_shapes_and_format(tmp_path):
    cfg = write(tmp_path, small_grid({"type": "quadratic", "center": 1.0}))
    assert cli.main(["--config", cfg, "--out", str(tmp_path / "g"), "--quiet"]) == 0
    files = sorted((tmp_path / "g").glob("grid_t*.csv"))
    assert [f.name for f in files] == ["grid_t0.csv", "grid_t1.csv"]
    rows = read_csv(files[1])
    assert rows[0] == ["x1", "x2", "t", "value"]
    assert len(rows) == 1 + 5 * 4
    v = rows[1][3]
    assert float(v) == float(format(float(v), ".17g"))


def test_minplus_grid_has_branch_column(tmp_path):
    cfg = write(tmp_path, small_grid({"type": "min_of_quadratics", "preset": "reference"}, times=(0.1,)))
    assert cli.main(["--config", cfg, "--out", str(tmp_path / "g"), "--quiet"]) == 0
    rows = read_csv(tmp_path / "g" / "grid_t0.csv")
    assert rows[0][-1] == "branch"
    assert {r[-1] for r in rows[1:]} <= {"0", "1", "2"}


def test_grid_is_deterministic_across_threads(tmp_path):
    cfg = write(tmp_path, small_grid({"type": "ellipsoid_norm", "preset": "reference"}, (7, 6), (0.2,)))
    cli.main(["--config", cfg, "--out", str(tmp_path / "a"), "--threads", "1", "--quiet"])
    cli.main(["--config", cfg, "--out", str(tmp_path / "b"), "--threads", "4", "--quiet"])
    assert (tmp_path / "a" / "grid_t0.csv").read_bytes() == (tmp_path / "b" / "grid_t0.csv").read_bytes()


def test_trajectory_csv(tmp_path):
    out = tmp_path / "tr.csv"
    assert cli.main(["--config", str(CONFIGS / "trajectory_ellipsoid.json"), "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["s"] + [f"gamma{i}" for i in range(1, 11)]
    assert len(rows) == 102
    assert [float(v) for v in rows[-1][1:]] == [2, -2] + [0] * 8


def test_general_transform_config(tmp_path, capsys):
    assert cli.main(["--config", str(CONFIGS / "general_transform.json")]) == 0
    assert "value = " in capsys.readouterr().out


def test_benchmark_small(tmp_path):
    doc = {"query": {"type": "benchmark", "n": [2, 4], "points": 2000, "mode": "fixed"}}
    out = tmp_path / "b.csv"
    assert cli.main(["--config", write(tmp_path, doc), "--out", str(out), "--quiet"]) == 0
    rows = read_csv(out)
    assert rows[0][:4] == ["n", "points", "mean_ns", "median_ns"]
    assert [r[0] for r in rows[1:]] == ["2", "4"]
    assert all(float(r[2]) > 0 for r in rows[1:])


def test_verify_core1d(capsys):
    assert cli.main(["--config", str(CONFIGS / "verify_core1d.json")]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_verify_failure_exit_code(tmp_path, monkeypatch):
    from hopfhj import verify
    monkeypatch.setitem(verify.SUITES, "core1d", lambda rng: [verify.Check("x", False, "forced")])
    cfg = write(tmp_path, {"query": {"type": "verify", "suite": "core1d"}})
    assert cli.main(["--config", cfg, "--quiet"]) == cli.EXIT_VERIFY


@pytest.mark.parametrize("doc", [
    {"query": {"type": "nope"}},
    {"problem": {"n": 2, "cost": {"type": "quadratic"}}, "query": {"type": "grid", "counts": [1, 5]}},
    {"problem": {"n": 2, "cost": {"type": "quadratic"}}, "query": {"type": "single_point", "x": [1], "t": 1}},
    {"problem": {"n": 2, "cost": {"type": "bogus"}}, "query": {"type": "single_point", "x": [1, 1], "t": 1}},
    {"problem": {"n": 2, "cost": {"type": "quadratic"}, "transform": {"P": [[1, 1], [1, 1]]}},
     "query": {"type": "single_point", "x": [1, 1], "t": 1}},
    {"query": {"type": "benchmark", "points": 0}},
    {"query": {"type": "verify", "suite": "nothing"}},
    {"problem": {"n": 2, "cost": {"type": "quadratic"}}, "admm": {"eps": -1},
     "query": {"type": "single_point", "x": [1, 1], "t": 1}},
])
def test_config_errors(tmp_path, doc):
    assert cli.main(["--config", write(tmp_path, doc)]) == cli.EXIT_CONFIG


def test_bad_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["--config", str(bad)]) == cli.EXIT_CONFIG
    assert cli.main(["--config", str(tmp_path / "missing.json")]) == cli.EXIT_IO


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    out = blocker / "sub" / "x.csv"
    assert cli.main(["--config", str(CONFIGS / "single_point.json"), "--out", str(out), "--quiet"]) == cli.EXIT_IO


def test_nonconvergence_strict_and_warn(tmp_path):
    doc = {"problem": {"n": 4, "cost": {"type": "shifted_l1_squared", "shift": 1.0}},
           "admm": {"max_iter": 1}, "query": {"type": "single_point", "x": [1, 2, -1, 0.5], "t": 0.3}}
    cfg = write(tmp_path, doc)
    assert cli.main(["--config", cfg, "--quiet"]) == cli.EXIT_NONCONVERGED
    assert cli.main(["--config", cfg, "--quiet", "--warn-only"]) == cli.EXIT_OK


def test_threads_flag_validated(tmp_path):
    assert cli.main(["--config", str(CONFIGS / "single_point.json"), "--threads", "0"]) == cli.EXIT_CONFIG


def test_all_shipped_configs_parse():
    for p in CONFIGS.glob("*.json"):
        cli.parse_config(json.loads(p.read_text()))


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "hopfhj", "--config", str(CONFIGS / "verify_core1d.json"),
                          "--quiet"], capture_output=True, text=True)
    assert out.returncode == 0
