import csv
import json
import shutil
import subprocess
import sys

import pytest
import yaml

from zo_saddle.cli import RUN_COLUMNS, main
from zo_saddle.config import load_config, parse_config
from zo_saddle.errors import ConfigError


def _write(tmp_path, cfg, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


def _pennies(tmp_path, **extra):
    cfg = {
        "problem": {"kind": "matching_pennies", "xi": {"kind": "uniform", "amplitude": 1.0}},
        "solver": {"n_iters": 100, "tau": 0.001},
        "output": str(tmp_path / "out"),
    }
    for k, v in extra.items():
        cfg[k] = v
    return cfg


def _rows(tmp_path, sub="out"):
    with open(tmp_path / sub / "runs.csv") as fh:
        return list(csv.DictReader(fh))


def test_solve_smoke(tmp_path):
    assert main(["solve", _write(tmp_path, _pennies(tmp_path))]) == 0
    rows = _rows(tmp_path)
    assert len(rows) == 1
    assert list(rows[0]) == list(RUN_COLUMNS)
    assert float(rows[0]["final_gap"]) >= 0
    assert rows[0]["oracle_calls"] == "200" and rows[0]["N"] == "100"
    assert rows[0]["wall_ms"] == ""
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["n_runs"] == 1 and report["config_hash"] == rows[0]["config_hash"]


def test_solve_three_seeds(tmp_path):
    cfg = _pennies(tmp_path, sweep={"seeds": [4, 5, 6]})
    assert main(["solve", _write(tmp_path, cfg)]) == 0
    rows = _rows(tmp_path)
    assert [r["seed"] for r in rows] == ["4", "5", "6"]
    assert [r["run_id"] for r in rows] == ["0", "1", "2"]


def test_sweep_grid_rows(tmp_path):
    cfg = _pennies(tmp_path, sweep={"seeds": [0, 1], "n_ladder": [10, 20], "delta_grid": [0.0, 0.01]},
                   noise={"kind": "bounded", "wavelength": 0.001})
    assert main(["solve", _write(tmp_path, cfg)]) == 0
    rows = _rows(tmp_path)
    assert len(rows) == 8
    assert [(r["delta"], r["N"]) for r in rows[::2]] == [("0.0", "10"), ("0.0", "20"), ("0.01", "10"), ("0.01", "20")]
    assert all(int(r["oracle_calls"]) == 2 * int(r["N"]) for r in rows)
    assert {r["regime"] for r in rows} == {"bounded"}


def test_timing_column_opt_in(tmp_path):
    assert main(["solve", _write(tmp_path, _pennies(tmp_path, record_timing=True))]) == 0
    assert float(_rows(tmp_path)[0]["wall_ms"]) >= 0


def test_unknown_key_exits_2(tmp_path, capsys):
    cfg = _pennies(tmp_path)
    cfg["solver"]["taux"] = 0.1
    assert main(["solve", _write(tmp_path, cfg)]) == 2
    assert "solver.taux" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_bad_configs_exit_2(tmp_path):
    assert main(["solve", str(tmp_path / "missing.yaml")]) == 2
    (tmp_path / "bad.yaml").write_text("problem: [unclosed")
    assert main(["solve", str(tmp_path / "bad.yaml")]) == 2
    cfg = _pennies(tmp_path)
    cfg["solver"] = {"n_iters": 10}
    assert main(["solve", _write(tmp_path, cfg)]) == 2
    cfg = _pennies(tmp_path, sweep={"seeds": [1, 1]})
    assert main(["solve", _write(tmp_path, cfg)]) == 2
    assert main(["frobnicate"]) == 2


def test_step_rule_mismatch_exits_2(tmp_path):
    cfg = _pennies(tmp_path, noise={"kind": "bounded", "amplitude": 0.1})
    cfg["solver"]["step_rule"] = {"kind": "case2"}
    assert main(["solve", _write(tmp_path, cfg)]) == 2


def test_runtime_error_exits_3(tmp_path, capsys):
    cfg = _pennies(tmp_path)
    cfg["problem"] = {"kind": "matrix_game", "matrix": [[1.0, float("nan")], [0.0, 1.0]]}
    assert main(["solve", _write(tmp_path, cfg)]) == 3
    assert "runtime error" in capsys.readouterr().err


def test_csv_byte_identical_across_reruns(tmp_path):
    cfg = _pennies(tmp_path, sweep={"seeds": [0, 1, 2]})
    path = _write(tmp_path, cfg)
    assert main(["solve", path]) == 0
    first = (tmp_path / "out" / "runs.csv").read_bytes()
    shutil.rmtree(tmp_path / "out")
    assert main(["solve", path]) == 0
    assert (tmp_path / "out" / "runs.csv").read_bytes() == first


def test_rate_ladder(tmp_path, capsys):
    cfg = _pennies(tmp_path, sweep={"seeds": [0, 1, 2], "n_ladder": [100, 400, 1600]})
    assert main(["rate", _write(tmp_path, cfg)]) == 0
    assert "gap slope vs N" in capsys.readouterr().out
    with open(tmp_path / "out" / "rates.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["value"] for r in rows] == ["100", "400", "1600"]
    assert list(rows[0]) == ["axis", "value", "total_iters", "median_gap", "n_seeds"]


def test_rate_single_point_exits_2(tmp_path):
    cfg = _pennies(tmp_path, sweep={"seeds": [0], "n_ladder": [100]})
    assert main(["rate", _write(tmp_path, cfg)]) == 2


def test_rate_restart_ladder(tmp_path, capsys):
    cfg = {
        "problem": {"kind": "strongly_monotone", "matrix": [[1, 0], [0, 1]], "mu": 1.0,
                    "x_star": [0.54, 0.72], "y_star": [-0.9, 0.0]},
        "solver": {"tau": 0.001},
        "restart": {"enabled": True, "compare_plain": True},
        "sweep": {"seeds": [0, 1], "eps_ladder": [0.5, 0.35, 0.25]},
        "output": str(tmp_path / "out"),
    }
    assert main(["rate", _write(tmp_path, cfg)]) == 0
    out = capsys.readouterr().out
    assert "restart total-iterations exponent" in out and "plain total-iterations exponent" in out


def test_verify_suite_exit_codes(tmp_path):
    out = tmp_path / "checks.csv"
    assert main(["verify", "tails", "--seed", "7", "--output", str(out)]) == 0
    assert out.exists()
    assert main(["verify", "no_such_suite"]) == 2
    forced = tmp_path / "forced.csv"
    code = main(["verify", "bias", "--seed", "7", "--delta", "1.0", "--declared-delta", "0.01",
                 "--output", str(forced)])
    assert code == 1
    assert forced.exists()


def test_workers_env_override(tmp_path, monkeypatch):
    cfg = _pennies(tmp_path, sweep={"seeds": [0, 1], "n_ladder": [10, 20, 30]})
    path = _write(tmp_path, cfg)
    assert main(["solve", path]) == 0
    serial = (tmp_path / "out" / "runs.csv").read_bytes()
    monkeypatch.setenv("ZO_SADDLE_THREADS", "3")
    assert main(["solve", path]) == 0
    assert (tmp_path / "out" / "runs.csv").read_bytes() == serial


def test_config_hash_and_examples(tmp_path):
    a = parse_config(_pennies(tmp_path))
    b = parse_config(_pennies(tmp_path))
    assert a.config_hash() == b.config_hash()
    c = parse_config(_pennies(tmp_path, sweep={"seeds": [3]}))
    assert c.config_hash() != a.config_hash()
    with pytest.raises(ConfigError, match="unknown key 'noise.amp'"):
        parse_config(_pennies(tmp_path, noise={"amp": 1.0}))
    for name in ("pennies", "pennies_rate", "restart_rate", "noise_sweep"):
        load_config(f"{__file__.rsplit('/', 2)[0]}/configs/{name}.yaml")


def test_console_script(tmp_path):
    exe = shutil.which("zo-saddle")
    cmd = [exe] if exe else [sys.executable, "-c", "from zo_saddle.cli import entry; entry()"]
    res = subprocess.run(cmd + ["verify", "nope"], capture_output=True, text=True)
    assert res.returncode == 2
