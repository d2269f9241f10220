import csv
import json

import numpy as np
import pytest

from deltashock.cli import main
from deltashock.config import parse_config
from deltashock.errors import ConfigError


def write_cfg(tmp_path, name="run.json", **overrides):
    cfg = {"problem": "example12", "eps_list": [0.05], "times": [0.5],
           "grid": {"x_min": -2.0, "x_max": 2.0, "n": 201}, "output_dir": "out"}
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg, indent=2) + "\n")
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_schema_error_reports_line():
    text = '{\n  "problem": "example12",\n  "eps_list": [0.05, 1.5],\n  "times": [0.5],\n  "output_dir": "o"\n}\n'
    with pytest.raises(ConfigError, match=r"<config>:3: eps_list/1"):
        parse_config(text)


def test_unknown_key_and_missing_field():
    with pytest.raises(ConfigError, match="Additional properties"):
        parse_config('{"problem": "example12", "eps_list": [0.1], "times": [1], "output_dir": "o", "seed": 1}')
    with pytest.raises(ConfigError, match="'times' is a required property"):
        parse_config('{"problem": "example12", "eps_list": [0.1], "output_dir": "o"}')


def test_invalid_json_line():
    with pytest.raises(ConfigError, match=r":2: invalid JSON"):
        parse_config('{\n  "problem": ,\n}')


def test_eps_must_decrease():
    with pytest.raises(ConfigError, match="strictly decreasing"):
        parse_config('{"problem": "example12", "eps_list": [0.02, 0.04], "times": [1], "output_dir": "o"}')
    with pytest.raises(ConfigError, match="strictly decreasing"):
        parse_config('{"problem": "example12", "eps_list": [0.02, 0.02], "times": [1], "output_dir": "o"}')


def test_times_within_horizon():
    with pytest.raises(ConfigError, match="5 t"):
        parse_config('{"problem": "example12", "eps_list": [0.1], "times": [6.0], "output_dir": "o"}')


def test_custom_problem_and_defaults():
    cfg = parse_config(json.dumps({
        "problem": {"flux": {"f": "quadratic", "g": {"name": "linear", "slope": 2}},
                    "states": {"U1": 1, "U0": -1, "V1": 1, "V0": 1}, "interval": [-1, 1]},
        "eps_list": [0.1, 0.05], "times": [0.5], "output_dir": "o"}))
    assert cfg.problem_id == "custom"
    assert cfg.problem.consts.tstar == pytest.approx(1.0)
    assert cfg.x_grid.size == 2001 and cfg.exclusion == 3.0 and cfg.quad_n == 400


def test_degenerate_problem_is_config_error():
    with pytest.raises(ConfigError):
        parse_config(json.dumps({
            "problem": {"flux": {"f": "quadratic", "g": "linear"},
                        "states": {"U1": 1, "U0": 1, "V1": 1, "V0": 1}, "interval": [-1, 1]},
            "eps_list": [0.1], "times": [0.5], "output_dir": "o"}))


def test_cli_config_error_exit(tmp_path, capsys):
    path = write_cfg(tmp_path, eps_list=[0.05, 1.5])
    assert main(["tables", "--config", str(path)]) == 2
    assert "run.json:" in capsys.readouterr().err


def test_missing_file_exit(tmp_path):
    assert main(["tables", "--config", str(tmp_path / "nope.json")]) == 2


def test_tables(tmp_path):
    path = write_cfg(tmp_path)
    assert main(["tables", "--config", str(path), "--check"]) == 0
    head, rows = read_csv(tmp_path / "out" / "switch_table.csv")
    assert head == ["rho", "B1", "B2"]
    sums = np.array([[float(r[1]) + float(r[2])] for r in rows])
    assert np.max(np.abs(sums - 1.0)) <= 1e-9
    head, rows = read_csv(tmp_path / "out" / "rho_table.csv")
    assert head == ["tau", "rho", "B1", "I1", "I2"]
    vals = np.array(rows, dtype=float)
    pre = vals[:, 0] <= 0
    assert pre.any()
    np.testing.assert_array_equal(vals[pre, 1], vals[pre, 0])


def test_csv_format(tmp_path):
    path = write_cfg(tmp_path)
    main(["tables", "--config", str(path)])
    raw = (tmp_path / "out" / "switch_table.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    cell = raw.split(b"\n")[1].split(b",")[1].decode()
    assert cell == "%.12e" % float(cell)


def test_snapshot(tmp_path):
    path = write_cfg(tmp_path, times=[0.5, 2.0])
    assert main(["snapshot", "--config", str(path), "--check"]) == 0
    out = tmp_path / "out"
    head, rows = read_csv(out / "snapshot_t0.5_e0.05.csv")
    assert head == ["x", "u", "v", "domain"]
    assert len(rows) == 201
    assert {r[3] for r in rows} == {"D1", "D2", "D3", "D4", "D5"}
    curves = json.loads((out / "curves_t2_e0.05.json").read_text())
    assert set(curves) >= {"phi1", "phi2", "phi1_star", "phi2_star"}
    assert curves["phi2"] <= curves["phi2_star"] < curves["phi1_star"] <= curves["phi1"]
    assert abs(curves["phi2_star"]) <= 10 * 0.05


def test_solver_error_exit(tmp_path, capsys):
    # with almost no initial spreading the characteristics cross after t*
    path = write_cfg(tmp_path, times=[2.0], problem={
        "flux": {"f": "quadratic", "g": {"name": "linear", "slope": 2}},
        "states": {"U1": 1, "U0": -1, "V1": 1, "V0": 1}, "interval": [-1, 1], "A": 0.01})
    assert main(["snapshot", "--config", str(path)]) == 3
    assert "snapshot eps=0.05" in capsys.readouterr().err


def test_limits(tmp_path):
    path = write_cfg(tmp_path, eps_list=[0.04, 0.02], times=[2.0])
    assert main(["limits", "--config", str(path), "--check"]) == 0
    rep = json.loads((tmp_path / "out" / "limits_t2.json").read_text())
    assert rep["predicted_mass"] == pytest.approx(7.2, abs=1e-12)
    head, rows = read_csv(tmp_path / "out" / "limits_t2.csv")
    assert head == ["eps", "mass", "location", "R_u", "R_v"]
    for r in rows:
        assert abs(float(r[2])) <= 5 * float(r[0])
        assert r[3] == "nan"  # residuals need four halving eps values


def test_oracle_compare(tmp_path):
    path = write_cfg(tmp_path, times=[0.5, 1.5])
    assert main(["oracle-compare", "--config", str(path)]) == 0
    summary = json.loads((tmp_path / "out" / "oracle_compare_summary.json").read_text())
    (row,) = summary["runs"]  # only t < 1 is compared
    assert row["t"] == 0.5 and row["u_max_edges_only"] <= 5 * 0.05
    head, rows = read_csv(tmp_path / "out" / "oracle_compare_t0.5_e0.05.csv")
    assert head[:3] == ["x", "u", "u_oracle"] and len(rows) == 201


def test_oracle_compare_needs_example12(tmp_path):
    assert main(["oracle-compare", "--config", str(write_cfg(tmp_path, problem="quartic"))]) == 2
    assert main(["oracle-compare", "--config", str(write_cfg(tmp_path, "late.json", times=[1.5]))]) == 2


def test_check_failure_exit(tmp_path, capsys):
    # the v comparison at eps = 0.02 misses its 0.05 threshold (see the acceptance suite)
    path = write_cfg(tmp_path, eps_list=[0.02])
    assert main(["oracle-compare", "--config", str(path), "--check"]) == 4
    err = capsys.readouterr().err
    assert "sup |v - oracle|" in err and "sup |u - oracle|" not in err


def test_deterministic_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    for d in (a, b):
        p = write_cfg(d, times=[0.5, 1.5])
        assert main(["snapshot", "--config", str(p)]) == 0
        assert main(["tables", "--config", str(p)]) == 0
    names = sorted(f.name for f in (a / "out").iterdir())
    assert names == sorted(f.name for f in (b / "out").iterdir())
    for n in names:
        assert (a / "out" / n).read_bytes() == (b / "out" / n).read_bytes()
    assert not list((a / "out").glob(".*.tmp"))


def test_console_script_help(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    assert "oracle-compare" in capsys.readouterr().out
