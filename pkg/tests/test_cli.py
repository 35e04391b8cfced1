import csv
import json
import math

import pytest

from qsdphase.cli import main
from qsdphase.records import ResultRecord, Table, export


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def _read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


def test_single_trajectory_byte_identical(tmp_path):
    cfg = _write(tmp_path, "s.ini", "[run]\nmode = single-trajectory\n[grid]\ndt = 0.01\n")
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert main(["run", "--config", cfg, "--out", str(out), "--seed", "42"]) == 0
        outs.append(out)
    for name in ("single_trajectory.csv", "single_trajectory_summary.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    raw = (outs[0] / "single_trajectory.csv").read_bytes()
    assert b"\r\n" not in raw
    assert raw.splitlines()[0].decode("utf-8").startswith("t [1/omega],gamma_tot [rad]")


def test_ensemble_independent_of_workers(tmp_path):
    cfg = _write(tmp_path, "e.ini", "[run]\nmode = ensemble\nn_theta = 3\n[grid]\ndt = 0.01\n"
                                    "[ensemble]\nn_traj = 120\nn_blocks = 12\n")
    for w in (1, 2):
        assert main(["run", "--config", cfg, "--out", str(tmp_path / f"w{w}"), "--workers", str(w)]) == 0
    for name in ("ensemble.csv", "ensemble_summary.json"):
        assert (tmp_path / "w1" / name).read_bytes() == (tmp_path / "w2" / name).read_bytes()


def test_analytic_dephasing_column(tmp_path):
    cfg = _write(tmp_path, "a.ini", "[run]\nmode = analytic-only\n[model]\ncoupling = dephasing\n"
                                    "[bath]\ngamma = 0.4\nOmega = 0\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path), "--format", "csv"]) == 0
    rows = _read_csv(tmp_path / "analytic.csv")
    assert rows[0][0] == "theta [rad]" and rows[0][4] == "gamma_geo_principal [rad]"
    assert len(rows) == 10
    for r in rows[1:]:
        th, principal = float(r[0]), float(r[4])
        ref = math.pi * (math.cos(th) - 1)
        assert abs(math.remainder(principal - ref, 2 * math.pi)) < 1e-12
    assert not (tmp_path / "analytic_summary.json").exists()


def test_figure2_schema(tmp_path):
    assert main(["figure2", "--out", str(tmp_path), "--n-traj", "60", "--dt", "0.02"]) in (0, 1)
    for g in ("0.1", "0.5", "1.2", "100"):
        rows = _read_csv(tmp_path / f"figure2_gamma_{g}.csv")
        assert [c.split(" ")[0] for c in rows[0]] == ["theta", "gamma_G_analytic", "gamma_G_ensemble", "std_error"]
        assert len(rows) == 10
    summary = json.loads((tmp_path / "figure2_summary.json").read_text())
    assert {"name", "deviation", "tolerance", "verdict"} <= set(summary["checks"][0])
    assert summary["config"]["gammas"] == [0.1, 0.5, 1.2, 100.0]


def test_figure3_shift_columns(tmp_path):
    assert main(["figure3", "--out", str(tmp_path), "--n-traj", "60", "--dt", "0.02"]) in (0, 1)
    for g in ("100", "7", "0.3", "0.7"):
        rows = _read_csv(tmp_path / f"figure3_gamma_{g}.csv")
        assert rows[0][4:] == ["shift_analytic [rad]", "shift_ensemble [rad]"]
        shifts = [float(r[4]) for r in rows[1:]]
        assert max(shifts) - min(shifts) <= 1e-10


def test_check_failure_exit_code(tmp_path):
    cfg = _write(tmp_path, "f.ini", "[tolerances]\nsolid_angle = 0\n[grid]\ndt = 0.01\n")
    # an impossible tolerance turns the figure1 solid-angle check red
    assert main(["figure1", "--config", cfg, "--out", str(tmp_path)]) == 1
    summary = json.loads((tmp_path / "figure1_summary.json").read_text())
    assert summary["verdict"] == "fail"


@pytest.mark.parametrize("argv", [
    ["run", "--n-traj", "0"],
    ["run", "--seed", "-3"],
    ["figure1", "--dt", "-1"],
    ["run", "--format", "xml"],
    ["bogus"],
])
def test_configuration_error_exit_code(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)] if argv[0] != "bogus" else argv) == 2


def test_unknown_key_reports_line(tmp_path, capsys):
    cfg = _write(tmp_path, "bad.ini", "[model]\nomega = 1\nomgea = 2\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "bad.ini:3: unknown key 'omgea'" in capsys.readouterr().err


def test_runtime_error_reports_seed(tmp_path, capsys):
    cfg = _write(tmp_path, "p.ini", "[run]\nmode = single-trajectory\n[model]\nomega = 0\n"
                                    "[bath]\ngamma = 0.5\n[grid]\nt_final = 10\ndt = 0.01\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path), "--seed", "17"]) == 1
    assert "root_seed=17" in capsys.readouterr().err


def test_empty_sweep_header_only(tmp_path):
    rec = ResultRecord("empty", {}, tables={"empty": Table(["theta [rad]", "value [rad]"], [])})
    export(rec, tmp_path, "csv")
    assert (tmp_path / "empty.csv").read_bytes() == b"theta [rad],value [rad]\n"


def test_non_finite_values_rejected(tmp_path):
    rec = ResultRecord("bad", {}, tables={"bad": Table(["x [1]"], [(float("nan"),)])})
    with pytest.raises(ValueError):
        export(rec, tmp_path, "csv")
