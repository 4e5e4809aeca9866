import json
from pathlib import Path

import pytest

from enginecool import write_trace_csv
from enginecool.cli import main
from enginecool.config import RunConfig, load_config
from enginecool.exceptions import ConfigurationError
from enginecool.simulator import read_metrics_json

FULL_CONFIG = """\
[paths]
trace = lap.csv
output_dir = out

[run]
seed = 3
jobs = 1

[plant]
rho = 2700        ; aluminium
wetted_area = 0.2

[pump]
tau_p = 0.25

[heat]
fired_alpha_ref = 1400
T_gas_fired = 950

[controller]
strategy = combined
k_P = -1.0
target_coasting = 415

[simulation]
dt = 0.001
decimation = 100
periodic = false

[tune]
tau_c = 4

[sweep]
k_P_range = -2, -1, 2
k_I_range = -0.1, -0.05, 2
k_D_range = -1, -1, 1
weights = 1, 0

[range]
target_min = 380
target_max = 420
target_step = 20
"""


@pytest.fixture
def workdir(tmp_path, short_trace):
    write_trace_csv(short_trace, tmp_path / "lap.csv")
    (tmp_path / "run.ini").write_text(FULL_CONFIG)
    return tmp_path


def test_defaults_without_file():
    assert load_config(None) == RunConfig()


def test_full_config(workdir):
    cfg = load_config(workdir / "run.ini")
    assert cfg.trace == workdir / "lap.csv"
    assert cfg.output_dir == workdir / "out"
    assert cfg.plant.wetted_area == 0.2 and cfg.pump.tau_p == 0.25
    assert cfg.heat.fired_alpha_mean.value_at_ref == 1400.0
    assert cfg.heat.T_gas_fired == 950.0
    assert cfg.controller.strategy == "combined" and cfg.controller.k_P == -1.0
    assert cfg.controller.schedule.T_target_coasting == 415.0
    assert cfg.simulation.periodic is False and cfg.simulation.decimation == 100
    assert cfg.tune.tau_c == 4.0
    assert cfg.sweep.k_D_range.count == 1 and cfg.sweep.seed == 3
    assert cfg.sweep_weights == (1.0, 0.0)
    assert cfg.range.targets() == [380.0, 400.0, 420.0]


@pytest.mark.parametrize("text", [
    "[plant]\nfoo = 1\n",
    "[nonsense]\na = 1\n",
    "[plant]\nrho = abc\n",
    "[plant]\nrho = -5\n",
    "[sweep]\nk_P_range = -1, 0\n",
    "[simulation]\nperiodic = maybe\n",
    "[controller]\nreference = other\n",
])
def test_config_errors(tmp_path, text):
    p = tmp_path / "c.ini"
    p.write_text(text)
    with pytest.raises(ConfigurationError):
        load_config(p)


def test_missing_trace_exit_2(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert main(["simulate", "--trace", str(missing)]) == 2
    assert str(missing) in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path, capsys):
    assert main(["--config", str(tmp_path / "x.ini"), "tune"]) == 2


def test_bad_arguments_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--strategy", "turbo"])
    assert info.value.code == 2


def test_runtime_failure_exit_1(tmp_path, capsys):
    assert main(["tune", "--mdot-w0", "9", "--output-dir", str(tmp_path)]) == 1
    assert "outside" in capsys.readouterr().err


def test_tune_output(tmp_path, capsys):
    assert main(["tune", "--output-dir", str(tmp_path)]) == 0
    a = json.loads(capsys.readouterr().out)
    assert set(a) == {"tau_e", "k_s_e", "k_P", "k_I", "k_D", "tau_c"}
    assert main(["tune", "--tau-c", str(2 * a["tau_c"]), "--output-dir", str(tmp_path)]) == 0
    b = json.loads(capsys.readouterr().out)
    assert b["k_I"] == pytest.approx(a["k_I"] / 2, rel=1e-12)


def test_simulate_with_config(workdir, capsys):
    assert main(["--config", str(workdir / "run.ini"), "simulate"]) == 0
    m = json.loads(capsys.readouterr().out)
    on_disk = read_metrics_json(workdir / "out" / "metrics.json")
    assert on_disk.to_dict() == m
    lines = (workdir / "out" / "timeseries.csv").read_text().splitlines()
    assert lines[0] == "t,T_cyl,T_w,mdot_cmd,mdot_actual,Q_dot,P_hyd"
    assert len(lines) == 1 + 220


def test_flags_after_command_and_precedence(workdir, capsys):
    out = workdir / "elsewhere"
    rc = main(["simulate", "--config", str(workdir / "run.ini"), "--output-dir", str(out),
               "--strategy", "pid", "--target", "410"])
    assert rc == 0
    assert (out / "metrics.json").is_file()
    assert not (workdir / "out").exists()


def test_tuned_gains_feed_simulate(tmp_path, capsys):
    assert main(["tune", "--output-dir", str(tmp_path)]) == 0
    capsys.readouterr()
    rc = main(["simulate", "--output-dir", str(tmp_path), "--strategy", "pid",
               "--gains-json", str(tmp_path / "gains.json")])
    assert rc == 0
    m = json.loads(capsys.readouterr().out)
    assert 300 < m["min_T_cyl"] <= m["max_T_cyl"] < 700


def test_calibrate(tmp_path, capsys):
    assert main(["calibrate", "--output-dir", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["max_T_cyl"] - 407.0) < 0.1
    assert (tmp_path / "calibration.json").is_file()


def test_range(tmp_path, capsys):
    cfg = tmp_path / "r.ini"
    cfg.write_text("[range]\ntarget_min = 380\ntarget_max = 510\ntarget_step = 10\n")
    assert main(["--config", str(cfg), "--output-dir", str(tmp_path), "range"]) == 0
    rows = (tmp_path / "range.csv").read_text().splitlines()
    assert rows[0].startswith("target,mean_T_cyl,std_T_cyl")
    assert len(rows) == 1 + 14


def test_sweep_single_point_matches_simulate(workdir, capsys):
    cfg = workdir / "one.ini"
    cfg.write_text("[paths]\ntrace = lap.csv\n[simulation]\nperiodic = false\n"
                   "[sweep]\nk_P_range = -1.4, -1.4, 1\nk_I_range = -0.05, -0.05, 1\n"
                   "k_D_range = -1, -1, 1\n")
    assert main(["--config", str(cfg), "--output-dir", str(workdir / "sw"), "sweep"]) == 0
    capsys.readouterr()
    assert main(["--config", str(cfg), "--output-dir", str(workdir / "sim"), "simulate"]) == 0
    capsys.readouterr()
    sim = read_metrics_json(workdir / "sim" / "metrics.json")
    row = (workdir / "sw" / "sweep.csv").read_text().splitlines()
    header, values = row[0].split(","), row[1].split(",")
    rec = dict(zip(header, values))
    assert float(rec["std_T_cyl"]) == sim.std_T_cyl
    assert float(rec["mean_Q_dot"]) == sim.mean_Q_dot
    summary = json.loads(Path(workdir / "sw" / "sweep_summary.json").read_text())
    assert summary["n_stable"] == 1


def test_example_config_loads():
    cfg = load_config(Path(__file__).parents[1] / "configs" / "example.ini")
    assert cfg.controller.reference == "mechanical"
    assert cfg.sweep.k_D_range.count == 1
