import csv
import json
import os
import subprocess
import sys

import pytest

from fadesched.cli import RUN_CSV_HEADER, SWEEP_CSV_HEADER, main
from fadesched.config import ExperimentConfig


def write(tmp_path, name, data):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


SMALL = {
    "graph": {"links": [{"id": 1, "endpoints": [0, 1]}, {"id": 2, "endpoints": [1, 2]}], "khop": 1},
    "fading": {"joint": {"pi": [0.5, 0.5], "rates": [[1.0, 0.1], [0.1, 1.0]]}},
    "arrivals": {"kind": "poisson", "rates": [0.2, 0.2]},
    "schedulers": ["gfs", "gms"],
    "sim": {"horizon": 3000, "seed": 5},
    "sweep": {"direction": [1.0, 1.0], "loads": [0.0, 0.2], "replications": 2},
}


def lpf_json(capsys, *args):
    assert main(["lpf", *args, "--json"]) == 0
    return json.loads(capsys.readouterr().out)


def test_lpf_presets(capsys):
    assert lpf_json(capsys, "--preset", "fig2b")["sigma_star"] == pytest.approx(1.0, abs=1e-9)
    six = lpf_json(capsys, "--preset", "six-cycle")
    assert six["sigma_star"] == pytest.approx(2 / 3, abs=1e-6)
    assert six["minimizing_subset"] == [1, 2, 3, 4, 5, 6]
    assert six["schema_version"] == 1


def test_lpf_single_link_graph_file(tmp_path, capsys):
    path = write(tmp_path, "g.json", {"links": [{"id": "x", "endpoints": ["a", "b"]}], "khop": 1})
    assert lpf_json(capsys, "--config", path)["sigma_star"] == 1.0


def test_lpf_writes_report(tmp_path, capsys):
    assert main(["lpf", "--preset", "six-cycle", "--out", str(tmp_path)]) == 0
    assert "sigma*" in capsys.readouterr().out
    assert json.loads((tmp_path / "lpf.json").read_text())["subsets_evaluated"] == 63


def test_capacity_error_exit_code(tmp_path, capsys):
    links = [{"id": i, "endpoints": [i, i + 1]} for i in range(14)]
    assert main(["lpf", "--config", write(tmp_path, "big.json", {"links": links, "khop": 1})]) == 3
    assert "cap" in capsys.readouterr().err


def test_validation_error_reports_field_path(tmp_path, capsys):
    bad = json.loads(json.dumps(SMALL))
    bad["sim"]["horizon"] = 0
    assert main(["simulate", "--config", write(tmp_path, "bad.json", bad), "--out", str(tmp_path)]) == 2
    assert "sim.horizon" in capsys.readouterr().err


def test_cross_reference_error(tmp_path, capsys):
    bad = json.loads(json.dumps(SMALL))
    bad["sweep"]["direction"] = [1.0]
    assert main(["sweep", "--config", write(tmp_path, "bad.json", bad), "--out", str(tmp_path)]) == 2
    assert "sweep.direction" in capsys.readouterr().err


def test_parse_errors(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert main(["lpf", "--config", str(p)]) == 2
    assert main(["lpf", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["lpf", "--preset", "nope"]) == 2
    assert main(["lpf"]) == 2
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_region_report(tmp_path, capsys):
    assert main(["region", "--preset", "fig2b", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "region.json").read_text())
    assert rep["mean_rate_region"]["member"] and rep["fading_region"]["member"]
    assert rep["gfs_guaranteed"] is True
    assert rep["mean_rates"] == pytest.approx([2.7, 2.1, 2.8, 3.1], abs=1e-12)


def test_region_nonmember_certificate(tmp_path, capsys):
    cfg = json.loads(json.dumps(SMALL))
    cfg["lambda"] = [0.6, 0.6]
    assert main(["region", "--config", write(tmp_path, "c.json", cfg), "--json"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert not rep["fading_region"]["member"]
    assert rep["fading_region"]["margin"] > 0


def test_simulate_horizon_one(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["simulate", "--preset", "fig2b", "--horizon", "1", "--out", str(out)]) == 0
    rows = list(csv.reader((out / "run_gfs.csv").open()))
    assert rows[0] == [*RUN_CSV_HEADER, "q_1", "q_2", "q_3", "q_4"]
    assert len(rows) == 2 and rows[1][0] == "1"
    assert float(rows[1][1]) == pytest.approx(sum(map(float, rows[1][2:])))


def test_simulate_outputs_are_byte_identical(tmp_path, capsys):
    path = write(tmp_path, "c.json", SMALL)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["simulate", "--config", path, "--out", str(out)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"run_gfs.csv", "run_gms.csv", "summary.json"}


def test_summary_echo_revalidates(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["simulate", "--config", write(tmp_path, "c.json", SMALL), "--seed", "77", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    cfg = ExperimentConfig.model_validate(summary["config"])
    assert cfg.sim.seed == 77 and summary["seed"] == 77
    assert summary["schema_version"] == 1
    assert [r["scheduler"] for r in summary["runs"]] == ["gfs", "gms"]


def test_sweep_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    path = write(tmp_path, "c.json", SMALL)
    assert main(["sweep", "--config", path, "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert list(rows[0]) == list(SWEEP_CSV_HEADER)
    zero = [r for r in rows if float(r["load"]) == 0.0]
    assert len(zero) == 2 and all(float(r["mean_total_queue"]) == 0.0 for r in zero)
    summary = json.loads((out / "sweep_summary.json").read_text())
    ExperimentConfig.model_validate(summary["config"])
    assert len(summary["runs"]) == 2 * 2 * 2

    again = tmp_path / "p"
    assert main(["sweep", "--config", path, "--out", str(again), "--jobs", "2"]) == 0
    assert (out / "sweep.csv").read_bytes() == (again / "sweep.csv").read_bytes()


def test_adversarial_preset_nonopp_unstable(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["simulate", "--preset", "adversarial-2link", "--scheduler", "nonopp", "--out", str(out)]) == 0
    run = json.loads((out / "summary.json").read_text())["runs"][0]
    assert run["verdict"] == "unstable" and run["normalized_slope"] > 0


def test_four_link_preset_gfs_stable_at_unit_load(tmp_path, capsys):
    out = tmp_path / "o"
    args = ["simulate", "--preset", "fig2b", "--load", "1.0", "--scheduler", "gfs", "--out", str(out)]
    assert main(args) == 0
    assert json.loads((out / "summary.json").read_text())["runs"][0]["verdict"] == "stable"


def test_log_level_from_environment(tmp_path):
    path = write(tmp_path, "c.json", SMALL)
    env = dict(os.environ, FADESCHED_LOG="info")
    cmd = [sys.executable, "-m", "fadesched", "sweep", "--config", path, "--out", str(tmp_path / "o")]
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    assert "INFO" in proc.stderr
    env["FADESCHED_LOG"] = "error"
    proc = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    assert proc.stderr == ""
