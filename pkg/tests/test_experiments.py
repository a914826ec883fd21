import json
import math
import os

import numpy as np
import pytest

from czsim import config, experiments
from czsim.errors import CalibrationError
from czsim.experiments import (ExperimentResult, Table, resolve_pulse,
                               run_command, write_artifacts, write_csv)


def _pinned_pulse_section(pulse):
    return {"t_gate_ns": pulse.t_gate / 1e-9, "theta_peak": pulse.theta_max}


def test_resolve_pulse_pinned(default_dev, slepian_pulse):
    cfg = config.merge_config(
        "gate-sim", {"pulse": _pinned_pulse_section(slepian_pulse)})
    pulse, info = resolve_pulse(cfg, default_dev)
    assert info["source"] == "pinned"
    assert pulse.theta_max == pytest.approx(slepian_pulse.theta_max)
    assert info["fidelity"] > 0.999


def test_resolve_pulse_solves_amplitude(default_dev):
    cfg = config.merge_config("gate-sim", {"pulse": {"t_gate_ns": 176.9}})
    pulse, info = resolve_pulse(cfg, default_dev)
    assert info["source"] == "amplitude_solved"
    assert pulse.theta_max == pytest.approx(0.4621, abs=2e-3)
    assert abs(info["phase"] - math.pi) < 1e-4


def test_resolve_pulse_raises_when_phase_unreachable(default_dev):
    cfg = config.merge_config("gate-sim", {"pulse": {"t_gate_ns": 0.1}})
    with pytest.raises(CalibrationError):
        resolve_pulse(cfg, default_dev)


def test_calibrate_runner_single_family():
    cfg = config.merge_config("calibrate", {
        "families": ["square"],
        "pulse": {"t_range_ns": [183.6, 184.0], "t_step_ns": 0.2},
    })
    result = run_command(cfg)
    assert result.command == "calibrate"
    (table,) = result.tables
    assert table.header == ("family", "t_gate_ns", "theta_peak", "fidelity")
    assert len(table.rows) == 1
    family, t_ns, theta, fid = table.rows[0]
    assert family == "square"
    assert 183.6 <= t_ns <= 184.0
    assert fid > 0.99
    assert len(result.report["traces"]["square"]) == 3
    assert result.report["best"]["square"]["fidelity"] == pytest.approx(fid)


def test_fault_sweep_runner(default_dev, slepian_pulse):
    cfg = config.merge_config("fault-sweep", {
        "pulse": _pinned_pulse_section(slepian_pulse),
        "fault_grid": {"kinds": ["ratio"], "coefficients": [1],
                       "epsilons": [0.0, 0.1]},
    })
    result = run_command(cfg)
    (table,) = result.tables
    assert len(table.rows) == 2
    rows = {r[2]: r for r in table.rows}
    base_fid = rows[0.0][6]
    assert result.report["baseline_fidelity"] == pytest.approx(base_fid)
    assert base_fid > 0.999
    assert rows[0.1][6] < base_fid
    assert result.report["max_drop"]["ratio(l1)"] == \
        pytest.approx(base_fid - rows[0.1][6])
    # the quadrature estimate is a biased initializer: right scale, and it
    # grows when the dominant coefficient is overdriven
    assert rows[0.0][4] == pytest.approx(math.pi, rel=0.3)
    assert rows[0.1][4] > rows[0.0][4]
    assert abs(rows[0.0][5]) < 1e-9
    assert result.report["pulse"]["source"] == "pinned"


def test_decoherence_bench_flat_when_ideal():
    cfg = config.merge_config("decoherence-bench", {
        "decoherence": {"t1_us": None, "t2star_us": None},
    })
    result = run_command(cfg)
    (table,) = result.tables
    assert [r[0] for r in table.rows] == list(experiments.BENCH_DEPTHS)
    assert min(r[1] for r in table.rows) > 0.999
    fit = result.report["fit"]
    assert fit["a"] == 0.0
    assert math.isinf(fit["tau"])
    assert fit["c"] == pytest.approx(1.0, abs=1e-6)
    assert fit["r_squared"] == 1.0


def test_testgen_runner_reduced():
    cfg = config.merge_config("testgen", {
        "testgen": {"circuits": ["full_adder"], "experiments": ["all_cz"],
                    "all_cz_epsilons": [0.1, 0.2]},
        "chi_square": {"trials": 5, "cap": 200},
    })
    result = run_command(cfg)
    (table,) = result.tables
    # 16 patterns per epsilon
    assert len(table.rows) == 32
    key = lambda r: (r[0], r[1], r[3], r[5], r[2])
    assert table.rows == sorted(table.rows, key=key)
    assert {r[3] for r in table.rows} == {"ratio(l1)@ALL"}
    summary = result.report["summary"]["all_cz"]["full_adder"]
    assert set(summary["best_by_epsilon"]) == {"0.1", "0.2"}
    assert "spearman" not in summary  # needs at least three epsilon levels
    assert result.report["protocol"] == "sequential"
    best = summary["best_by_epsilon"]["0.1"]
    assert not best["undetectable"]
    assert best["repetitions"] >= 1


def test_enumerate_runner_counts():
    full = run_command(config.merge_config("enumerate", None))
    (table,) = full.tables
    assert len(table.rows) == 90
    assert full.report["pulse_fault_count"] == 75
    assert full.report["n_cz"] == 15
    assert [r[0] for r in table.rows] == list(range(90))
    assert all(r[5] == 0.1 for r in table.rows if r[2] != "missing_gate")

    rand = run_command(config.merge_config(
        "enumerate", {"circuit": {"name": "random"}}))
    assert len(rand.tables[0].rows) == 54
    assert rand.report["total_count"] == 54


def test_gate_sim_clean(default_dev, slepian_pulse):
    cfg = config.merge_config("gate-sim", {
        "pulse": _pinned_pulse_section(slepian_pulse)})
    result = run_command(cfg)
    report = result.report
    assert report["fault"] is None
    assert report["fidelity"] > 0.999
    assert abs(report["phase_error"]) < 1e-3
    assert set(report["leakage"]) == {"00", "01", "10", "11"}
    assert max(report["leakage"].values()) < 1e-3
    (table,) = result.tables
    assert table.header == ("t_ns", "theta", "omega1_ghz")
    assert len(table.rows) == 401
    assert table.rows[0][2] == pytest.approx(7.05, abs=1e-9)


def test_gate_sim_fault_branches(slepian_pulse):
    pinned = _pinned_pulse_section(slepian_pulse)
    ratio = run_command(config.merge_config("gate-sim", {
        "pulse": pinned, "fault": {"kind": "ratio", "epsilon": 0.2}}))
    assert ratio.report["fault"] == "ratio(l1)@ALL"
    assert ratio.report["fidelity"] < 0.999

    missing = run_command(config.merge_config("gate-sim", {
        "pulse": pinned, "fault": {"kind": "missing_gate"}}))
    assert missing.report["fault"] == "missing_gate@ALL"
    assert "leakage" not in missing.report

    leak = run_command(config.merge_config("gate-sim", {
        "pulse": pinned,
        "fault": {"kind": "leakage", "leakage_chi": [0.05, 0.05, 0.05]}}))
    assert leak.report["fault"] == "leakage@ALL"
    assert max(leak.report["leakage"].values()) > 1e-4

    with pytest.raises(ValueError):
        run_command(config.merge_config("gate-sim", {
            "pulse": pinned, "fault": {"kind": "decoherence"}}))


def test_gate_sim_decoherence_populations(slepian_pulse):
    cfg = config.merge_config("gate-sim", {
        "pulse": _pinned_pulse_section(slepian_pulse),
        "decoherence": {"t1_us": 30.0, "t2star_us": 10.0},
        "fault": {"kind": "decoherence"},
    })
    report = run_command(cfg).report
    pops = report["decoherent_population_fidelity"]
    assert set(pops) == {"00", "01", "10", "11"}
    assert pops["00"] == pytest.approx(1.0, abs=1e-6)
    for label in ("01", "10", "11"):
        assert 0.9 < pops[label] < 1.0


def test_csv_rfc4180_quoting(tmp_path):
    table = Table("demo", ("name", "note", "value"),
                  [("plain", "contains, comma", 0.1),
                   ('with "quote"', "plain", 7),
                   ("flag", "bool", True)])
    path = str(tmp_path / "demo.csv")
    write_csv(path, table)
    raw = open(path, "rb").read()
    assert raw.count(b"\r\n") == 4
    lines = raw.decode().split("\r\n")
    assert lines[0] == "name,note,value"
    assert lines[1] == 'plain,"contains, comma",0.1'
    assert lines[2] == '"with ""quote""",plain,7'
    assert lines[3] == "flag,bool,True"


def test_float_cells_round_trip(tmp_path):
    value = 0.1 + 0.2  # 0.30000000000000004: repr must survive the csv
    table = Table("floats", ("x",), [(value,)])
    path = str(tmp_path / "floats.csv")
    write_csv(path, table)
    text = open(path, "rb").read().decode().split("\r\n")[1]
    assert float(text) == value


def test_write_artifacts_layout(tmp_path):
    cfg = config.merge_config("enumerate", None)
    result = ExperimentResult("enumerate",
                              [Table("fault_universe", ("a", "b"), [(1, 2)])],
                              {"note": "x"})
    paths = write_artifacts(result, cfg, str(tmp_path), wall_time_s=1.25)
    names = sorted(os.path.basename(p) for p in paths)
    assert names == ["enumerate_report.json", "fault_universe.csv",
                     "fault_universe.csv.meta.json"]
    meta = json.load(open(os.path.join(tmp_path, "fault_universe.csv.meta.json")))
    assert meta["command"] == "enumerate"
    assert meta["config_hash"] == config.config_hash(cfg)
    assert meta["wall_time_s"] == 1.25
    assert meta["tool_version"]
    report = json.load(open(os.path.join(tmp_path, "enumerate_report.json")))
    assert report == {"note": "x"}
