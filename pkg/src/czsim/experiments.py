"""Experiment runners behind the service endpoints and CLI commands.

Each runner maps a validated :class:`~czsim.config.RunConfig` to tables
(emitted as RFC-4180 CSV by the client) and a JSON report.  Rows are
sorted on their natural keys and floats are written with ``repr``, so a
re-run with the same config and seed reproduces every file byte for
byte.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit
from scipy.stats import spearmanr

from . import __version__, circuits, config, faults, metrics, pulses, testgen
from .device import DeviceParams, collapse_operators
from .errors import CalibrationError
from .evolution import lindblad_evolve
from .linalg import COMPUTATIONAL_IDX, DensityMatrix, project_computational

_NS = 1e-9

# Depth grid of the decoherence benchmark.
BENCH_DEPTHS = tuple(range(1, 102, 4))


@dataclass
class Table:
    name: str
    header: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)


@dataclass
class ExperimentResult:
    command: str
    tables: list[Table]
    report: dict


def _build_circuit(cfg: config.RunConfig, name: str) -> circuits.Circuit:
    if name == "full_adder":
        base = circuits.build_full_adder()
    else:
        base = circuits.build_random_circuit(cfg.circuit.seed,
                                             width=cfg.circuit.width,
                                             n_cz=cfg.circuit.n_cz)
    return circuits.decompose_to_cz(base)


def resolve_pulse(cfg: config.RunConfig, dev: DeviceParams) -> tuple[pulses.Pulse, dict]:
    """Pulse at the configured working point, calibrating what is unset.

    Returns the pulse and a provenance record for the report: how the
    gate time and amplitude were obtained and the resulting fidelity.
    """
    pc = cfg.pulse
    if pc.t_gate_ns is None:
        res = pulses.calibrate(pc.family, dev,
                               (pc.t_range_ns[0] * _NS, pc.t_range_ns[1] * _NS),
                               pc.t_step_ns * _NS, workers=cfg.workers)
        info = {"source": "calibrated", "fidelity": res.fidelity,
                "phase": res.phase}
        return res.pulse, info
    t_gate = pc.t_gate_ns * _NS
    if pc.theta_peak is None:
        solved = pulses._solve_theta(pc.family, dev, t_gate, pulses.FINAL_STEPS)
        if solved is None:
            raise CalibrationError(
                f"no amplitude reaches conditional phase pi for {pc.family} "
                f"at {pc.t_gate_ns} ns")
        theta, ev = solved
        pulse = pulses.build_pulse(pc.family, dev, t_gate, theta)
        info = {"source": "amplitude_solved", "fidelity": ev.fidelity,
                "phase": ev.phase}
        return pulse, info
    pulse = pulses.build_pulse(pc.family, dev, t_gate, pc.theta_peak)
    ev = pulses.evaluate_pulse(pulse, dev)
    info = {"source": "pinned", "fidelity": ev.fidelity, "phase": ev.phase}
    return pulse, info


def _pulse_record(pulse: pulses.Pulse, info: dict) -> dict:
    return {"family": pulse.family, "t_gate_ns": pulse.t_gate / _NS,
            "theta_peak": pulse.theta_max, **info}


def run_calibrate(cfg: config.RunConfig) -> ExperimentResult:
    dev = cfg.device.build()
    t_range = (cfg.pulse.t_range_ns[0] * _NS, cfg.pulse.t_range_ns[1] * _NS)
    table = Table("calibration", ("family", "t_gate_ns", "theta_peak", "fidelity"))
    traces: dict[str, list] = {}
    for family in sorted(set(cfg.families)):
        res = pulses.calibrate(family, dev, t_range, cfg.pulse.t_step_ns * _NS,
                               workers=cfg.workers)
        table.rows.append((family, res.pulse.t_gate / _NS, res.theta_peak,
                           res.fidelity))
        traces[family] = [[t / _NS, f] for t, f in res.trace]
    report = {"traces": traces,
              "best": {row[0]: {"t_gate_ns": row[1], "fidelity": row[3]}
                       for row in table.rows}}
    return ExperimentResult("calibrate", [table], report)


def run_fault_sweep(cfg: config.RunConfig) -> ExperimentResult:
    dev = cfg.device.build()
    pulse, info = resolve_pulse(cfg, dev)
    grid = cfg.fault_grid
    specs = []
    for kind in sorted(set(grid.kinds)):
        coeffs = sorted(set(grid.coefficients)) if kind in ("ratio", "bias") else [0]
        for n in coeffs:
            for eps in sorted(set(grid.epsilons)):
                specs.append((kind, n, eps))
    table = Table("fault_sweep", ("kind", "coefficient", "epsilon",
                                  "phase_sim", "phase_est", "phase_error",
                                  "fidelity"))
    by_key: dict[tuple, dict] = {}
    for kind, n, eps in specs:
        f = faults.FaultSpec(kind=kind, magnitude=eps,
                             coefficient_index=max(n, 1))
        u4 = faults.faulty_cz_unitary(pulse, dev, f)
        phase = metrics.conditional_phase(u4)
        est = pulses.conditional_phase_estimate(
            faults.apply_parameter_fault(pulse, f), dev)
        err = pulses._wrap(phase - math.pi)
        fid = metrics.gate_fidelity(metrics.CZ, u4)
        table.rows.append((kind, n, eps, phase, est, err, fid))
        by_key[(kind, n, eps)] = {"phase_error": err, "fidelity": fid}

    report: dict = {"pulse": _pulse_record(pulse, info)}
    base = next((v for (_, _, e), v in sorted(by_key.items()) if e == 0.0), None)
    if base is not None:
        eps_max = max(grid.epsilons)
        report["baseline_fidelity"] = base["fidelity"]
        report["max_drop"] = {}
        for kind, n in sorted({(k, n) for k, n, _ in specs}):
            deep = by_key.get((kind, n, eps_max))
            if deep is None:
                continue
            label = f"{kind}(l{n})" if kind in ("ratio", "bias") else kind
            report["max_drop"][label] = base["fidelity"] - deep["fidelity"]
    r1 = by_key.get(("ratio", 1, 0.1))
    r2 = by_key.get(("ratio", 2, 0.1))
    if r1 and r2 and r1["phase_error"] != 0.0:
        report["ratio_l2_over_l1_phase"] = abs(r2["phase_error"] / r1["phase_error"])
    return ExperimentResult("fault-sweep", [table], report)


def _exp_decay(d, a, tau, c):
    return a * np.exp(-d / tau) + c


def run_decoherence_bench(cfg: config.RunConfig) -> ExperimentResult:
    dec = cfg.decoherence.build()
    cz_time = cfg.cz_time_ns * _NS
    depths = np.array(BENCH_DEPTHS, dtype=float)
    fids = []
    for depth in BENCH_DEPTHS:
        circ = circuits.decompose_to_cz(
            circuits.build_decoherence_benchmark(cfg.circuit.seed, depth))
        psi = circuits.circuit_unitary(circ)[:, 0]
        rho = circuits.simulate_density(circ, 0, decoherence=dec,
                                        cz_time=cz_time)
        fids.append(float(np.real(psi.conj() @ rho @ psi)))
    fids = np.array(fids)

    if fids.max() - fids.min() < 1e-9:
        fit = {"a": 0.0, "tau": math.inf, "c": float(fids.mean()),
               "r_squared": 1.0}
        fitted = np.full_like(fids, fids.mean())
    else:
        p0 = (fids[0] - fids[-1], max(depths[-1] / 3.0, 1.0), fids[-1])
        params, _ = curve_fit(_exp_decay, depths, fids, p0=p0, maxfev=20000)
        fitted = _exp_decay(depths, *params)
        ss_res = float(((fids - fitted) ** 2).sum())
        ss_tot = float(((fids - fids.mean()) ** 2).sum())
        fit = {"a": float(params[0]), "tau": float(params[1]),
               "c": float(params[2]), "r_squared": 1.0 - ss_res / ss_tot}

    table = Table("decoherence_bench", ("depth", "fidelity", "fit_fidelity"))
    for d, f, g in zip(BENCH_DEPTHS, fids, fitted):
        table.rows.append((int(d), float(f), float(g)))
    report = {"fit": fit, "t1_us": cfg.decoherence.t1_us,
              "t2star_us": cfg.decoherence.t2star_us,
              "cz_time_ns": cfg.cz_time_ns, "circuit_seed": cfg.circuit.seed}
    return ExperimentResult("decoherence-bench", [table], report)


def _pattern_str(pattern: int, width: int) -> str:
    return format(pattern, f"0{width}b")


def _outcome_rows(circuit_name: str, experiment: str, circ: circuits.Circuit,
                  outcomes: list[testgen.TestOutcome]) -> list[tuple]:
    rows = []
    for o in outcomes:
        rows.append((circuit_name, experiment, _pattern_str(o.pattern, circ.width),
                     o.fault.describe(), o.fault.kind, o.fault.magnitude,
                     o.repetitions_label(), o.detection_rate))
    return rows


def _best_entry(circ: circuits.Circuit,
                outcomes: list[testgen.TestOutcome]) -> dict:
    best = testgen.best_outcome(outcomes)
    return {"pattern": _pattern_str(best.pattern, circ.width),
            "repetitions": best.repetitions,
            "detection_rate": best.detection_rate,
            "undetectable": best.undetectable}


def run_testgen(cfg: config.RunConfig) -> ExperimentResult:
    dev = cfg.device.build()
    pulse, info = resolve_pulse(cfg, dev)
    cache = circuits.CzChannelCache(pulse, dev)
    cs = cfg.chi_square.build()
    tg = cfg.testgen
    built = {name: _build_circuit(cfg, name)
             for name in set(tg.circuits) | {tg.single_circuit}}

    table = Table("testgen", ("circuit", "experiment", "pattern", "fault_id",
                              "kind", "magnitude", "repetitions",
                              "detection_rate"))
    summary: dict = {"all_cz": {}, "single_cz": {}}
    ordinal = 0

    if "all_cz" in tg.experiments:
        for name in tg.circuits:
            circ = built[name]
            per_eps = {}
            reps = []
            for eps in tg.all_cz_epsilons:
                fault = faults.FaultSpec(kind="ratio", magnitude=eps,
                                         coefficient_index=1)
                outcomes = testgen.sweep_patterns(circ, fault, cache, cs,
                                                  seed=cfg.seed,
                                                  workers=cfg.workers,
                                                  fault_ordinal=ordinal)
                ordinal += 1
                table.rows.extend(_outcome_rows(name, "all_cz", circ, outcomes))
                entry = _best_entry(circ, outcomes)
                per_eps[repr(eps)] = entry
                reps.append(entry["repetitions"])
            entry = {"best_by_epsilon": per_eps,
                     "distinct_best_patterns": sorted(
                         {v["pattern"] for v in per_eps.values()})}
            if len(reps) >= 3 and all(r is not None for r in reps):
                rho = spearmanr(list(tg.all_cz_epsilons), reps).statistic
                entry["spearman"] = float(rho)
            summary["all_cz"][name] = entry

    if "single_cz" in tg.experiments:
        circ = built[tg.single_circuit]
        for kind, coeff in tg.single_faults:
            for eps in tg.single_epsilons:
                for pos in circ.cz_indices:
                    fault = faults.FaultSpec(kind=kind, target_gate=pos,
                                             magnitude=eps,
                                             coefficient_index=max(coeff, 1))
                    outcomes = testgen.sweep_patterns(circ, fault, cache, cs,
                                                      seed=cfg.seed,
                                                      workers=cfg.workers,
                                                      fault_ordinal=ordinal)
                    ordinal += 1
                    table.rows.extend(_outcome_rows(tg.single_circuit,
                                                    "single_cz", circ, outcomes))
                    summary["single_cz"][f"{fault.describe()}:{eps!r}"] = \
                        _best_entry(circ, outcomes)

    table.rows.sort(key=lambda r: (r[0], r[1], r[3], r[5], r[2]))
    detectable = [k for k, v in summary["single_cz"].items()
                  if not v["undetectable"]]
    undetectable = [k for k, v in summary["single_cz"].items()
                    if v["undetectable"]]
    report = {"pulse": _pulse_record(pulse, info), "summary": summary,
              "single_cz_detectable": sorted(detectable),
              "single_cz_undetectable": sorted(undetectable),
              "protocol": cs.mode}
    return ExperimentResult("testgen", [table], report)


def run_enumerate(cfg: config.RunConfig) -> ExperimentResult:
    circ = _build_circuit(cfg, cfg.circuit.name)
    universe = faults.enumerate_faults(circ, cfg.pulse.m,
                                       epsilon=cfg.fault.epsilon)
    table = Table("fault_universe", ("ordinal", "fault_id", "kind",
                                     "target_gate", "coefficient", "magnitude"))
    for k, f in enumerate(universe.faults):
        table.rows.append((k, f.describe(), f.kind, f.target_gate,
                           f.coefficient_index, f.magnitude))
    report = {"circuit": cfg.circuit.name, "n_cz": universe.n_cz,
              "m": universe.m,
              "pulse_fault_count": universe.pulse_fault_count,
              "total_count": universe.total_count}
    return ExperimentResult("enumerate", [table], report)


def _leakage_populations(u9: np.ndarray) -> dict[str, float]:
    labels = ("00", "01", "10", "11")
    comp = list(COMPUTATIONAL_IDX)
    out = {}
    for label, col in zip(labels, comp):
        kept = float(np.sum(np.abs(u9[comp, col]) ** 2))
        out[label] = max(0.0, 1.0 - kept)
    return out


def _decoherent_fidelities(pulse: pulses.Pulse, dev: DeviceParams,
                           dec) -> dict[str, float]:
    # Basis inputs map to basis outputs under CZ, so the rotating-frame
    # phases drop out of the population fidelity.
    h = pulses.cz_hamiltonian(pulse, dev, pulses.FINAL_STEPS, frame="rotating")
    c_ops = collapse_operators(dec, sites=2)
    labels = ("00", "01", "10", "11")
    out = {}
    for label, idx in zip(labels, COMPUTATIONAL_IDX):
        rho0 = np.zeros((9, 9), dtype=complex)
        rho0[idx, idx] = 1.0
        result = lindblad_evolve(h, DensityMatrix(rho0), c_ops,
                                 [0.0, pulse.duration])
        out[label] = float(result.states[-1].entries[idx, idx].real)
    return out


def run_gate_sim(cfg: config.RunConfig) -> ExperimentResult:
    dev = cfg.device.build()
    pulse, info = resolve_pulse(cfg, dev)
    fc = cfg.fault
    report: dict = {"pulse": _pulse_record(pulse, info)}

    shown = pulse
    if fc.kind is None:
        ev = pulses.evaluate_pulse(pulse, dev)
        u4, u9 = ev.u4, ev.u9
        u4 = metrics.apply_virtual_z(u4, *metrics.virtual_z_phases(u4))
        report["fault"] = None
    elif fc.kind in faults.PARAMETER_KINDS:
        spec = faults.FaultSpec(kind=fc.kind, magnitude=fc.epsilon,
                                coefficient_index=fc.coefficient)
        shown = faults.apply_parameter_fault(pulse, spec)
        ev = pulses.evaluate_pulse(shown, dev)
        u9 = ev.u9
        u4 = faults.faulty_cz_unitary(pulse, dev, spec)
        report["fault"] = spec.describe()
    elif fc.kind == "missing_gate":
        spec = faults.FaultSpec(kind="missing_gate")
        u4 = faults.faulty_cz_unitary(pulse, dev, spec)
        u9 = None
        report["fault"] = spec.describe()
    elif fc.kind == "leakage":
        s6 = faults.leakage_generator(fc.leakage_chi, fc.leakage_zeta,
                                      fc.leakage_phi)
        ev = pulses.evaluate_pulse(pulse, dev)
        u9 = faults.noisy_gate_from_leakage(ev.u9, s6)
        u4 = project_computational(u9)
        u4 = metrics.apply_virtual_z(u4, *metrics.virtual_z_phases(u4))
        report["fault"] = "leakage@ALL"
    else:
        dec = cfg.decoherence.build()
        if dec.is_ideal():
            raise ValueError("decoherence fault needs finite t1_us/t2star_us")
        ev = pulses.evaluate_pulse(pulse, dev)
        u4, u9 = ev.u4, ev.u9
        u4 = metrics.apply_virtual_z(u4, *metrics.virtual_z_phases(u4))
        report["fault"] = "decoherence@ALL"
        report["decoherent_population_fidelity"] = _decoherent_fidelities(
            pulse, dev, dec)

    report["fidelity"] = metrics.gate_fidelity(metrics.CZ, u4)
    report["conditional_phase"] = metrics.conditional_phase(u4)
    report["phase_error"] = pulses._wrap(report["conditional_phase"] - math.pi)
    if u9 is not None:
        report["leakage"] = _leakage_populations(u9)

    ts = np.linspace(0.0, shown.t_gate, 401)
    thetas = pulses.theta_of(ts, shown, dev)
    omegas = pulses.detuning_from_theta(thetas, dev)
    table = Table("waveform", ("t_ns", "theta", "omega1_ghz"))
    for t, th, om in zip(ts, thetas, omegas):
        table.rows.append((float(t / _NS), float(th),
                           float(om / (2.0 * math.pi * 1e9))))
    return ExperimentResult("gate-sim", [table], report)


RUNNERS = {
    "calibrate": run_calibrate,
    "fault-sweep": run_fault_sweep,
    "decoherence-bench": run_decoherence_bench,
    "testgen": run_testgen,
    "enumerate": run_enumerate,
    "gate-sim": run_gate_sim,
}


def run_command(cfg: config.RunConfig) -> ExperimentResult:
    return RUNNERS[cfg.command](cfg)


def _format_cell(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_csv(path: str, table: Table) -> None:
    """RFC-4180 output: CRLF line endings, minimal quoting, header row."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(table.header)
        for row in table.rows:
            writer.writerow([_format_cell(v) for v in row])


def write_artifacts(result: ExperimentResult, cfg: config.RunConfig,
                    out_dir: str, wall_time_s: float) -> list[str]:
    """CSV per table with a metadata sidecar, plus the command report."""
    os.makedirs(out_dir, exist_ok=True)
    meta = {"command": result.command, "config_hash": config.config_hash(cfg),
            "tool_version": __version__, "wall_time_s": wall_time_s}
    written = []
    for table in result.tables:
        csv_path = os.path.join(out_dir, f"{table.name}.csv")
        write_csv(csv_path, table)
        written.append(csv_path)
        side_path = csv_path + ".meta.json"
        with open(side_path, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        written.append(side_path)
    report_path = os.path.join(out_dir,
                               f"{result.command.replace('-', '_')}_report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(result.report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(report_path)
    return written
