"""Run configuration: validated models, per-command defaults, merging.

A run is described by one JSON document validated against the schema
published by :func:`config_schema` (also served at ``/v1/schema``).
Unknown keys are rejected at every level.  Frequencies are given in GHz
and times in ns or us; they are converted to angular rad/s and seconds
internally.

Each command has its own defaults (:func:`default_config`): the
benchmarking commands target a 7.05 GHz device where the calibrated gate
is nearly free of static ZZ phase, while ``testgen`` targets a 6.10 GHz
device whose always-on ZZ background carries most of the conditional
phase, so pulse faults perturb the output distribution weakly enough for
repetition counts to resolve them.  A config file overrides defaults
field by field; CLI flags override the top-level keys last.
"""

from __future__ import annotations

import hashlib
import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import testgen
from .device import DecoherenceParams, DeviceParams
from .pulses import FAMILIES

COMMANDS = ("calibrate", "fault-sweep", "decoherence-bench", "testgen",
            "enumerate", "gate-sim")

_US = 1e-6
_NS = 1e-9


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DeviceConfig(_Section):
    """Two-transmon device in ordinary (non-angular) GHz."""

    omega1_ghz: float = 7.05
    omega2_ghz: float = 5.10
    alpha_ghz: float = -0.75
    g_ghz: float = 0.018

    def build(self) -> DeviceParams:
        return DeviceParams.from_ghz(omega1_idle=self.omega1_ghz,
                                     omega2=self.omega2_ghz,
                                     alpha=self.alpha_ghz, g=self.g_ghz)


class DecoherenceConfig(_Section):
    """Lifetimes in microseconds; null disables a channel."""

    t1_us: float | None = None
    t2star_us: float | None = None

    def build(self) -> DecoherenceParams:
        if self.t1_us is None and self.t2star_us is None:
            return DecoherenceParams()
        if self.t2star_us is None:
            return DecoherenceParams(t1=self.t1_us * _US)
        if self.t1_us is None:
            return DecoherenceParams(t_phi=self.t2star_us * _US)
        return DecoherenceParams.from_t1_t2star(self.t1_us * _US,
                                                self.t2star_us * _US)


class PulseConfig(_Section):
    """Pulse family and, optionally, a pinned working point.

    With ``t_gate_ns`` null the command calibrates over ``t_range_ns``
    first; with ``t_gate_ns`` set but ``theta_peak`` null only the
    amplitude is solved at that gate time.  ``m`` is the Fourier order
    used when enumerating coefficient faults.
    """

    family: Literal[tuple(sorted(FAMILIES))] = "slepian"
    m: int = Field(default=2, ge=1, le=8)
    t_gate_ns: float | None = Field(default=None, gt=0)
    theta_peak: float | None = Field(default=None, gt=0)
    t_range_ns: tuple[float, float] = (175.0, 195.0)
    t_step_ns: float = Field(default=0.1, gt=0)

    @model_validator(mode="after")
    def _ordered_range(self):
        lo, hi = self.t_range_ns
        if not lo < hi:
            raise ValueError("t_range_ns must be increasing")
        return self


class CircuitConfig(_Section):
    """Benchmark circuit selection; ``seed`` draws the random circuits."""

    name: Literal["full_adder", "random"] = "full_adder"
    seed: int = 7
    width: int = Field(default=4, ge=2, le=6)
    n_cz: int = Field(default=9, ge=1)


class FaultGridConfig(_Section):
    """Pulse-parameter grid swept by ``fault-sweep``."""

    kinds: tuple[Literal["ratio", "bias", "truncation"], ...] = (
        "ratio", "bias", "truncation")
    coefficients: tuple[int, ...] = (1, 2)
    epsilons: tuple[float, ...] = (0.0, 0.05, 0.10, 0.15, 0.20)

    @model_validator(mode="after")
    def _in_range(self):
        if any(n < 1 for n in self.coefficients):
            raise ValueError("coefficient indices start at 1")
        if any(not 0.0 <= e <= 0.5 for e in self.epsilons):
            raise ValueError("epsilons must lie in [0, 0.5]")
        return self


class ChiSquareSettings(_Section):
    quantile: float = Field(default=0.99, gt=0, lt=1)
    trials: int = Field(default=50, ge=1)
    cap: int = Field(default=1000, ge=1)
    mode: Literal["sequential", "fixed_n"] = "sequential"
    power: float = Field(default=0.9, gt=0, lt=1)

    def build(self) -> testgen.ChiSquareConfig:
        return testgen.ChiSquareConfig(quantile=self.quantile,
                                       trials=self.trials, cap=self.cap,
                                       mode=self.mode, power=self.power)


class TestgenConfig(_Section):
    """Experiment plan for the repetition tables.

    All-CZ sweeps run on every listed circuit; the single-CZ sweep walks
    each CZ position of ``single_circuit`` with each (kind, coefficient)
    pair.
    """

    circuits: tuple[Literal["full_adder", "random"], ...] = (
        "full_adder", "random")
    experiments: tuple[Literal["all_cz", "single_cz"], ...] = (
        "all_cz", "single_cz")
    all_cz_epsilons: tuple[float, ...] = (0.05, 0.10, 0.15, 0.20)
    single_epsilons: tuple[float, ...] = (0.10, 0.20)
    single_circuit: Literal["full_adder", "random"] = "full_adder"
    single_faults: tuple[tuple[Literal["ratio", "bias", "truncation"], int], ...] = (
        ("ratio", 1), ("bias", 2), ("truncation", 0))


class FaultConfig(_Section):
    """Optional fault injected by ``gate-sim``; null kind runs clean."""

    kind: Literal["ratio", "bias", "truncation", "missing_gate",
                  "leakage", "decoherence"] | None = None
    coefficient: int = Field(default=1, ge=1)
    epsilon: float = Field(default=0.1, ge=0, le=0.5)
    leakage_chi: tuple[float, float, float] = (0.01, 0.01, 0.01)
    leakage_zeta: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    leakage_phi: tuple[float, float, float] = (0.0, 0.0, 0.0)


class RunConfig(_Section):
    """Everything one command run depends on."""

    command: Literal[COMMANDS] = "calibrate"
    device: DeviceConfig = DeviceConfig()
    decoherence: DecoherenceConfig = DecoherenceConfig()
    pulse: PulseConfig = PulseConfig()
    circuit: CircuitConfig = CircuitConfig()
    fault_grid: FaultGridConfig = FaultGridConfig()
    chi_square: ChiSquareSettings = ChiSquareSettings()
    testgen: TestgenConfig = TestgenConfig()
    fault: FaultConfig = FaultConfig()
    families: tuple[Literal[tuple(sorted(FAMILIES))], ...] = tuple(sorted(FAMILIES))
    cz_time_ns: float = Field(default=100.0, gt=0)
    out_dir: str = "runs"
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)


# Devices whose acceptance-band behavior the defaults pin down: the
# benchmark device idles the qubit at 7.05 GHz; the test-generation device
# idles at 6.10 GHz where the static ZZ background dominates the
# conditional phase.
_COMMAND_DEFAULTS: dict[str, dict] = {
    "calibrate": {},
    "fault-sweep": {"pulse": {"family": "slepian"}},
    "decoherence-bench": {
        "decoherence": {"t1_us": 100.0, "t2star_us": 20.0},
        "cz_time_ns": 180.0,
    },
    "testgen": {
        "device": {"omega1_ghz": 6.10},
        "pulse": {"family": "slepian", "t_gate_ns": 180.0},
    },
    "enumerate": {},
    "gate-sim": {"pulse": {"family": "slepian", "t_gate_ns": 180.0}},
}


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def default_config(command: str) -> RunConfig:
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}")
    data = _deep_merge({"command": command}, _COMMAND_DEFAULTS[command])
    return RunConfig.model_validate(data)


def merge_config(command: str, document: dict | None = None,
                 overrides: dict | None = None) -> RunConfig:
    """Defaults <- config document <- CLI overrides, then validate."""
    data = default_config(command).model_dump(mode="json")
    if document:
        if not isinstance(document, dict):
            raise ValueError("config document must be a JSON object")
        data = _deep_merge(data, document)
    if overrides:
        data = _deep_merge(data, {k: v for k, v in overrides.items()
                                  if v is not None})
    data["command"] = command
    return RunConfig.model_validate(data)


def load_config(command: str, path: str | None = None,
                overrides: dict | None = None) -> RunConfig:
    document = None
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            document = json.load(fh)
    return merge_config(command, document, overrides)


def config_schema() -> dict:
    return RunConfig.model_json_schema()


def config_hash(cfg: RunConfig) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
