"""Fault models for the CZ gate: parameter faults on the pulse coefficients,
missing-gate idling, leakage generators, and decoherence configuration.

Every injector is a pure function of its immutable inputs: the same
``FaultSpec`` always produces the same faulty pulse or gate matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import evolution, metrics, pulses
from .device import DecoherenceParams, DeviceParams, eigen_tracked, static_zz
from .errors import FaultKindError, ShapeError, UnsupportedShapeError
from .linalg import (COMPUTATIONAL_IDX, LOW_ENERGY_IDX, PAIR_DIM,
                     embed_subspace, expm, project_computational)

PARAMETER_KINDS = ("ratio", "bias", "truncation")
KINDS = PARAMETER_KINDS + ("missing_gate", "leakage", "decoherence")

# target_gate sentinel: the fault applies to every CZ of the circuit.
ALL_GATES = -1

MAX_EPSILON = 0.5
MAX_LEAKAGE = 0.1


@dataclass(frozen=True)
class LeakageParams:
    """Amplitudes of the low-energy leakage generator.

    ``chi`` couples |01>-|10>, |02>-|11> and |11>-|20>; ``zeta`` holds the
    diagonal shifts of |01>, |10>, |11>, |20>; ``phi`` are the coupling
    phases.  The diagonal ``zeta`` entries are unrelated to the device's
    static ZZ shift despite the shared letter.
    """

    chi: tuple[float, float, float]
    zeta: tuple[float, float, float, float]
    phi: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.chi) != 3 or len(self.zeta) != 4 or len(self.phi) != 3:
            raise ValueError("leakage parameters must have 3 chi, 4 zeta, 3 phi")
        if max(abs(c) for c in self.chi) > MAX_LEAKAGE:
            raise ValueError(f"|chi| must not exceed {MAX_LEAKAGE}")
        if max(abs(z) for z in self.zeta) > MAX_LEAKAGE:
            raise ValueError(f"|zeta| must not exceed {MAX_LEAKAGE}")


@dataclass(frozen=True)
class FaultSpec:
    """One injectable fault.

    ``target_gate`` indexes a CZ gate position in a decomposed circuit, or
    ``ALL_GATES``.  ``magnitude`` is the dimensionless epsilon for the
    parameter kinds; leakage and decoherence carry their own parameter
    records instead.
    """

    kind: str
    target_gate: int = ALL_GATES
    magnitude: float = 0.0
    coefficient_index: int = 0
    leakage: LeakageParams | None = None
    decoherence: DecoherenceParams | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.kind in PARAMETER_KINDS and not 0.0 <= self.magnitude <= MAX_EPSILON:
            raise ValueError(f"epsilon {self.magnitude} outside [0, {MAX_EPSILON}]")
        if self.kind in ("ratio", "bias") and self.coefficient_index < 1:
            raise ValueError("ratio/bias faults need a coefficient index n >= 1")
        if self.kind == "leakage" and self.leakage is None:
            raise ValueError("leakage faults need LeakageParams")
        if self.kind == "decoherence" and self.decoherence is None:
            raise ValueError("decoherence faults need DecoherenceParams")

    def describe(self) -> str:
        """Stable human-readable id used in CSV reports."""
        target = "ALL" if self.target_gate == ALL_GATES else str(self.target_gate)
        if self.kind in ("ratio", "bias"):
            return f"{self.kind}(l{self.coefficient_index})@{target}"
        return f"{self.kind}@{target}"


@dataclass(frozen=True)
class FaultUniverse:
    """Enumerated fault list of one circuit at a given fourier order."""

    n_cz: int
    m: int
    faults: tuple[FaultSpec, ...]

    @property
    def pulse_fault_count(self) -> int:
        return (2 * self.m + 1) * self.n_cz

    @property
    def total_count(self) -> int:
        return (2 * self.m + 2) * self.n_cz


def apply_parameter_fault(p: pulses.Pulse, f: FaultSpec) -> pulses.Pulse:
    """Faulty pulse for the ratio/bias/truncation kinds.

    Ratio scales one coefficient by (1 + eps); bias adds eps times the
    dominant coefficient; truncation ends the gate early at (1 - eps) of
    the schedule while the waveform keeps its original timing.
    """
    if f.kind not in PARAMETER_KINDS:
        raise FaultKindError(f"{f.kind!r} is not a pulse-parameter fault")
    if p.kind != "fourier":
        raise UnsupportedShapeError(
            f"parameter faults require a fourier-family pulse, got {p.family!r}")
    eps = f.magnitude
    if eps == 0.0:
        return p
    if f.kind == "truncation":
        return replace(p, cutoff=p.t_gate * (1.0 - eps))
    n = f.coefficient_index
    if not 1 <= n <= p.m:
        raise ValueError(f"coefficient index {n} outside 1..{p.m}")
    lam = list(p.lambdas)
    if f.kind == "ratio":
        lam[n - 1] = lam[n - 1] * (1.0 + eps)
    else:
        lam[n - 1] = lam[n - 1] + eps * p.lambdas[0]
    return pulses.pulse_with_lambdas(p, tuple(lam))


def missing_gate_unitary(zeta: float, t: float) -> np.ndarray:
    """Idling unitary during a skipped CZ slot: diag(1, 1, 1, e^{i zeta t})."""
    return np.diag([1.0, 1.0, 1.0, np.exp(1j * zeta * t)]).astype(complex)


def leakage_generator(chi: Sequence[float], zeta_l: Sequence[float],
                      phi: Sequence[float]) -> np.ndarray:
    """Hermitian noise generator on |00>,|01>,|02>,|10>,|11>,|20>."""
    params = LeakageParams(chi=tuple(chi), zeta=tuple(zeta_l), phi=tuple(phi))
    s = np.zeros((6, 6), dtype=complex)
    z1, z2, z3, z4 = params.zeta
    s[1, 1], s[3, 3], s[4, 4], s[5, 5] = z1, z2, z3, z4
    couplings = ((1, 3, 0), (2, 4, 1), (4, 5, 2))
    for row, col, k in couplings:
        val = 1j * params.chi[k] * np.exp(1j * params.phi[k])
        s[row, col] = val
        s[col, row] = np.conj(val)
    return s


def noisy_gate_from_leakage(u: np.ndarray, s: np.ndarray) -> np.ndarray:
    """U' = U e^{iS'}; a 6x6 generator is embedded when U is two-qutrit."""
    umat = np.asarray(u, dtype=complex)
    smat = np.asarray(s, dtype=complex)
    if umat.shape == smat.shape:
        return umat @ expm(smat, 1j)
    if umat.shape == (PAIR_DIM, PAIR_DIM) and smat.shape == (6, 6):
        s9 = embed_subspace(smat, LOW_ENERGY_IDX, PAIR_DIM, fill="zero")
        return umat @ expm(s9, 1j)
    raise ShapeError(f"incompatible shapes {umat.shape} and {smat.shape}")


def enumerate_faults(circuit, m: int, epsilon: float = 0.1) -> FaultUniverse:
    """Per CZ gate: ratio and bias on each coefficient, truncation, missing gate."""
    if m < 1:
        raise ValueError("fourier order m must be at least 1")
    positions = tuple(circuit.cz_indices)
    faults: list[FaultSpec] = []
    for pos in positions:
        for kind in ("ratio", "bias"):
            for n in range(1, m + 1):
                faults.append(FaultSpec(kind=kind, target_gate=pos,
                                        magnitude=epsilon, coefficient_index=n))
        faults.append(FaultSpec(kind="truncation", target_gate=pos,
                                magnitude=epsilon))
        faults.append(FaultSpec(kind="missing_gate", target_gate=pos))
    return FaultUniverse(n_cz=len(positions), m=m, faults=tuple(faults))


def _parameter_propagator(p: pulses.Pulse, dev: DeviceParams, f: FaultSpec,
                          n_steps: int) -> np.ndarray:
    """Two-qutrit propagator of the perturbed pulse."""
    faulty = apply_parameter_fault(p, f)
    return evolution.propagate_unitary(pulses.cz_hamiltonian(faulty, dev, n_steps))


def faulty_cz_unitary(p: pulses.Pulse, dev: DeviceParams, f: FaultSpec,
                      n_steps: int = pulses.FINAL_STEPS) -> np.ndarray:
    """Virtual-Z-corrected 4x4 unitary of the faulty CZ slot.

    Parameter faults re-propagate the perturbed pulse; the single-qubit
    phases are re-derived from the faulty unitary itself, mirroring the
    local-phase recalibration done before benchmarking a gate.  The missing
    gate is the idling unitary of the static ZZ shift over the full slot.
    """
    if f.kind == "missing_gate":
        return missing_gate_unitary(static_zz(dev), p.t_gate)
    if f.kind in PARAMETER_KINDS:
        u4 = project_computational(_parameter_propagator(p, dev, f, n_steps))
        return metrics.apply_virtual_z(u4, *metrics.virtual_z_phases(u4))
    raise FaultKindError(f"{f.kind!r} has no coherent 4x4 gate form")


def faulty_cz_channel(p: pulses.Pulse, dev: DeviceParams, f: FaultSpec,
                      n_steps: int = pulses.FINAL_STEPS) -> np.ndarray:
    """Faulty CZ as a circuit layer sees it: dressed-frame, virtual-Z-corrected.

    States prepared and measured on hardware are the idle dressed
    eigenstates, so the gate-level channel projects the propagator onto
    them.  The bare projection of :func:`faulty_cz_unitary` instead keeps a
    fault-independent exchange term of order g over the qubit detuning,
    which would masquerade as a detectable error on every ideal gate.
    """
    if f.kind == "missing_gate":
        return missing_gate_unitary(static_zz(dev), p.t_gate)
    if f.kind not in PARAMETER_KINDS:
        raise FaultKindError(f"{f.kind!r} has no coherent 4x4 gate form")
    u9 = _parameter_propagator(p, dev, f, n_steps)
    v4 = eigen_tracked(dev).vectors[:, COMPUTATIONAL_IDX]
    u4 = v4.conj().T @ u9 @ v4
    return metrics.apply_virtual_z(u4, *metrics.virtual_z_phases(u4))
