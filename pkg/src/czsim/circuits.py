"""Gate-level circuits: benchmark builders, CZ decomposition, and
density-matrix simulation with per-gate channel substitution.

Basis convention: qubit 0 is the most significant bit of a computational
basis index, matching the Kronecker order of ``kron_compose``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import faults, metrics
from .device import DecoherenceParams, DeviceParams
from .errors import ShapeError
from .linalg import ket, nearest_unitary
from .pulses import Pulse

SINGLE_QUBIT_TIME = 20e-9

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_CZ4 = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
_CNOT = np.array([[1, 0, 0, 0],
                  [0, 1, 0, 0],
                  [0, 0, 0, 1],
                  [0, 0, 1, 0]], dtype=complex)
_TOFFOLI = np.eye(8, dtype=complex)
_TOFFOLI[6:, 6:] = _X

# name -> (qubit count, needs angle)
_GATE_ARITY = {"H": (1, False), "X": (1, False),
               "RX": (1, True), "RY": (1, True), "RZ": (1, True),
               "CZ": (2, False), "CNOT": (2, False), "TOFFOLI": (3, False)}


@dataclass(frozen=True)
class Gate:
    """One gate application; ``qubits`` are ordered (controls first)."""

    name: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.name not in _GATE_ARITY:
            raise ValueError(f"unknown gate {self.name!r}")
        arity, needs_angle = _GATE_ARITY[self.name]
        if len(self.qubits) != arity:
            raise ValueError(f"{self.name} acts on {arity} qubits, got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"qubit indices must be distinct: {self.qubits}")
        if needs_angle and self.angle is None:
            raise ValueError(f"{self.name} needs an angle")

    def matrix(self) -> np.ndarray:
        if self.name == "H":
            return _H
        if self.name == "X":
            return _X
        if self.name == "CZ":
            return _CZ4
        if self.name == "CNOT":
            return _CNOT
        if self.name == "TOFFOLI":
            return _TOFFOLI
        half = self.angle / 2.0
        if self.name == "RZ":
            return np.diag([np.exp(-1j * half), np.exp(1j * half)])
        c, s = math.cos(half), math.sin(half)
        if self.name == "RX":
            return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
        return np.array([[c, -s], [s, c]], dtype=complex)

    def duration(self, cz_time: float) -> float:
        return cz_time if self.name == "CZ" else SINGLE_QUBIT_TIME


@dataclass(frozen=True)
class Circuit:
    width: int
    gates: tuple[Gate, ...]

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("circuit width must be positive")
        for g in self.gates:
            if max(g.qubits, default=-1) >= self.width:
                raise ValueError(f"gate {g} exceeds width {self.width}")

    @property
    def cz_indices(self) -> tuple[int, ...]:
        return tuple(i for i, g in enumerate(self.gates) if g.name == "CZ")

    @property
    def dim(self) -> int:
        return 2 ** self.width


def embed_gate(u: np.ndarray, qubits: tuple[int, ...], width: int) -> np.ndarray:
    """Full-register matrix of a k-qubit gate on the given (ordered) qubits."""
    k = len(qubits)
    if u.shape != (2 ** k, 2 ** k):
        raise ShapeError(f"gate matrix {u.shape} does not act on {k} qubits")
    rest = [q for q in range(width) if q not in qubits]
    full = np.kron(u, np.eye(2 ** len(rest), dtype=complex))
    order = list(qubits) + rest
    tensor = full.reshape((2,) * (2 * width))
    inverse = np.argsort(order)
    axes = list(inverse) + [width + a for a in inverse]
    return tensor.transpose(axes).reshape(2 ** width, 2 ** width)


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Ideal full-register unitary (oracle path; width <= 6)."""
    u = np.eye(c.dim, dtype=complex)
    for g in c.gates:
        u = embed_gate(g.matrix(), g.qubits, c.width) @ u
    return u


def build_full_adder() -> Circuit:
    """Four-qubit full adder on wires (a, b, c_in, c_out).

    For a classical input |a, b, c_in, 0> the sum bit ends on the c_in wire
    and the carry on c_out; a and b are restored.
    """
    gates = (Gate("TOFFOLI", (0, 1, 3)),
             Gate("CNOT", (0, 1)),
             Gate("TOFFOLI", (1, 2, 3)),
             Gate("CNOT", (1, 2)),
             Gate("CNOT", (0, 1)))
    return Circuit(width=4, gates=gates)


def full_adder_truth_output(a: int, b: int, c_in: int) -> int:
    """Expected basis index for the classical input |a, b, c_in, 0>."""
    total = a + b + c_in
    s, carry = total % 2, total // 2
    return (a << 3) | (b << 2) | (s << 1) | carry


_ROTATIONS = ("RX", "RY", "RZ")


def build_random_circuit(seed: int, width: int = 4, n_cz: int = 9) -> Circuit:
    """Alternating random single-qubit layers and CZs on a random adjacent pair."""
    rng = np.random.default_rng(seed)
    gates: list[Gate] = []
    for _ in range(n_cz):
        for q in range(width):
            name = _ROTATIONS[rng.integers(0, 3)]
            gates.append(Gate(name, (q,), angle=math.pi / 4.0))
        start = int(rng.integers(0, width - 1))
        gates.append(Gate("CZ", (start, start + 1)))
    return Circuit(width=width, gates=tuple(gates))


def build_decoherence_benchmark(seed: int, depth: int) -> Circuit:
    """Two-qubit chain: per layer, one random rotation per qubit and a CNOT
    with a random control."""
    rng = np.random.default_rng(seed)
    gates: list[Gate] = []
    for _ in range(depth):
        for q in range(2):
            name = _ROTATIONS[rng.integers(0, 3)]
            gates.append(Gate(name, (q,), angle=math.pi / 4.0))
        ctrl = int(rng.integers(0, 2))
        gates.append(Gate("CNOT", (ctrl, 1 - ctrl)))
    return Circuit(width=2, gates=tuple(gates))


def _cnot_as_cz(ctrl: int, tgt: int) -> list[Gate]:
    return [Gate("H", (tgt,)), Gate("CZ", (ctrl, tgt)), Gate("H", (tgt,))]


_QUARTER = math.pi / 4.0


def _toffoli_gates(a: int, b: int, c: int) -> list[Gate]:
    # Six-CNOT construction; RZ(+-pi/4) stands in for T/T^dag up to a
    # global phase.
    return [Gate("H", (c,)),
            Gate("CNOT", (b, c)), Gate("RZ", (c,), angle=-_QUARTER),
            Gate("CNOT", (a, c)), Gate("RZ", (c,), angle=_QUARTER),
            Gate("CNOT", (b, c)), Gate("RZ", (c,), angle=-_QUARTER),
            Gate("CNOT", (a, c)), Gate("RZ", (b,), angle=_QUARTER),
            Gate("RZ", (c,), angle=_QUARTER), Gate("H", (c,)),
            Gate("CNOT", (a, b)), Gate("RZ", (a,), angle=_QUARTER),
            Gate("RZ", (b,), angle=-_QUARTER), Gate("CNOT", (a, b))]


def decompose_to_cz(c: Circuit) -> Circuit:
    """Rewrite CNOT and Toffoli so only single-qubit gates and CZ remain."""
    out: list[Gate] = []
    for g in c.gates:
        if g.name == "CNOT":
            out.extend(_cnot_as_cz(*g.qubits))
        elif g.name == "TOFFOLI":
            for sub in _toffoli_gates(*g.qubits):
                if sub.name == "CNOT":
                    out.extend(_cnot_as_cz(*sub.qubits))
                else:
                    out.append(sub)
        else:
            out.append(g)
    return Circuit(width=c.width, gates=tuple(out))


def simulate_statevector(c: Circuit, input_index: int) -> np.ndarray:
    """Pure-state probabilities of the ideal circuit (oracle path)."""
    psi = ket(input_index, c.dim)
    for g in c.gates:
        psi = embed_gate(g.matrix(), g.qubits, c.width) @ psi
    return np.abs(psi) ** 2


def _damping_kraus(duration: float, dec: DecoherenceParams):
    """Single-qubit relaxation + pure-dephasing Kraus pairs for one slot."""
    ops = []
    if not math.isinf(dec.t1):
        gamma = 1.0 - math.exp(-duration / dec.t1)
        ops.append((np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - gamma)]],
                             dtype=complex),
                    np.array([[0.0, math.sqrt(gamma)], [0.0, 0.0]],
                             dtype=complex)))
    if not math.isinf(dec.t_phi):
        q = 0.5 * (1.0 - math.exp(-duration / dec.t_phi))
        ops.append((math.sqrt(1.0 - q) * np.eye(2, dtype=complex),
                    math.sqrt(q) * np.diag([1.0, -1.0]).astype(complex)))
    return ops


def _apply_channel(rho: np.ndarray, kraus_full) -> np.ndarray:
    out = np.zeros_like(rho)
    for k in kraus_full:
        out += k @ rho @ k.conj().T
    return out


def simulate_density(c: Circuit, input_index: int,
                     channels: dict[int, np.ndarray] | None = None,
                     decoherence: DecoherenceParams | None = None,
                     cz_time: float = 100e-9) -> np.ndarray:
    """Final density matrix of the gate-level simulation.

    ``channels`` substitutes gate positions with alternate unitaries (the
    faulty-CZ path); remaining gates use their ideal matrices.  With finite
    ``decoherence`` every qubit relaxes and dephases for each gate's slot
    duration, idle qubits included.
    """
    if not 0 <= input_index < c.dim:
        raise ValueError(f"input index {input_index} outside width-{c.width} register")
    channels = channels or {}
    rho = np.zeros((c.dim, c.dim), dtype=complex)
    rho[input_index, input_index] = 1.0
    noisy = decoherence is not None and not decoherence.is_ideal()
    for pos, g in enumerate(c.gates):
        u = channels.get(pos)
        if u is None:
            u = g.matrix()
        if u.shape[0] != 2 ** len(g.qubits):
            raise ShapeError(f"channel at {pos} has shape {u.shape} for {g.name}")
        u_full = embed_gate(u, g.qubits, c.width)
        rho = u_full @ rho @ u_full.conj().T
        if noisy:
            for pair in _damping_kraus(g.duration(cz_time), decoherence):
                for q in range(c.width):
                    kraus_full = [embed_gate(k, (q,), c.width) for k in pair]
                    rho = _apply_channel(rho, kraus_full)
    return rho


def simulate_distribution(c: Circuit, input_index: int,
                          channels: dict[int, np.ndarray] | None = None,
                          decoherence: DecoherenceParams | None = None,
                          cz_time: float = 100e-9) -> np.ndarray:
    """Output probabilities of the density-matrix simulation."""
    rho = simulate_density(c, input_index, channels, decoherence, cz_time)
    probs = np.real(np.diag(rho)).copy()
    total = probs.sum()
    if abs(total - 1.0) > 1e-8:
        raise RuntimeError(f"probabilities sum to {total}, channel not trace preserving")
    np.clip(probs, 0.0, None, out=probs)
    return probs / probs.sum()


class CzChannelCache:
    """Faulty-CZ 4x4 unitaries computed once per fault shape.

    The pulse-level propagation depends on the fault kind, magnitude and
    coefficient, not on which circuit position it targets, so the cache key
    normalizes the target away.  Channels come from the dressed-frame
    projection, which loses a little population to the third level; the
    gate-level channel keeps only the coherent part by snapping to the
    closest unitary.
    """

    def __init__(self, pulse: Pulse, dev: DeviceParams):
        self.pulse = pulse
        self.dev = dev
        self._cache: dict[faults.FaultSpec, np.ndarray] = {}

    def channel(self, f: faults.FaultSpec) -> np.ndarray:
        key = replace(f, target_gate=faults.ALL_GATES)
        if key not in self._cache:
            u = faults.faulty_cz_channel(self.pulse, self.dev, key)
            self._cache[key] = nearest_unitary(u)
        return self._cache[key]

    def channel_map(self, c: Circuit, f: faults.FaultSpec) -> dict[int, np.ndarray]:
        """Positions of the circuit that the fault replaces, with their matrices."""
        u = self.channel(f)
        positions = c.cz_indices
        if f.target_gate != faults.ALL_GATES:
            if f.target_gate not in positions:
                raise ValueError(f"target {f.target_gate} is not a CZ position")
            positions = (f.target_gate,)
        return {pos: u for pos in positions}
