"""Two-qutrit device model: Hamiltonian, tracked eigensystem, decoherence.

Angular frequencies throughout (rad/s, hbar = 1).  Qubit 1 is frequency
tunable; qubit 2 and the anharmonicity are fixed.  The avoided crossing used
by the adiabatic CZ gate sits at omega1 = omega2 - alpha where |11> and |20>
hybridize with gap 2*sqrt(2)*g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import LabelingError
from .linalg import PAIR_DIM, QUTRIT_LEVELS, kron_compose

TWO_PI_GHZ = 2.0 * math.pi * 1e9

# Single-qutrit operators.  J is the weighted lowering operator; L1/L2 are the
# relaxation and dephasing collapse operators built from it.
J_LOWER = np.array([[0, 1, 0],
                    [0, 0, math.sqrt(2)],
                    [0, 0, 0]], dtype=complex)
NUMBER = np.diag([0.0, 1.0, 2.0]).astype(complex)
PROJ2 = np.diag([0.0, 0.0, 1.0]).astype(complex)
L1 = J_LOWER
L2 = np.diag([0.0, 1.0, 2.0]).astype(complex)

IDENT3 = np.eye(QUTRIT_LEVELS, dtype=complex)

# Exchange coupling J1^dag J2 + J1 J2^dag in the flat two-qutrit basis.
COUPLING = (kron_compose(J_LOWER.conj().T, J_LOWER)
            + kron_compose(J_LOWER, J_LOWER.conj().T))

# omega1-independent and omega1-proportional parts of the diagonal.
NUMBER_1 = kron_compose(NUMBER, IDENT3)
NUMBER_2 = kron_compose(IDENT3, NUMBER)
ANHARM_1 = kron_compose(PROJ2, IDENT3)
ANHARM_2 = kron_compose(IDENT3, PROJ2)


@dataclass(frozen=True)
class DeviceParams:
    """Static electrical parameters of the coupled-transmon pair."""

    omega1_idle: float
    omega2: float
    alpha: float
    g: float
    kappa_inv: float = 160e-9
    g_res: float = 0.1 * TWO_PI_GHZ
    omega_r: float = 7.0 * TWO_PI_GHZ

    def __post_init__(self):
        if self.alpha >= 0:
            raise ValueError("anharmonicity must be negative")
        if self.g <= 0:
            raise ValueError("coupling g must be positive")

    @classmethod
    def from_ghz(cls, omega1_idle=7.05, omega2=5.1, alpha=-0.75, g=0.018,
                 kappa_inv_ns=160.0, g_res=0.1, omega_r=7.0) -> "DeviceParams":
        """Build from ordinary frequencies in GHz (kappa_inv in ns)."""
        return cls(omega1_idle=omega1_idle * TWO_PI_GHZ,
                   omega2=omega2 * TWO_PI_GHZ,
                   alpha=alpha * TWO_PI_GHZ,
                   g=g * TWO_PI_GHZ,
                   kappa_inv=kappa_inv_ns * 1e-9,
                   g_res=g_res * TWO_PI_GHZ,
                   omega_r=omega_r * TWO_PI_GHZ)

    @property
    def omega1_crossing(self) -> float:
        """Tuned frequency at which |11> and |20> are degenerate."""
        return self.omega2 - self.alpha


def default_device() -> DeviceParams:
    return DeviceParams.from_ghz()


@dataclass(frozen=True)
class DecoherenceParams:
    """Relaxation and pure-dephasing times in seconds (inf disables a channel)."""

    t1: float = math.inf
    t_phi: float = math.inf

    @property
    def t2(self) -> float:
        return total_t2(self.t1, self.t_phi)

    @classmethod
    def from_t1_t2star(cls, t1: float, t2star: float) -> "DecoherenceParams":
        """Derive the pure-dephasing time from measured T1 and total T2*."""
        inv_phi = 1.0 / t2star - 1.0 / (2.0 * t1)
        if inv_phi <= 0:
            raise ValueError("t2star must be below 2*t1")
        return cls(t1=t1, t_phi=1.0 / inv_phi)

    def is_ideal(self) -> bool:
        return math.isinf(self.t1) and math.isinf(self.t_phi)


def build_hamiltonian(dev: DeviceParams, omega1: float | None = None) -> np.ndarray:
    """Lab-frame two-qutrit Hamiltonian at the given qubit-1 frequency."""
    w1 = dev.omega1_idle if omega1 is None else omega1
    return (w1 * NUMBER_1 + dev.alpha * ANHARM_1
            + dev.omega2 * NUMBER_2 + dev.alpha * ANHARM_2
            + dev.g * COUPLING)


def bare_energies(dev: DeviceParams, omega1: float | None = None) -> np.ndarray:
    """Diagonal of the uncoupled Hamiltonian in the flat basis."""
    w1 = dev.omega1_idle if omega1 is None else omega1
    h = (w1 * NUMBER_1 + dev.alpha * ANHARM_1
         + dev.omega2 * NUMBER_2 + dev.alpha * ANHARM_2)
    return np.real(np.diag(h))


@dataclass(frozen=True)
class EigenSystem:
    """Eigenpairs labeled by bare states; column k belongs to label flat index k."""

    energies: np.ndarray
    vectors: np.ndarray

    def energy(self, i: int, j: int) -> float:
        return float(self.energies[QUTRIT_LEVELS * i + j])


def _match_to_reference(vectors: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Permute eigenvector columns so column k maximizes overlap with reference k."""
    overlap = np.abs(reference.conj().T @ vectors)
    ref_idx, col_idx = linear_sum_assignment(-overlap**2)
    if np.any(overlap[ref_idx, col_idx] < 0.5):
        worst = float(overlap[ref_idx, col_idx].min())
        raise LabelingError(f"eigenvector overlap {worst:.3f} below 0.5; "
                            "tracking grid too coarse")
    order = np.empty(vectors.shape[1], dtype=int)
    order[ref_idx] = col_idx
    return order


def eigen_tracked(dev: DeviceParams, omega1: float | None = None) -> EigenSystem:
    """Eigensystem with labels continued from the bare basis at idle.

    Labels follow maximum-overlap continuation along a frequency path from
    idle to the requested omega1 in steps of at most g/10, so hybridized
    states keep their adiabatic identity through the avoided crossing.
    """
    target = dev.omega1_idle if omega1 is None else omega1
    span = target - dev.omega1_idle
    n_steps = max(1, int(math.ceil(abs(span) / (dev.g / 10.0))))
    reference = np.eye(PAIR_DIM, dtype=complex)
    energies = vectors = None
    for k in range(n_steps + 1):
        w1 = dev.omega1_idle + span * (k / n_steps)
        w, v = np.linalg.eigh(build_hamiltonian(dev, w1))
        order = _match_to_reference(v, reference)
        energies, vectors = w[order], v[:, order]
        # Fix the gauge so continuation compares against phase-aligned vectors.
        phase = np.exp(-1j * np.angle(np.sum(reference.conj() * vectors, axis=0)))
        vectors = vectors * phase
        reference = vectors
    return EigenSystem(energies=energies, vectors=vectors)


def static_zz(dev: DeviceParams, omega1: float | None = None) -> float:
    """ZZ shift zeta = E11 - E10 - E01 + E00 of the labeled eigensystem."""
    es = eigen_tracked(dev, omega1)
    return es.energy(1, 1) - es.energy(1, 0) - es.energy(0, 1) + es.energy(0, 0)


def static_zz_perturbative(dev: DeviceParams, omega1: float | None = None) -> float:
    """Second-order estimate 2g^2 (1/(D-a) - 1/(D+a)) with D = omega1 - omega2."""
    w1 = dev.omega1_idle if omega1 is None else omega1
    delta = w1 - dev.omega2
    return 2.0 * dev.g**2 * (1.0 / (delta - dev.alpha) - 1.0 / (delta + dev.alpha))


def purcell_rate(kappa: float, g_res: float, detuning: float) -> float:
    """Resonator-induced relaxation rate kappa * (g/Delta)^2."""
    if detuning == 0:
        raise ValueError("purcell rate diverges at zero detuning")
    return kappa * (g_res / detuning) ** 2


def total_t2(t1: float, t_phi: float) -> float:
    """Combine relaxation and pure dephasing: 1/t2 = 1/(2 t1) + 1/t_phi."""
    inv = 0.0
    if not math.isinf(t1):
        inv += 1.0 / (2.0 * t1)
    if not math.isinf(t_phi):
        inv += 1.0 / t_phi
    return math.inf if inv == 0.0 else 1.0 / inv


def qutrit_collapse_ops(dec: DecoherenceParams) -> list[tuple[float, np.ndarray]]:
    """Single-qutrit (rate, operator) pairs; zero-rate channels are dropped.

    The dephasing dissipator carries rate 2/t_phi: with L2 = diag(0, 1, 2)
    the |0><1| coherence then decays at 1/t_phi as required by the T2
    relation 1/t2 = 1/(2 t1) + 1/t_phi.
    """
    ops = []
    if not math.isinf(dec.t1):
        ops.append((1.0 / dec.t1, L1))
    if not math.isinf(dec.t_phi):
        ops.append((2.0 / dec.t_phi, L2))
    return ops


def collapse_operators(dec: DecoherenceParams, sites: int = 2) -> list[tuple[float, np.ndarray]]:
    """Embedded (rate, operator) pairs for each site of a qutrit register."""
    out = []
    for site in range(sites):
        for rate, op in qutrit_collapse_ops(dec):
            factors = [IDENT3] * sites
            factors[site] = op
            out.append((rate, kron_compose(*factors)))
    return out
