"""State and gate fidelity measures."""

from __future__ import annotations

import numpy as np

from .linalg import DensityMatrix

CZ = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)

# Eigenvalues below this are treated as exact zeros in matrix square roots.
PSD_CLAMP = 1e-12


def _sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    w[w < PSD_CLAMP] = 0.0
    return (v * np.sqrt(w)) @ v.conj().T


def state_fidelity(rho: DensityMatrix | np.ndarray,
                   sigma: DensityMatrix | np.ndarray) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    a = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    b = sigma.entries if isinstance(sigma, DensityMatrix) else np.asarray(sigma, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    sq = _sqrtm_psd(a)
    inner = sq @ b @ sq
    w = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    value = float(np.sum(np.sqrt(w)) ** 2)
    return min(value, 1.0 + 1e-9)


def gate_fidelity(u_ideal: np.ndarray, u_real: np.ndarray) -> float:
    """|tr(U_ideal^dag U_real)|^2 / d^2, invariant under global phase."""
    a = np.asarray(u_ideal, dtype=complex)
    b = np.asarray(u_real, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    d = a.shape[0]
    return float(np.abs(np.trace(a.conj().T @ b)) ** 2 / d ** 2)


def virtual_z_phases(u4: np.ndarray) -> tuple[float, float]:
    """Single-qubit Z angles that cancel the local phases of a CZ-like 4x4."""
    u = np.asarray(u4, dtype=complex)
    theta_b = -float(np.angle(u[1, 1] / u[0, 0]))
    theta_a = -float(np.angle(u[2, 2] / u[0, 0]))
    return theta_a, theta_b


def apply_virtual_z(u4: np.ndarray, theta_a: float, theta_b: float) -> np.ndarray:
    corr = np.diag(np.exp(1j * np.array([0.0, theta_b, theta_a, theta_a + theta_b])))
    return corr @ np.asarray(u4, dtype=complex)


def phase_corrected_gate_fidelity(u4: np.ndarray,
                                  target: np.ndarray = CZ) -> float:
    """Gate fidelity against CZ after the virtual-Z phase correction."""
    theta_a, theta_b = virtual_z_phases(u4)
    return gate_fidelity(target, apply_virtual_z(u4, theta_a, theta_b))


def conditional_phase(u4: np.ndarray) -> float:
    """arg(U00 U11 / (U01 U10)) of the diagonal entries, in (-pi, pi]."""
    u = np.asarray(u4, dtype=complex)
    z = (u[0, 0] * u[3, 3]) / (u[1, 1] * u[2, 2])
    return float(np.angle(z))
