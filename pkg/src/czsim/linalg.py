"""Dense-operator helpers and basis conventions for small quantum systems.

All operators are plain complex ``numpy`` arrays.  The thin ``Operator`` and
``DensityMatrix`` wrappers validate their entries on construction and are used
at module boundaries; hot loops work on raw arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CapacityError, ShapeError

UNITARITY_TOL = 1e-8
HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8

# Largest operator dimension kron_compose will build (16-qubit equivalent).
MAX_DIM = 65536

# Two coupled qutrits: |i, j> maps to column-major-free flat index 3*i + j.
QUTRIT_LEVELS = 3
PAIR_DIM = 9

# Flat indices of the two-qubit computational subspace |00>,|01>,|10>,|11>.
COMPUTATIONAL_IDX = (0, 1, 3, 4)

# Flat indices of the low-excitation subspace |00>,|01>,|02>,|10>,|11>,|20>
# used by the leakage-fault generator.
LOW_ENERGY_IDX = (0, 1, 2, 3, 4, 6)


def pair_index(i: int, j: int) -> int:
    """Flat index of the two-qutrit product state |i, j>."""
    if not (0 <= i < QUTRIT_LEVELS and 0 <= j < QUTRIT_LEVELS):
        raise ValueError(f"qutrit levels out of range: ({i}, {j})")
    return QUTRIT_LEVELS * i + j


def _as_square(m: np.ndarray) -> np.ndarray:
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    return a.astype(complex, copy=False)


def is_unitary(m: np.ndarray, tol: float = UNITARITY_TOL) -> bool:
    a = _as_square(m)
    return bool(np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0]))) <= tol)


def is_hermitian(m: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    a = _as_square(m)
    return bool(np.max(np.abs(a - a.conj().T)) <= tol)


def kron_compose(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of the given operators, left factor most significant."""
    if not ops:
        raise ValueError("kron_compose needs at least one operator")
    mats = [_as_square(o) for o in ops]
    total = 1
    for m in mats:
        total *= m.shape[0]
        if total > MAX_DIM:
            raise CapacityError(f"kron dimension {total} exceeds {MAX_DIM}")
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def expm(m: np.ndarray, scale: complex = 1.0) -> np.ndarray:
    """Matrix exponential exp(scale * m)."""
    a = _as_square(m)
    return scipy.linalg.expm(scale * a)


def nearest_unitary(m: np.ndarray) -> np.ndarray:
    """Closest unitary in Frobenius norm (polar factor via SVD)."""
    a = _as_square(m)
    w, _, vh = np.linalg.svd(a)
    return w @ vh


def embed_computational(u4: np.ndarray) -> np.ndarray:
    """Embed a two-qubit operator into the two-qutrit space.

    The 4x4 block lands on the computational flat indices and the remaining
    levels carry the identity.
    """
    a = _as_square(u4)
    if a.shape != (4, 4):
        raise ShapeError(f"expected a 4x4 operator, got {a.shape}")
    out = np.eye(PAIR_DIM, dtype=complex)
    idx = np.asarray(COMPUTATIONAL_IDX)
    out[np.ix_(idx, idx)] = a
    return out


def project_computational(u9: np.ndarray) -> np.ndarray:
    """Restrict a two-qutrit operator to the computational rows and columns."""
    a = _as_square(u9)
    if a.shape != (PAIR_DIM, PAIR_DIM):
        raise ShapeError(f"expected a {PAIR_DIM}x{PAIR_DIM} operator, got {a.shape}")
    idx = np.asarray(COMPUTATIONAL_IDX)
    return a[np.ix_(idx, idx)]


def embed_subspace(block: np.ndarray, idx: tuple[int, ...], dim: int,
                   fill: str = "identity") -> np.ndarray:
    """Place ``block`` on the rows/columns ``idx`` of a ``dim``-dim operator.

    ``fill`` selects what the untouched levels carry: ``"identity"`` for gates,
    ``"zero"`` for generators that must vanish outside the subspace.
    """
    a = _as_square(block)
    if a.shape[0] != len(idx):
        raise ShapeError(f"block of shape {a.shape} does not match {len(idx)} indices")
    if fill == "identity":
        out = np.eye(dim, dtype=complex)
    elif fill == "zero":
        out = np.zeros((dim, dim), dtype=complex)
    else:
        raise ValueError(f"unknown fill {fill!r}")
    ix = np.asarray(idx)
    out[np.ix_(ix, ix)] = a
    return out


@dataclass(frozen=True)
class Operator:
    """Validated square operator."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = _as_square(self.entries)
        if not np.all(np.isfinite(a.view(float))):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def is_unitary(self, tol: float = UNITARITY_TOL) -> bool:
        return is_unitary(self.entries, tol)

    def is_hermitian(self, tol: float = HERMITICITY_TOL) -> bool:
        return is_hermitian(self.entries, tol)


@dataclass(frozen=True)
class DensityMatrix:
    """Validated density matrix: Hermitian, unit trace, positive within tolerance."""

    entries: np.ndarray = field(repr=False)
    atol: float = TRACE_TOL

    def __post_init__(self):
        a = _as_square(self.entries)
        if not np.all(np.isfinite(a.view(float))):
            raise ValueError("density-matrix entries must be finite")
        if not is_hermitian(a, max(self.atol, HERMITICITY_TOL)):
            raise ValueError("density matrix must be Hermitian")
        tr = np.trace(a).real
        if abs(tr - 1.0) > self.atol:
            raise ValueError(f"density matrix trace {tr} deviates from 1")
        w = np.linalg.eigvalsh(a)
        if w.min() < -max(self.atol, 1e-10):
            raise ValueError(f"density matrix has negative eigenvalue {w.min()}")
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.entries))


def ket(index: int, dim: int) -> np.ndarray:
    """Basis column vector |index> in a ``dim``-dimensional space."""
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def density_from_ket(psi: np.ndarray) -> np.ndarray:
    v = np.asarray(psi, dtype=complex)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    v = v / n
    return np.outer(v, v.conj())
