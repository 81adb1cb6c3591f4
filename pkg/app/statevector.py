"""
Dense pure-state register.

Qubit i is bit i of the amplitude index (little-endian), so in the C-ordered
tensor view of shape (2,) * n qubit i lives on axis n - 1 - i.
"""
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from app.errors import (
    CapacityError,
    DegenerateBranchError,
    DimensionMismatchError,
    NonUnitaryError,
    NormDriftError,
    QubitIndexError,
    SimulationError,
)
from app.utils import setup_logger

logger = setup_logger()

MAX_QUBITS = 24
NORM_TOL = 1e-12
NORM_HARD_FAIL = 1e-6
UNITARY_TOL = 1e-12
DEGENERATE_PROB = 1e-14
DENSITY_TOL = 1e-12

SQRT1_2 = 1 / np.sqrt(2)

IDENTITY = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT1_2

PAULIS = {"I": IDENTITY, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


def rotation_x(u: float) -> np.ndarray:
    """e^{-i(u/2)X}"""
    c, s = np.cos(u / 2), np.sin(u / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def rotation_z(u: float) -> np.ndarray:
    """e^{-i(u/2)Z}"""
    return np.array([[np.exp(-0.5j * u), 0], [0, np.exp(0.5j * u)]], dtype=complex)


def check_unitary(gate: np.ndarray) -> np.ndarray:
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2, 2):
        raise NonUnitaryError(f"Expected a 2x2 gate, got shape {gate.shape}")
    if not np.allclose(gate.conj().T @ gate, IDENTITY, rtol=0, atol=UNITARY_TOL):
        raise NonUnitaryError("Gate is not unitary within tolerance")
    return gate


class StateVector:
    """
    Normalized vector of 2**n_qubits complex amplitudes.

    A 0-qubit register holds a single amplitude of modulus 1; it is what remains
    after every qubit has been measured, and its phase is kept.
    """

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes: Iterable[complex]):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        dim = amps.shape[0]
        if dim == 0 or dim & (dim - 1):
            raise DimensionMismatchError(f"Amplitude count {dim} is not a power of two")
        if dim.bit_length() - 1 > MAX_QUBITS:
            raise CapacityError(f"{dim.bit_length() - 1} qubits exceeds the limit of {MAX_QUBITS}")

        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_HARD_FAIL:
            raise NormDriftError(f"State norm {norm!r} deviates from 1 by more than {NORM_HARD_FAIL}")
        # tolerance applies to sum |a|^2
        if abs(norm * norm - 1.0) > NORM_TOL:
            amps = amps / norm
        self.amplitudes = amps

    @classmethod
    def from_amplitudes(cls, amplitudes: Iterable[complex], normalize: bool = False) -> "StateVector":
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm == 0:
                raise NormDriftError("Cannot normalize the zero vector")
            if abs(norm - 1.0) > NORM_TOL:
                logger.warning(f"Renormalizing supplied amplitudes (norm was {norm:.6g})")
            amps = amps / norm
        return cls(amps)

    @classmethod
    def basis_state(cls, bits: Sequence[int]) -> "StateVector":
        """bits[i] is the value of qubit i."""
        index = sum(int(b) << i for i, b in enumerate(bits))
        amps = np.zeros(1 << len(bits), dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @classmethod
    def plus_state(cls, n_qubits: int) -> "StateVector":
        return cls(np.full(1 << n_qubits, 2 ** (-n_qubits / 2), dtype=complex))

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.shape[0].bit_length() - 1

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def axis(self, q: int) -> int:
        return self.n_qubits - 1 - self._check_index(q)

    def _check_index(self, q: int) -> int:
        if not isinstance(q, (int, np.integer)) or not 0 <= q < self.n_qubits:
            raise QubitIndexError(f"Qubit index {q} out of range for {self.n_qubits} qubits")
        return int(q)

    def copy(self) -> "StateVector":
        return StateVector(self.amplitudes.copy())

    def __len__(self) -> int:
        return self.dimension

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits})"


@dataclass
class BranchOutcome:
    """One post-measurement trajectory: label is '+' / '-' (or a string of them for a history)."""

    label: str
    probability: float
    post_state: Optional[StateVector]

    @property
    def degenerate(self) -> bool:
        return self.post_state is None


def _from_tensor(tensor: np.ndarray) -> StateVector:
    return StateVector(tensor.reshape(-1))


def apply_single_qubit(state: StateVector, q: int, g: np.ndarray) -> StateVector:
    g = check_unitary(g)
    axis = state.axis(q)
    psi = np.tensordot(g, state.tensor(), axes=([1], [axis]))
    return _from_tensor(np.moveaxis(psi, 0, axis))


def apply_cz(state: StateVector, q1: int, q2: int) -> StateVector:
    state._check_index(q1)
    state._check_index(q2)
    if q1 == q2:
        raise QubitIndexError(f"CZ needs two distinct qubits, got {q1} twice")
    idx = np.arange(state.dimension)
    both = ((idx >> q1) & (idx >> q2) & 1).astype(bool)
    amps = state.amplitudes.copy()
    amps[both] *= -1
    return StateVector(amps)


def extend_with_plus(state: StateVector, k: int) -> StateVector:
    """state ⊗ |+>^k, new qubits taking the k highest indices."""
    if k < 0:
        raise CapacityError(f"Cannot attach a negative number of qubits ({k})")
    if state.n_qubits + k > MAX_QUBITS:
        raise CapacityError(f"Attaching {k} qubits to {state.n_qubits} exceeds the limit of {MAX_QUBITS}")
    if k == 0:
        return state.copy()
    plus = np.full(1 << k, 2 ** (-k / 2), dtype=complex)
    return StateVector(np.kron(plus, state.amplitudes))


def project_measure(state: StateVector, q: int, basis, branch: str):
    """
    Projects qubit q onto basis.plus_state ('+') or basis.minus_state ('-') and
    removes it from the register. Returns (probability, post_state).
    """
    if branch not in ("+", "-"):
        raise ValueError(f"Branch must be '+' or '-', got {branch!r}")
    axis = state.axis(q)
    vector = basis.plus_state if branch == "+" else basis.minus_state
    projected = np.tensordot(np.conj(vector), state.tensor(), axes=([0], [axis]))
    projected = np.asarray(projected).reshape(-1)
    probability = float(np.vdot(projected, projected).real)
    if probability < DEGENERATE_PROB:
        raise DegenerateBranchError(
            f"Branch {branch} of qubit {q} has probability {probability:.3g}; no conditional state",
            probability=probability,
        )
    return probability, StateVector(projected / np.sqrt(probability))


def permute_qubits(state: StateVector, order: Sequence[int]) -> StateVector:
    """New qubit i is old qubit order[i]."""
    n = state.n_qubits
    if sorted(order) != list(range(n)):
        raise QubitIndexError(f"{list(order)} is not a permutation of {n} qubits")
    axes = [n - 1 - order[n - 1 - k] for k in range(n)]
    return _from_tensor(np.transpose(state.tensor(), axes))


def check_density(rho: np.ndarray) -> np.ndarray:
    if not np.allclose(rho, rho.conj().T, rtol=0, atol=DENSITY_TOL):
        raise SimulationError("Reduced density operator is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > DENSITY_TOL:
        raise SimulationError(f"Reduced density operator has trace {np.trace(rho).real!r}")
    eigenvalues = np.linalg.eigvalsh(rho)
    if eigenvalues.min() < -DENSITY_TOL or eigenvalues.max() > 1 + DENSITY_TOL:
        raise SimulationError(f"Reduced density operator has eigenvalues {eigenvalues}")
    return rho


def reduced_density_single(state: StateVector, q: int) -> np.ndarray:
    axis = state.axis(q)
    rows = np.moveaxis(state.tensor(), axis, 0).reshape(2, -1)
    rho = rows @ rows.conj().T
    return check_density(rho)


def fidelity(a: StateVector, b: StateVector) -> float:
    """|<a|b>|^2"""
    if a.n_qubits != b.n_qubits:
        raise DimensionMismatchError(f"Cannot compare {a.n_qubits}-qubit and {b.n_qubits}-qubit states")
    overlap = abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2
    return float(min(max(overlap, 0.0), 1.0))
