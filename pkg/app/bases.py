"""
Single-qubit measurement bases.

The ideal basis for angle u is |u±> = (|0> ± e^{-iu}|1>)/√2, the eigenbasis of
cos u X - sin u Y. A deviated measurement tilts it by (epsilon, delta):

    |ũ+> = cos(ε/2)|u+> + e^{-iδ} sin(ε/2)|u->
    |ũ-> = sin(ε/2)|u+> - e^{-iδ} cos(ε/2)|u->
"""
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from app.errors import InvalidParameterError
from app.statevector import PAULI_X, PAULI_Y, SQRT1_2

TWO_PI = 2 * np.pi
BASIS_TOL = 1e-12


def reduce_angle(u: float) -> float:
    """Maps any finite angle into [0, 2π)."""
    if not np.isfinite(u):
        raise InvalidParameterError(f"Measurement angle must be finite, got {u!r}")
    reduced = float(np.mod(u, TWO_PI))
    # np.mod can return exactly 2π for tiny negative inputs
    return 0.0 if reduced >= TWO_PI else reduced


class DeviationParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: float = 0.0
    delta: float = 0.0

    @field_validator("epsilon")
    @classmethod
    def _epsilon_range(cls, v: float) -> float:
        if not np.isfinite(v) or not 0.0 <= v <= np.pi:
            raise ValueError(f"epsilon must lie in [0, pi], got {v}")
        return float(v)

    @field_validator("delta")
    @classmethod
    def _delta_reduced(cls, v: float) -> float:
        if not np.isfinite(v):
            raise ValueError(f"delta must be finite, got {v}")
        return reduce_angle(v)

    @property
    def is_ideal(self) -> bool:
        return self.epsilon == 0.0


@dataclass(frozen=True)
class BasisPair:
    plus_state: np.ndarray
    minus_state: np.ndarray

    def __post_init__(self):
        for vec in (self.plus_state, self.minus_state):
            if abs(np.vdot(vec, vec).real - 1.0) > BASIS_TOL:
                raise InvalidParameterError("Basis state is not normalized")
        if abs(np.vdot(self.plus_state, self.minus_state)) > BASIS_TOL:
            raise InvalidParameterError("Basis states are not orthogonal")

    def projectors(self):
        return (
            np.outer(self.plus_state, self.plus_state.conj()),
            np.outer(self.minus_state, self.minus_state.conj()),
        )


def ideal_basis(u: float) -> BasisPair:
    phase = np.exp(-1j * reduce_angle(u))
    return BasisPair(
        plus_state=np.array([SQRT1_2, SQRT1_2 * phase], dtype=complex),
        minus_state=np.array([SQRT1_2, -SQRT1_2 * phase], dtype=complex),
    )


def deviated_basis(u: float, dev: DeviationParams) -> BasisPair:
    ideal = ideal_basis(u)
    c, s = np.cos(dev.epsilon / 2), np.sin(dev.epsilon / 2)
    tilt = np.exp(-1j * dev.delta)
    return BasisPair(
        plus_state=c * ideal.plus_state + tilt * s * ideal.minus_state,
        minus_state=s * ideal.plus_state - tilt * c * ideal.minus_state,
    )


def adaptive_basis(u: float, previous_outcome: str) -> float:
    """
    Signed angle for an adaptive measurement: u after a '+' outcome, -u after '-'.
    ideal_basis of the result diagonalizes cos u X ∓ sin u Y respectively.
    """
    if previous_outcome == "+":
        return reduce_angle(u)
    if previous_outcome == "-":
        return reduce_angle(-u)
    raise InvalidParameterError(f"Outcome must be '+' or '-', got {previous_outcome!r}")


def pauli_observable(u: float, sign: str = "+") -> np.ndarray:
    """cos u X - sin u Y for sign '+', cos u X + sin u Y for sign '-'."""
    s = -1.0 if sign == "+" else 1.0
    return np.cos(u) * PAULI_X + s * np.sin(u) * PAULI_Y


def projectors_match(a: BasisPair, b: BasisPair, tol: float = BASIS_TOL) -> bool:
    return all(np.linalg.norm(pa - pb) < tol for pa, pb in zip(a.projectors(), b.projectors()))
