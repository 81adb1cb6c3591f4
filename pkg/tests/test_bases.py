import numpy as np
import pytest
from pydantic import ValidationError

from app.bases import (
    DeviationParams,
    adaptive_basis,
    deviated_basis,
    ideal_basis,
    pauli_observable,
    projectors_match,
)

S2 = 1 / np.sqrt(2)


def test_ideal_basis_special_angles():
    x = ideal_basis(0.0)
    np.testing.assert_allclose(x.plus_state, [S2, S2])
    np.testing.assert_allclose(x.minus_state, [S2, -S2])

    flipped = ideal_basis(np.pi)
    np.testing.assert_allclose(flipped.plus_state, [S2, -S2], atol=1e-15)
    np.testing.assert_allclose(flipped.minus_state, [S2, S2], atol=1e-15)

    y = ideal_basis(np.pi / 2)
    np.testing.assert_allclose(y.plus_state, [S2, -1j * S2], atol=1e-15)
    np.testing.assert_allclose(y.minus_state, [S2, 1j * S2], atol=1e-15)


def test_deviated_basis_without_deviation():
    u, delta = 0.7, 1.3
    ideal = ideal_basis(u)
    dev = deviated_basis(u, DeviationParams(epsilon=0.0, delta=delta))
    np.testing.assert_allclose(dev.plus_state, ideal.plus_state)
    np.testing.assert_allclose(dev.minus_state, -np.exp(-1j * delta) * ideal.minus_state)


def test_deviated_basis_full_flip_swaps_projectors():
    u, delta = 0.4, 2.0
    ideal = ideal_basis(u)
    dev = deviated_basis(u, DeviationParams(epsilon=np.pi, delta=delta))
    np.testing.assert_allclose(dev.plus_state, np.exp(-1j * delta) * ideal.minus_state, atol=1e-15)
    np.testing.assert_allclose(dev.minus_state, ideal.plus_state, atol=1e-15)


def test_deviated_basis_tilted_to_z():
    dev = deviated_basis(0.0, DeviationParams(epsilon=np.pi / 2, delta=0.0))
    np.testing.assert_allclose(dev.plus_state, [1, 0], atol=1e-15)


def test_deviated_basis_is_orthonormal():
    rng = np.random.default_rng(1)
    for _ in range(500):
        dev = DeviationParams(epsilon=rng.uniform(0, np.pi), delta=rng.uniform(0, 2 * np.pi))
        basis = deviated_basis(rng.uniform(-10, 10), dev)
        assert abs(np.vdot(basis.plus_state, basis.plus_state) - 1) < 1e-12
        assert abs(np.vdot(basis.minus_state, basis.minus_state) - 1) < 1e-12
        assert abs(np.vdot(basis.plus_state, basis.minus_state)) < 1e-12


@pytest.mark.parametrize("delta", [0.0, np.pi / 3, np.pi, 3 * np.pi / 2])
def test_zero_epsilon_keeps_projectors(delta):
    for u in np.linspace(0, 2 * np.pi, 9):
        assert projectors_match(ideal_basis(u), deviated_basis(u, DeviationParams(epsilon=0.0, delta=delta)))


def test_ideal_plus_is_eigenstate_of_rotated_observable():
    rng = np.random.default_rng(2)
    for u in rng.uniform(-2 * np.pi, 2 * np.pi, size=100):
        plus = ideal_basis(u).plus_state
        np.testing.assert_allclose(pauli_observable(u, "+") @ plus, plus, atol=1e-12)


def test_adaptive_basis():
    assert adaptive_basis(0.0, "+") == 0.0
    assert adaptive_basis(0.0, "-") == 0.0
    u = 1.1
    assert adaptive_basis(u, "+") == pytest.approx(u)

    plus = ideal_basis(adaptive_basis(u, "+")).plus_state
    np.testing.assert_allclose(pauli_observable(u, "+") @ plus, plus, atol=1e-12)

    minus_branch = ideal_basis(adaptive_basis(u, "-")).plus_state
    np.testing.assert_allclose(pauli_observable(u, "-") @ minus_branch, minus_branch, atol=1e-12)

    with pytest.raises(ValueError):
        adaptive_basis(u, "0")


def test_bases_are_continuous():
    h = 1e-6
    u, eps, delta = 0.9, 0.5, 2.2
    base = deviated_basis(u, DeviationParams(epsilon=eps, delta=delta))
    for du, de, dd in ((h, 0, 0), (0, h, 0), (0, 0, h)):
        moved = deviated_basis(u + du, DeviationParams(epsilon=eps + de, delta=delta + dd))
        assert np.linalg.norm(moved.plus_state - base.plus_state) < 1e-5
        assert np.linalg.norm(moved.minus_state - base.minus_state) < 1e-5
    # across the 2π wrap
    assert np.linalg.norm(ideal_basis(2 * np.pi - h / 2).plus_state - ideal_basis(h / 2).plus_state) < 1e-5


def test_deviation_params_validation():
    assert DeviationParams(epsilon=0.1, delta=2 * np.pi + 1.0).delta == pytest.approx(1.0)
    assert DeviationParams(epsilon=0.1, delta=-1.0).delta == pytest.approx(2 * np.pi - 1.0)
    assert DeviationParams(epsilon=np.pi).epsilon == np.pi
    with pytest.raises(ValidationError):
        DeviationParams(epsilon=-0.1)
    with pytest.raises(ValidationError):
        DeviationParams(epsilon=3.5)
