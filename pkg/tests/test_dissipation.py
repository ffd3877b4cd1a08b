"""
Tests for the Lindblad generators and the Trotter-split density integrator
"""

import numpy as np
import pytest

from dissipation import (
    MECHANICAL,
    OPTICAL,
    DensityIntegrator,
    Lindbladian,
    dephasing_rate,
    dissipator_apply,
    mechanical_thermalization,
    optical_loss,
    relax_mechanics,
    zero_lindbladian,
)
from fock_algebra import FockSpace, annihilation, embed_cavity, thermal_populations
from sim_errors import InvalidParameterError, SpaceMismatchError

SPACE = FockSpace(4, 3)


def _random_density(dim, seed=11):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    return rho / np.trace(rho)


def test_dissipators_are_trace_free():
    rho = _random_density(SPACE.composite_dim)
    generator = optical_loss(0.3, SPACE) + mechanical_thermalization(0.2, 2.0, 1.0 / 26.0, SPACE)
    assert abs(np.trace(generator.apply(rho))) < 1e-12


def test_dissipator_shape_mismatch():
    a = embed_cavity(annihilation(4), 3)
    with pytest.raises(SpaceMismatchError):
        dissipator_apply(a, np.eye(4))


def test_rates_are_validated():
    with pytest.raises(InvalidParameterError):
        optical_loss(-1e-3, SPACE)
    with pytest.raises(InvalidParameterError):
        mechanical_thermalization(1e-3, -1.0, 0.1, SPACE)
    with pytest.raises(InvalidParameterError):
        Lindbladian(SPACE, ((-1.0, embed_cavity(annihilation(4), 3)),))


def test_jump_operator_must_live_on_the_space():
    with pytest.raises(SpaceMismatchError):
        Lindbladian(SPACE, ((1.0, annihilation(4)),))


def test_labels_and_rates():
    loss = optical_loss(1e-3, SPACE)
    assert loss.label == OPTICAL
    assert loss.rates == (1e-3,)
    thermal = mechanical_thermalization(1e-3, 10.0, 0.05, SPACE)
    assert thermal.label == MECHANICAL
    assert thermal.rates[:2] == pytest.approx((1e-3 * 11.0, 1e-2))
    assert zero_lindbladian(SPACE).is_zero


def test_dephasing_rate():
    assert dephasing_rate(1e-3, 0.0, 0.1) == 0.0
    assert dephasing_rate(1e-3, 1.0, 0.1) == pytest.approx(4e-3 * 0.01 / np.log(2.0))


def test_photon_decay():
    space = FockSpace(3, 1)
    rho = np.zeros((3, 3), dtype=complex)
    rho[1, 1] = 1.0
    integrator = DensityIntegrator(optical_loss(0.5, space), dt=0.01)
    final = integrator.evolve(rho, 1.0)
    assert final[1, 1].real == pytest.approx(np.exp(-0.5), abs=1e-8)
    assert final[0, 0].real == pytest.approx(1.0 - np.exp(-0.5), abs=1e-8)


def test_evolve_needs_whole_steps():
    integrator = DensityIntegrator(zero_lindbladian(SPACE), dt=0.1)
    with pytest.raises(InvalidParameterError):
        integrator.evolve(np.eye(12) / 12, 0.25)


@pytest.mark.parametrize("order", [1, 2])
def test_unitary_only_evolution_is_exact(order):
    space = FockSpace(3, 1)
    h = np.diag([0.0, 1.0, 3.0]).astype(complex)
    h[0, 1] = h[1, 0] = 0.4
    rho = _random_density(3)
    integrator = DensityIntegrator(zero_lindbladian(space), dt=0.05, trotter_order=order)
    final = integrator.evolve(rho, 1.0, h, key="h")
    w, V = np.linalg.eigh(h)
    u = (V * np.exp(-1j * w)) @ V.conj().T
    assert np.allclose(final, u @ rho @ u.conj().T, atol=1e-10)


def test_thermalization_reaches_bose_einstein_populations():
    space = FockSpace(1, 6)
    rho = np.zeros((6, 6), dtype=complex)
    rho[0, 0] = 1.0
    lindbladian = mechanical_thermalization(1.0, 0.5, 0.0, space)
    snapshots = relax_mechanics(rho, lindbladian, duration=30.0, steps=3000, samples=3)
    expected, _ = thermal_populations(0.5, 6)
    assert len(snapshots) == 3
    assert np.allclose(np.real(np.diag(snapshots[-1])), expected, atol=1e-6)
    assert np.trace(snapshots[-1]).real == pytest.approx(1.0, abs=1e-10)
