"""
Tests for the optomechanical model: drive, Hamiltonians, Magnus terms and
the half-period propagator
"""

import numpy as np
import pytest
from scipy.integrate import quad

from fock_algebra import CAVITY, COMPOSITE, embed_cavity
from model import (
    Y_COEFFICIENT,
    DrivePulse,
    HamiltonianTerms,
    SystemParams,
    block_effective_hamiltonian,
    displacement_f,
    drive_value,
    frame_displacement,
    h2_operator,
    h3_operator,
    half_period_adjoint_residual,
    half_period_propagator,
    hamiltonian_lab,
    m2_cavity,
    m2_interaction,
    m3_interaction,
    m3_mech,
    magnus_first_order_numeric,
    magnus_second_order_closed_form,
    magnus_second_order_numeric,
    odd_part_cancellation,
    phase_rotation,
    residual_modulo_identity,
    second_order_block_hg,
    third_order_pair_hamiltonian,
)
from sim_errors import InvalidParameterError

SMALL = SystemParams(k=1.0 / 26.0, cavity_dim=6, mech_dim=5)


def test_system_params_defaults():
    params = SystemParams()
    assert params.k == pytest.approx(1.0 / 26.0)
    assert params.period == pytest.approx(2.0 * np.pi)
    assert params.block_duration == pytest.approx(10.0 * np.pi)
    assert params.omega_c == pytest.approx(20.0)
    assert params.has_even_ratio


@pytest.mark.parametrize("kwargs", [{"k": 1.0}, {"k": -0.1}, {"omega_c_ratio": 0}, {"omega_m": 0.0}])
def test_system_params_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        SystemParams(**kwargs)


def test_drive_pulse_validation():
    with pytest.raises(InvalidParameterError):
        DrivePulse(-1.0, 0.0, 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        DrivePulse(1.0, 0.0, 0.0, 0.0)


def test_drive_value_inside_and_outside_window():
    params = SystemParams()
    pulse = DrivePulse(2.0, 0.4, 0.0, 1.0)
    assert drive_value(pulse, 0.0, params=params) == pytest.approx(4j * np.exp(0.4j))
    assert drive_value(pulse, params.period, params=params) == 0.0
    t = 1.1
    lab = drive_value(pulse, t, "lab", params)
    assert lab == pytest.approx(np.exp(-1j * params.omega_c * t) * drive_value(pulse, t, params=params))


def test_displacement_integral_matches_quadrature():
    params = SystemParams()
    pulses = [DrivePulse(1.5, 0.7, 0.0, 1.0), DrivePulse(1.5, 0.7 + np.pi, 1.0, 1.0)]
    t = 1.3 * params.period

    def rotating(tau, part):
        value = sum(drive_value(p, tau, params=params) for p in pulses)
        return value.real if part == 0 else value.imag

    points = [params.period]
    real = quad(rotating, 0.0, t, args=(0,), points=points, limit=200)[0]
    imag = quad(rotating, 0.0, t, args=(1,), points=points, limit=200)[0]
    assert displacement_f(pulses, t, params) == pytest.approx(real + 1j * imag, abs=1e-8)


def test_frame_displacement_vanishes_at_period_boundaries():
    params = SystemParams()
    pulses = [DrivePulse(4.0, 1.0, 0.0, 1.0)]
    assert abs(frame_displacement(pulses, params.period, params)) < 1e-12
    quarter = params.period / 8.0
    expected = -1j * displacement_f(pulses, quarter, params)
    assert frame_displacement(pulses, quarter, params) == pytest.approx(expected)
    assert abs(expected) == pytest.approx(4.0)


def test_hamiltonian_is_hermitian_in_every_frame():
    pulses = [DrivePulse(1.0, 0.3, 0.0, 1.0)]
    for frame in ("rotating", "lab", "displaced"):
        h = hamiltonian_lab(SMALL, pulses, 0.4, frame)
        assert h.kind == COMPOSITE
        assert h.is_hermitian()


def test_displaced_frame_matches_rotating_frame_without_displacement():
    rotating = HamiltonianTerms(SMALL, "rotating")
    displaced = HamiltonianTerms(SMALL, "displaced")
    pulses = [DrivePulse(0.0, 0.0, 0.0, 1.0)]
    assert np.allclose(rotating.at(pulses, 0.5).toarray(), displaced.at(pulses, 0.5).toarray())


def test_unknown_frame_is_rejected():
    with pytest.raises(InvalidParameterError):
        HamiltonianTerms(SMALL, "interaction")


def test_m2_cavity_without_drive_is_kerr_term():
    n = np.arange(SMALL.cavity_dim)
    assert np.allclose(m2_cavity(0.0, 0.0, SMALL).matrix, np.diag(-2.0 * n ** 2))


def test_phase_rotation_conjugates_second_order_terms():
    for eta, psi in ((4.0, 0.0), (4.0, np.pi / 3.0), (1.5, -2.0)):
        v = phase_rotation(psi, SMALL.cavity_dim)
        rotated = v @ m2_cavity(eta, 0.0, SMALL) @ v.dag()
        assert np.allclose(rotated.matrix, m2_cavity(eta, psi, SMALL).matrix, atol=1e-12)
        vv = embed_cavity(v, SMALL.mech_dim)
        rotated = vv @ m2_interaction(eta, 0.0, SMALL) @ vv.dag()
        assert np.allclose(rotated.matrix, m2_interaction(eta, psi, SMALL).matrix, atol=1e-12)


def test_third_order_terms_are_hermitian():
    assert Y_COEFFICIENT == pytest.approx(16.0 * np.sqrt(6.0) / 27.0)
    assert m3_mech(4.0, SMALL).is_hermitian()
    assert m3_interaction(4.0, 0.7, SMALL).is_hermitian()
    assert h3_operator(4.0, SMALL).is_hermitian()
    assert third_order_pair_hamiltonian(4.0, SMALL).is_hermitian()


def test_h2_diagonal():
    n = np.arange(6)
    assert np.allclose(np.diag(h2_operator(3.0, 6).matrix), -5.0 * n ** 2)


def test_block_effective_hamiltonian_normalization():
    block = block_effective_hamiltonian(2.0, SMALL, order=2)
    assert block.hamiltonian.kind == CAVITY
    assert block.generator_time == pytest.approx(SMALL.period)
    assert block.physical_duration == pytest.approx(5.0 * SMALL.period)
    assert np.allclose(block.real_time_hamiltonian().matrix, block.hamiltonian.matrix / 5.0)

    scale = SMALL.omega_m * SMALL.k ** 2
    assert np.allclose(block.hamiltonian.matrix, scale * h2_operator(2.0, SMALL.cavity_dim).matrix)

    composite = block_effective_hamiltonian(2.0, SMALL, order=3)
    assert composite.hamiltonian.kind == COMPOSITE

    with pytest.raises(InvalidParameterError):
        block_effective_hamiltonian(2.0, SMALL, order=4)


def test_second_order_block_hg():
    with pytest.raises(InvalidParameterError):
        second_order_block_hg([], SMALL)
    hg = second_order_block_hg([0.0, 0.0], SMALL)
    n = np.arange(SMALL.cavity_dim)
    assert np.allclose(np.diag(hg.matrix), -8.0 * SMALL.k ** 2 * n ** 2)


def test_half_period_propagator_is_unitary():
    u = half_period_propagator(SMALL).matrix
    assert np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=1e-12)


@pytest.mark.parametrize("k", [1.0 / 16.0, 1.0 / 26.0])
def test_half_period_adjoint_identity(k):
    assert half_period_adjoint_residual(SMALL.with_k(k)) < 1e-10


def test_half_period_needs_even_ratio():
    odd = SystemParams(omega_c_ratio=21, cavity_dim=4, mech_dim=4)
    with pytest.raises(InvalidParameterError):
        half_period_propagator(odd)


def test_half_period_without_coupling_is_phonon_parity():
    params = SMALL.with_k(0.0)
    parity = np.kron(np.eye(params.cavity_dim), np.diag((-1.0) ** np.arange(params.mech_dim)))
    assert np.allclose(half_period_propagator(params).matrix, parity, atol=1e-12)


def test_odd_part_changes_sign_without_coupling():
    conjugated, odd = odd_part_cancellation(4.0, SMALL.with_k(0.0))
    assert np.allclose(conjugated.matrix, -odd.matrix, atol=1e-10)


@pytest.mark.parametrize("eta,psi", [(0.0, 0.0), (4.0, 0.0), (4.0, np.pi / 3.0)])
def test_first_order_magnus_term_vanishes(eta, psi):
    params = SMALL.with_dims(5, 4)
    average = magnus_first_order_numeric(eta, psi, params)
    assert np.max(np.abs(average.matrix)) < 1e-6 * max(1.0, eta ** 2)


@pytest.mark.parametrize("eta,psi", [(0.0, 0.0), (4.0, 0.0), (4.0, np.pi / 3.0)])
def test_second_order_magnus_term_matches_closed_form(eta, psi):
    params = SMALL.with_dims(6, 5)
    numeric = magnus_second_order_numeric(eta, psi, params)
    reference = magnus_second_order_closed_form(eta, psi, params)
    assert residual_modulo_identity(numeric, reference, params) < 1e-4
