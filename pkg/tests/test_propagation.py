"""
Tests for exact, effective and dissipative propagation
"""

import json

import numpy as np
import pytest

from dissipation import optical_loss, zero_lindbladian
from fock_algebra import FockSpace, QuantumState, fidelity, fock_state, ground_state, product_state
from metrics import fidelity_fi
from model import HamiltonianTerms, SystemParams, block_effective_hamiltonian
from propagation import (
    RESULT_SCHEMA,
    PropagationConfig,
    block_propagator_error,
    block_unitary,
    propagate_effective,
    propagate_exact,
    propagate_lindblad,
    trotter_convergence,
)
from schedule import build_pattern
from sim_errors import ContractError, InvalidParameterError
from verification import scaling_slope

PARAMS = SystemParams(k=1.0 / 26.0, cavity_dim=8, mech_dim=4)
FAST = PropagationConfig(steps_per_period=200)


@pytest.fixture(scope="module")
def driven_run():
    pattern = build_pattern([0.5], PARAMS, 4.0)
    return pattern, propagate_exact(pattern, ground_state(PARAMS.space), FAST)


@pytest.mark.parametrize("kwargs", [
    {"steps_per_period": 50},
    {"frame": "interaction"},
    {"integrator": "rk4"},
    {"record_stride": 0.0},
    {"trotter_order": 3},
    {"effective_order": 4},
])
def test_config_validation(kwargs):
    with pytest.raises(InvalidParameterError):
        PropagationConfig(**kwargs)


def test_undriven_pattern_conserves_photon_number():
    pattern = build_pattern([0.0], PARAMS, 4.0)
    initial = product_state(fock_state(1, 8), fock_state(0, 4, "mech"))
    result = propagate_exact(pattern, initial, FAST)
    assert result.times == [0.0, 5.0]
    for populations in result.cavity_populations:
        assert populations[1] == pytest.approx(1.0, abs=1e-10)


def test_exact_run_preserves_norm(driven_run):
    _, result = driven_run
    assert result.kind == "exact"
    assert result.provenance["norm_deviation"] < 1e-8
    assert np.allclose(result.population_sums(), 1.0, atol=1e-8)


def test_exact_run_converges_in_step_size(driven_run):
    pattern, coarse = driven_run
    fine = propagate_exact(pattern, ground_state(PARAMS.space), PropagationConfig(steps_per_period=400))
    assert fidelity(coarse.final_state, fine.final_state.data) > 0.999


def test_frames_agree_at_block_boundaries(driven_run):
    pattern, rotating = driven_run
    displaced = propagate_exact(pattern, ground_state(PARAMS.space),
                                PropagationConfig(steps_per_period=200, frame="displaced"))
    assert fidelity(rotating.final_state, displaced.final_state.data) > 0.999

    lab = propagate_exact(pattern, ground_state(PARAMS.space),
                          PropagationConfig(steps_per_period=200, frame="lab"))
    assert lab.frame == "lab"
    assert np.allclose(lab.final_state.data, rotating.final_state.data, atol=1e-8)
    for lab_pops, rot_pops in zip(lab.cavity_populations, rotating.cavity_populations):
        assert np.allclose(lab_pops, rot_pops, atol=1e-10)


def test_fidelity_trace_follows_snapshots():
    pattern = build_pattern([0.3, 0.6], PARAMS, 4.0)
    target = np.zeros(8, dtype=complex)
    target[0] = 1.0
    result = propagate_exact(pattern, ground_state(PARAMS.space), FAST, target=target)
    assert result.times == [0.0, 5.0, 10.0]
    assert len(result.fidelity_trace) == 3
    assert result.fidelity_trace[0] == pytest.approx(1.0)


def test_exact_needs_composite_state():
    pattern = build_pattern([0.5], PARAMS, 4.0)
    with pytest.raises(ContractError):
        propagate_exact(pattern, fock_state(0, 8), FAST)


def test_order2_effective_is_product_of_block_unitaries():
    amplitudes = [4.0, 2.0, 4.0]
    initial = fock_state(0, PARAMS.cavity_dim)
    result = propagate_effective(amplitudes, PARAMS, initial, order=2)
    state = initial.data
    for eta in amplitudes:
        state = block_unitary(block_effective_hamiltonian(eta, PARAMS, 2)) @ state
    assert np.allclose(result.final_state.data, state, atol=1e-12)
    assert result.times == [0.0, 5.0, 10.0, 15.0]
    assert result.final_frame_phase == 0.0


def test_effective_initial_state_contract():
    composite = ground_state(PARAMS.space)
    with pytest.raises(ContractError):
        propagate_effective([1.0], PARAMS, composite, order=2)
    with pytest.raises(InvalidParameterError):
        propagate_effective([1.0], PARAMS, composite, order=4)
    promoted = propagate_effective([1.0], PARAMS, fock_state(0, PARAMS.cavity_dim), order=3)
    assert promoted.final_state.kind == "composite"
    assert promoted.final_state.dim == PARAMS.space.composite_dim


def test_lindblad_without_dissipation_matches_effective_evolution():
    params = PARAMS.with_dims(5, 4)
    amplitudes = [4.0, 3.0]
    pattern = build_pattern(amplitudes, params, 4.0)
    initial = ground_state(params.space)
    config = PropagationConfig(lindblad_steps_per_period=50)

    closed = propagate_lindblad(pattern, initial, zero_lindbladian(params.space), config)
    effective = propagate_effective(amplitudes, params, initial, order=3)
    assert closed.final_frame_phase == 0.0
    assert np.allclose(closed.final_state.data, effective.final_state.density_matrix(), atol=1e-8)
    assert closed.provenance["max_trace_drift"] < 1e-10


def test_lindblad_loss_drains_photons():
    params = PARAMS.with_dims(4, 2)
    pattern = build_pattern([0.0], params, 4.0)
    initial = product_state(fock_state(1, 4), fock_state(0, 2, "mech"))
    config = PropagationConfig(lindblad_steps_per_period=50)
    result = propagate_lindblad(pattern, initial, optical_loss(0.01, params.space), config)
    expected = np.exp(-0.01 * 5.0 * params.period)
    assert result.cavity_populations[-1][1] == pytest.approx(expected, rel=1e-6)


def test_lindbladian_must_share_the_space():
    pattern = build_pattern([1.0], PARAMS, 4.0)
    with pytest.raises(ContractError):
        propagate_lindblad(pattern, ground_state(PARAMS.space), zero_lindbladian(FockSpace(4, 4)))


def test_result_files(tmp_path, driven_run):
    _, result = driven_run
    csv_path, json_path = result.write(str(tmp_path), "run", extra={"note": "unit"})
    with open(csv_path) as handle:
        lines = handle.read().splitlines()
    assert lines[0] == f"# schema: {RESULT_SCHEMA} kind=exact frame=rotating"
    assert lines[1].split(",")[0] == "time_T"
    assert len(lines) == 2 + len(result.times)

    first = open(json_path).read()
    result.to_json(json_path, extra={"note": "unit"})
    assert open(json_path).read() == first
    data = json.loads(first)
    assert data["schema"] == RESULT_SCHEMA
    assert data["note"] == "unit"
    assert "created_at" not in data


def test_final_cavity_state_of_pure_cavity_result():
    result = propagate_effective([0.0], PARAMS, fock_state(2, PARAMS.cavity_dim), order=2)
    rho = result.final_cavity_state()
    assert isinstance(rho, QuantumState)
    assert rho.density_matrix()[2, 2].real == pytest.approx(1.0)


@pytest.mark.slow
def test_block_error_shrinks_with_coupling():
    params = SystemParams(cavity_dim=10, mech_dim=8)
    config = PropagationConfig(steps_per_period=400, frame="displaced")
    errors = [block_propagator_error(4.0, params.with_k(k), order=3, config=config)
              for k in (1.0 / 13.0, 1.0 / 26.0)]
    assert errors[1] < errors[0]


@pytest.mark.slow
def test_block_error_scales_as_fourth_power_of_coupling():
    config = PropagationConfig(steps_per_period=400, frame="displaced")
    slope, _ = scaling_slope(SystemParams(), config=config)
    assert 3.5 <= slope <= 4.5


def test_displaced_snapshots_are_labelled(tmp_path):
    pattern = build_pattern([0.5], PARAMS, 4.0)
    config = PropagationConfig(steps_per_period=200, frame="displaced", record_stride=0.125)
    result = propagate_exact(pattern, ground_state(PARAMS.space), config)
    frames = dict(zip(result.times, result.frames()))
    assert frames[0.125] == "displaced"
    assert frames[0.5] == "rotating"
    assert frames[5.0] == "rotating"

    csv_path, json_path = result.write(str(tmp_path), "displaced")
    lines = open(csv_path).read().splitlines()
    assert lines[1].split(",")[-1] == "frame"
    assert lines[2].split(",")[-1] == "rotating"
    assert json.loads(open(json_path).read())["snapshot_frames"] == result.frames()


def test_rotating_run_has_uniform_frames(driven_run):
    _, result = driven_run
    assert result.frames() == ["rotating"] * len(result.times)


def test_undriven_evolution_conserves_energy():
    rng = np.random.default_rng(11)
    psi = rng.normal(size=PARAMS.space.composite_dim) + 1j * rng.normal(size=PARAMS.space.composite_dim)
    psi[[i * PARAMS.mech_dim + j for i in range(6, 8) for j in range(4)]] = 0.0
    initial = QuantumState(PARAMS.space, "composite", psi / np.linalg.norm(psi))
    pattern = build_pattern([0.0, 0.0], PARAMS, 4.0)
    result = propagate_exact(pattern, initial, FAST)

    h = HamiltonianTerms(PARAMS, "rotating").static
    before = np.vdot(initial.data, h @ initial.data).real
    after = np.vdot(result.final_state.data, h @ result.final_state.data).real
    assert after == pytest.approx(before, abs=1e-8)


@pytest.mark.slow
def test_perturbative_propagation_approaches_exact_as_coupling_shrinks():
    amplitudes = [4.0, 3.0, 4.0]
    infidelities = []
    for k in (1.0 / 13.0, 1.0 / 26.0):
        params = SystemParams(k=k, cavity_dim=14, mech_dim=8)
        exact = propagate_exact(build_pattern(amplitudes, params, 4.0), ground_state(params.space),
                                PropagationConfig(frame="displaced"))
        cavity = fock_state(0, params.cavity_dim)
        effective = propagate_effective(amplitudes, params, cavity, order=2)
        infidelities.append(1.0 - fidelity_fi(exact, effective))
    assert infidelities[1] < infidelities[0]


def test_trotter_error_shrinks_as_the_step_halves():
    params = PARAMS.with_dims(5, 3)
    pattern = build_pattern([4.0, 3.0], params, 4.0)
    rows = trotter_convergence(pattern, ground_state(params.space), optical_loss(0.05, params.space),
                               PropagationConfig(lindblad_steps_per_period=10), halvings=2,
                               target=fock_state(2, 5).data)
    assert [row["steps_per_period"] for row in rows] == [10, 20, 40]
    assert rows[1]["dt"] == pytest.approx(rows[0]["dt"] / 2.0)
    assert rows[0]["trace_distance"] is None and rows[0]["fidelity_change"] is None
    assert 0.0 < rows[2]["trace_distance"] < rows[1]["trace_distance"]
    assert all(0.0 <= row["fidelity_l"] <= 1.0 for row in rows)


def test_trotter_convergence_needs_a_halving():
    params = PARAMS.with_dims(4, 2)
    pattern = build_pattern([1.0], params, 4.0)
    with pytest.raises(InvalidParameterError):
        trotter_convergence(pattern, ground_state(params.space), zero_lindbladian(params.space), halvings=0)


@pytest.mark.slow
def test_default_lindblad_resolution_is_converged():
    params = PARAMS.with_dims(10, 4)
    pattern = build_pattern([4.0, 3.0, 4.0, 2.0, 4.0, 3.0], params, 4.0)
    rows = trotter_convergence(pattern, ground_state(params.space), optical_loss(1e-3, params.space),
                               PropagationConfig(), halvings=1, target=fock_state(2, 10).data)
    assert rows[1]["fidelity_change"] < 1e-4
