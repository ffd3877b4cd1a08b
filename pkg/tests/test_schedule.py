"""
Tests for the driving schedule: phase ledger, timeline, cancellation report,
phase-frame composition and the pattern codec
"""

import json

import numpy as np
import pytest
import scipy.linalg

from fock_algebra import CAVITY, FockSpace, Operator
from model import SystemParams, m2_cavity, magnus_second_order_closed_form
from schedule import (
    DRIVEN,
    FREE,
    build_pattern,
    compose_with_phase_frames,
    fit_number_generator,
    pattern_from_json,
    pattern_to_json,
    phase_schedule,
    validate_cancellation,
)
from sim_errors import ConstraintViolationError, ContractError, InvalidParameterError

K = 1.0 / 26.0
PARAMS = SystemParams(k=K, cavity_dim=6, mech_dim=4)


def test_phase_ramp_of_one_block():
    ledger = phase_schedule([4.0], K)
    ramp = (4.0 / 3.0) * np.pi * K ** 2
    assert ledger.n_periods == 4
    assert np.allclose(ledger.varphi, [0.0, 16 * ramp, 32 * ramp, 48 * ramp])
    assert np.allclose(np.array(ledger.psi) - np.array(ledger.varphi), [np.pi, 0.0, np.pi, 0.0])
    assert ledger.final_frame_phase == pytest.approx(64 * ramp)


def test_odd_parity_moves_the_pi_offset():
    ledger = phase_schedule([1.0, 2.0], K, parity="odd")
    offsets = np.array(ledger.psi) - np.array(ledger.varphi)
    assert np.allclose(offsets, [0.0, np.pi] * 4)


def test_phase_schedule_rejects_bad_input():
    with pytest.raises(InvalidParameterError):
        phase_schedule([1.0], K, parity="random")
    with pytest.raises(ConstraintViolationError):
        phase_schedule([-1.0], K)


def test_build_pattern_timeline():
    pattern = build_pattern([1.0, 3.0], PARAMS, 4.0)
    assert pattern.n_blocks == 2
    assert [s.kind for s in pattern.segments] == [DRIVEN, FREE, DRIVEN, FREE] * 2
    assert [s.duration for s in pattern.segments] == [2.0, 0.5, 2.0, 0.5] * 2
    assert pattern.duration == pytest.approx(10.0)
    starts = [s.t_start for s in pattern.segments]
    assert starts == [0.0, 2.0, 2.5, 4.5, 5.0, 7.0, 7.5, 9.5]
    assert pattern.period_amplitudes == (1.0,) * 4 + (3.0,) * 4
    assert [p.t_start for p in pattern.pulses[:4]] == [0.0, 1.0, 2.5, 3.5]


def test_build_pattern_bounds():
    with pytest.raises(InvalidParameterError):
        build_pattern([], PARAMS, 4.0)
    with pytest.raises(ConstraintViolationError):
        build_pattern([4.5], PARAMS, 4.0)
    with pytest.raises(ConstraintViolationError):
        build_pattern([np.nan], PARAMS, 4.0)


def test_cancellation_for_constant_amplitudes():
    pattern = build_pattern([4.0] * 16, PARAMS, 4.0)
    report = validate_cancellation(pattern)
    assert report.first_moment < 1e-12
    assert abs(abs(report.zeta_prime) - 16.0) < 1e-6
    assert report.chi == pytest.approx(16.0)
    assert report.n_periods == 64
    assert not report.degenerate


def test_cancellation_for_varying_amplitudes():
    report = validate_cancellation(build_pattern([0.5, 2.0, 3.7], PARAMS, 4.0))
    assert report.first_moment < 1e-12
    assert report.chi == pytest.approx((0.25 + 4.0 + 3.7 ** 2) * 4 / 12)


def test_zero_amplitudes_are_degenerate():
    report = validate_cancellation(build_pattern([0.0, 0.0], PARAMS, 4.0))
    assert report.degenerate
    assert report.notes


def test_phase_frame_composition_on_cavity_generator():
    params = PARAMS.with_dims(8, 1)
    pattern = build_pattern([4.0, 1.0, 2.5], params, 4.0)

    def generator(eta, psi):
        return m2_cavity(eta, psi, params) * (0.5 * params.k ** 2)

    framed, direct = compose_with_phase_frames(pattern, generator)
    assert np.max(np.abs(framed - direct)) < 1e-10


def test_phase_frame_composition_on_composite_generator():
    params = PARAMS.with_dims(4, 3)
    pattern = build_pattern([4.0, 2.0], params, 4.0, parity="odd")
    framed, direct = compose_with_phase_frames(
        pattern, lambda eta, psi: magnus_second_order_closed_form(eta, psi, params))
    assert np.max(np.abs(framed - direct)) < 1e-10


def test_fit_number_generator_recovers_quadratic():
    dim = 8
    n = np.arange(dim, dtype=float)
    diagonal = 0.01 - 0.03 * n + 0.002 * n ** 2
    time = 5.0
    u = Operator(FockSpace(dim, 1), CAVITY, np.diag(np.exp(-1j * time * diagonal)))
    c0, c1, c2 = fit_number_generator(u, time, levels=6)
    assert c0 == pytest.approx(0.01, abs=1e-10)
    assert c1 == pytest.approx(-0.03, abs=1e-10)
    assert c2 == pytest.approx(0.002, abs=1e-10)


def test_fit_number_generator_uses_reference_branch():
    dim = 6
    n = np.arange(dim, dtype=float)
    diagonal = -0.5 * n ** 2
    time = 4.0
    u = Operator(FockSpace(dim, 1), CAVITY, scipy.linalg.expm(-1j * time * np.diag(diagonal)))
    coefficients = fit_number_generator(u, time, levels=6, reference=diagonal + 0.01)
    assert coefficients[2] == pytest.approx(-0.5, abs=1e-9)
    assert coefficients[1] == pytest.approx(0.0, abs=1e-9)


def test_fit_number_generator_contract():
    with pytest.raises(InvalidParameterError):
        fit_number_generator(Operator(FockSpace(4, 1), CAVITY, np.eye(4)), 1.0, levels=2)


def test_pattern_codec():
    pattern = build_pattern([0.3, 3.9, 2.0], PARAMS, 4.0, parity="odd")
    restored = pattern_from_json(pattern_to_json(pattern))
    assert restored.block_amplitudes == pattern.block_amplitudes
    assert restored.ledger == pattern.ledger
    assert restored.params == pattern.params
    assert restored.parity == "odd"


def test_pattern_codec_rejects_tampering():
    data = json.loads(pattern_to_json(build_pattern([1.0], PARAMS, 4.0)))
    data["segments"][0]["psi"][0] += 0.1
    with pytest.raises(ContractError):
        pattern_from_json(json.dumps(data))

    data["schema"] = "something-else"
    with pytest.raises(ContractError):
        pattern_from_json(json.dumps(data))

    with pytest.raises(ContractError):
        pattern_from_json("not json")
