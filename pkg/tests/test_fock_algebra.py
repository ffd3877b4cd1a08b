"""
Tests for the truncated Fock-space algebra
"""

import numpy as np
import pytest
import scipy.linalg

from fock_algebra import (
    CAVITY,
    COMPOSITE,
    MECH,
    FockSpace,
    Operator,
    QuantumState,
    annihilation,
    commutator,
    creation,
    embed_cavity,
    embed_mech,
    expm_apply,
    fidelity,
    fock_state,
    function_of_number,
    leakage_populations,
    number,
    partial_trace_cavity,
    partial_trace_mech,
    product_state,
    promote,
    tensor,
    thermal_populations,
    thermal_state,
    unitary,
)
from sim_errors import InvalidDimensionError, NumericalContractError, SpaceMismatchError


def test_annihilation_entries():
    a = annihilation(5).matrix
    for n in range(1, 5):
        assert a[n - 1, n] == pytest.approx(np.sqrt(n))
    assert np.count_nonzero(a) == 4


def test_canonical_commutator_holds_below_truncation():
    dim = 6
    c = commutator(annihilation(dim), creation(dim)).matrix
    assert np.allclose(np.diag(c)[:-1], 1.0)
    assert np.diag(c)[-1] == pytest.approx(-(dim - 1))


def test_number_operator_is_hermitian_diagonal():
    n = number(4, MECH)
    assert n.kind == MECH
    assert n.is_hermitian()
    assert np.allclose(np.diag(n.matrix), [0, 1, 2, 3])


def test_invalid_dimensions():
    with pytest.raises(InvalidDimensionError):
        FockSpace(0, 3)
    with pytest.raises(ValueError):
        annihilation(0)


def test_hermitian_flag_is_checked():
    a = annihilation(3)
    with pytest.raises(NumericalContractError):
        Operator(a.space, CAVITY, a.matrix, hermitian=True)


def test_mixing_spaces_fails():
    with pytest.raises(SpaceMismatchError):
        annihilation(3, CAVITY) + annihilation(3, MECH)
    with pytest.raises(SpaceMismatchError):
        annihilation(3) @ annihilation(4)


def test_tensor_uses_kron_ordering():
    state = product_state(fock_state(1, 3, CAVITY), fock_state(2, 4, MECH))
    assert state.kind == COMPOSITE
    assert state.data[1 * 4 + 2] == pytest.approx(1.0)


def test_embedding_matches_tensor_with_identity():
    a = annihilation(3)
    b = annihilation(4, MECH)
    assert np.allclose(embed_cavity(a, 4).matrix, np.kron(a.matrix, np.eye(4)))
    assert np.allclose(embed_mech(b, 3).matrix, np.kron(np.eye(3), b.matrix))
    assert np.allclose(promote(b, FockSpace(3, 4)).matrix, embed_mech(b, 3).matrix)
    with pytest.raises(SpaceMismatchError):
        tensor(b, a)


def test_expm_apply_matches_dense_exponential():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = 0.5 * (x + x.conj().T)
    v = rng.normal(size=6) + 1j * rng.normal(size=6)
    expected = scipy.linalg.expm(-1j * 0.7 * h) @ v
    assert np.allclose(expm_apply(h, v, 0.7), expected, atol=1e-10)


def test_expm_apply_rejects_non_hermitian_generator():
    with pytest.raises(NumericalContractError):
        expm_apply(annihilation(4), np.ones(4), 1.0)


def test_unitary_of_number_operator():
    u = unitary(number(4), 0.3).matrix
    assert np.allclose(u, np.diag(np.exp(-0.3j * np.arange(4))))


def test_function_of_number_is_diagonal():
    op = function_of_number(np.exp(1j * np.arange(3)))
    assert op.kind == CAVITY
    assert np.allclose(op.matrix, np.diag(np.exp(1j * np.arange(3))))


def test_thermal_populations():
    populations, deficit = thermal_populations(0.0, 4)
    assert np.allclose(populations, [1, 0, 0, 0])
    assert deficit == 0.0

    populations, deficit = thermal_populations(1.0, 3)
    assert np.allclose(populations, np.array([1.0, 0.5, 0.25]) / 1.75)
    assert deficit == pytest.approx(0.125)


def test_thermal_state_is_normalized():
    rho = thermal_state(0.5, 12)
    assert rho.kind == MECH
    assert np.trace(rho.data).real == pytest.approx(1.0)


def test_partial_traces_recover_factors():
    cavity = fock_state(2, 3, CAVITY)
    mech = thermal_state(0.3, 4)
    state = product_state(cavity, mech)
    assert np.allclose(partial_trace_mech(state).data, cavity.density_matrix())
    assert np.allclose(partial_trace_cavity(state).data, mech.data)


def test_partial_trace_of_entangled_pure_state():
    space = FockSpace(2, 2)
    bell = np.zeros(4, dtype=complex)
    bell[0] = bell[3] = 1.0 / np.sqrt(2.0)
    reduced = partial_trace_mech(QuantumState(space, COMPOSITE, bell))
    assert np.allclose(reduced.data, 0.5 * np.eye(2))


def test_fidelity_values():
    zero = fock_state(0, 3)
    one = fock_state(1, 3)
    assert fidelity(zero, zero) == pytest.approx(1.0)
    assert fidelity(zero, one) == pytest.approx(0.0)

    mixed = QuantumState(FockSpace(3, 1), CAVITY, np.diag([0.25, 0.75, 0.0]))
    assert fidelity(mixed, one.data) == pytest.approx(np.sqrt(0.75))
    assert fidelity(mixed, mixed) == pytest.approx(1.0)


def test_fidelity_dimension_mismatch():
    with pytest.raises(SpaceMismatchError):
        fidelity(fock_state(0, 3), fock_state(0, 4))


def test_fidelity_against_coherent_mixed_state():
    rho = np.array([[0.5, 0.3, 0.0], [0.3, 0.5, 0.0], [0.0, 0.0, 0.0]], dtype=complex)
    mixed = QuantumState(FockSpace(3, 1), CAVITY, rho)
    plus = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
    assert fidelity(mixed, plus) == pytest.approx(np.sqrt(0.8))
    assert fidelity(QuantumState(FockSpace(3, 1), CAVITY, plus), mixed) == pytest.approx(np.sqrt(0.8))


def test_fidelity_rejects_non_positive_density_matrix():
    bad = QuantumState(FockSpace(2, 1), CAVITY, np.diag([1.2, -0.2]).astype(complex), validate=False)
    with pytest.raises(NumericalContractError):
        fidelity(bad, np.array([1.0, 0.0]))
    with pytest.raises(NumericalContractError):
        fidelity(QuantumState(FockSpace(2, 1), CAVITY, np.diag([0.5, 0.5])), bad)


def test_state_normalization_is_validated():
    with pytest.raises(NumericalContractError):
        QuantumState(FockSpace(2, 1), CAVITY, np.array([1.0, 1.0]))


def test_leakage_populations_report_top_levels():
    space = FockSpace(4, 3)
    data = np.zeros(12, dtype=complex)
    data[3 * 3 + 0] = 1.0
    cavity_top, mech_top = leakage_populations(QuantumState(space, COMPOSITE, data))
    assert cavity_top == pytest.approx(1.0)
    assert mech_top == pytest.approx(0.0)
