"""
Tests for the centralized defaults and where they are consumed
"""

import json

import numpy as np
import pytest

import fock_algebra
from cli import ExperimentConfig, _provenance
from config.sim_config import SimulationConfig
from fock_algebra import CAVITY, Operator, FockSpace
from model import SystemParams
from propagation import RESULT_SCHEMA
from sim_errors import NumericalContractError


def test_default_configuration_is_valid():
    assert SimulationConfig.validate_config() is True


def test_as_dict_lists_upper_case_settings():
    settings = SimulationConfig.as_dict()
    assert settings["OMEGA_M"] == SimulationConfig.OMEGA_M
    assert settings["PROTOCOL_CURVES"]["I"] == SimulationConfig.PROTOCOL_CURVES["I"]
    assert "validate_config" not in settings
    json.dumps(settings)


def test_provenance_carries_the_defaults():
    provenance = _provenance(ExperimentConfig())
    assert provenance["defaults"] == SimulationConfig.as_dict()
    assert provenance["code_version"] == SimulationConfig.VERSION


def test_system_params_take_physical_defaults():
    params = SystemParams()
    assert params.omega_m == SimulationConfig.OMEGA_M
    assert params.omega_c_ratio == SimulationConfig.OMEGA_C_RATIO
    assert (params.cavity_dim, params.mech_dim) == (SimulationConfig.CAVITY_DIM, SimulationConfig.MECH_DIM)


def test_result_schema_carries_csv_version():
    assert RESULT_SCHEMA == f"optomech-result/{SimulationConfig.CSV_SCHEMA_VERSION}"


def test_hermitian_tolerance_comes_from_config():
    assert fock_algebra.HERMITIAN_TOL == SimulationConfig.HERMITIAN_TOL
    skew = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    with pytest.raises(NumericalContractError):
        Operator(FockSpace(2, 1), CAVITY, skew, hermitian=True)


@pytest.mark.parametrize("name,value", [
    ("CAVITY_DIM", 0),
    ("OMEGA_C_RATIO", 21),
    ("K", 0.0),
    ("FIRST_PERIOD_PARITY", "middle"),
    ("TROTTER_ORDER", 3),
])
def test_validate_config_rejects_bad_settings(monkeypatch, name, value):
    monkeypatch.setattr(SimulationConfig, name, value)
    with pytest.raises(ValueError):
        SimulationConfig.validate_config()
