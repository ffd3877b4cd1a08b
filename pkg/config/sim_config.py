#!/usr/bin/env python3
"""
Simulation Configuration
========================

Default parameters for the optomechanical state-preparation toolkit.
All rates are in units of the mechanical frequency (omega_m = 1), all
protocol horizons are counted in blocks of five mechanical periods.
"""

import os
from typing import Any, Dict


class SimulationConfig:
    """Simulation and optimization settings"""

    VERSION = "1.0.0"

    # Physical parameters
    OMEGA_M = 1.0
    OMEGA_C_RATIO = 20
    K = 1.0 / 26.0
    ETA_MAX = 4.0
    HORIZON_BLOCKS = 16

    # Truncations
    CAVITY_DIM = 60
    MECH_DIM = 15
    DISSIPATIVE_CAVITY_DIM = 20
    DISSIPATIVE_MECH_DIM = 10

    # Time stepping
    STEPS_PER_PERIOD = 400
    LINDBLAD_STEPS_PER_PERIOD = 200
    TROTTER_ORDER = 1
    INTEGRATOR = "midpoint"
    FRAME = "rotating"

    # Phase ledger: "even" gives the first driven period psi - phi = pi
    FIRST_PERIOD_PARITY = "even"

    # Optimizer
    RESTARTS = 20
    MAX_EVALUATIONS = 50000
    IMPROVEMENT_TOL = 1e-6
    # Restarts in a row that may improve the best objective by less than IMPROVEMENT_TOL
    RESTART_PATIENCE = 5
    SEED = 2024

    # Tolerances
    HERMITIAN_TOL = 1e-10
    LEAKAGE_THRESHOLD = 1e-6
    TRACE_DRIFT_LIMIT = 1e-4
    POSITIVITY_TOL = 1e-8

    # Execution and storage
    WORKERS = 1
    PULSE_DB_PATH = "data/pulse_library.db"
    OUTPUT_DIR = "results"
    CSV_SCHEMA_VERSION = "1"

    # Named parameter pairs (k, horizon) used by the noise sweeps
    PROTOCOL_CURVES = {
        "I": (1.0 / 26.0, 16),
        "II": (1.0 / 21.0, 10),
        "III": (1.0 / 16.0, 5),
    }

    @classmethod
    def get_curve(cls, label: str):
        """Get the (k, horizon) pair of a named protocol curve"""
        return cls.PROTOCOL_CURVES.get(label.upper())

    @classmethod
    def as_dict(cls) -> Dict[str, Any]:
        """All upper-case settings as a plain dictionary"""
        return {
            name: getattr(cls, name)
            for name in dir(cls)
            if name.isupper() and not callable(getattr(cls, name))
        }

    @classmethod
    def validate_config(cls):
        """Validate configuration"""
        positive_ints = [
            'CAVITY_DIM', 'MECH_DIM', 'DISSIPATIVE_CAVITY_DIM', 'DISSIPATIVE_MECH_DIM',
            'STEPS_PER_PERIOD', 'LINDBLAD_STEPS_PER_PERIOD', 'RESTARTS',
            'MAX_EVALUATIONS', 'WORKERS', 'HORIZON_BLOCKS'
        ]
        for field in positive_ints:
            value = getattr(cls, field, None)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"Invalid configuration: {field}={value!r} must be a positive integer")

        if cls.OMEGA_C_RATIO <= 0 or cls.OMEGA_C_RATIO % 2 != 0:
            raise ValueError(f"Invalid configuration: OMEGA_C_RATIO={cls.OMEGA_C_RATIO} must be an even positive integer")
        if not 0.0 < cls.K < 1.0:
            raise ValueError(f"Invalid configuration: K={cls.K} must lie in (0, 1)")
        if cls.ETA_MAX < 0.0:
            raise ValueError(f"Invalid configuration: ETA_MAX={cls.ETA_MAX} must be non-negative")
        if cls.STEPS_PER_PERIOD < 100:
            raise ValueError("Invalid configuration: STEPS_PER_PERIOD must be at least 100")
        if cls.FIRST_PERIOD_PARITY not in ("even", "odd"):
            raise ValueError(f"Invalid configuration: FIRST_PERIOD_PARITY={cls.FIRST_PERIOD_PARITY!r}")
        if cls.TROTTER_ORDER not in (1, 2):
            raise ValueError(f"Invalid configuration: TROTTER_ORDER={cls.TROTTER_ORDER}")

        return True


# Environment-based overrides
if os.getenv('OPTOMECH_K'):
    SimulationConfig.K = float(os.getenv('OPTOMECH_K'))

if os.getenv('OPTOMECH_ETA_MAX'):
    SimulationConfig.ETA_MAX = float(os.getenv('OPTOMECH_ETA_MAX'))

if os.getenv('OPTOMECH_CAVITY_DIM'):
    SimulationConfig.CAVITY_DIM = int(os.getenv('OPTOMECH_CAVITY_DIM'))

if os.getenv('OPTOMECH_MECH_DIM'):
    SimulationConfig.MECH_DIM = int(os.getenv('OPTOMECH_MECH_DIM'))

if os.getenv('OPTOMECH_WORKERS'):
    SimulationConfig.WORKERS = int(os.getenv('OPTOMECH_WORKERS'))

if os.getenv('OPTOMECH_RESTART_PATIENCE'):
    SimulationConfig.RESTART_PATIENCE = int(os.getenv('OPTOMECH_RESTART_PATIENCE'))

if os.getenv('OPTOMECH_PULSE_DB'):
    SimulationConfig.PULSE_DB_PATH = os.getenv('OPTOMECH_PULSE_DB')

if os.getenv('OPTOMECH_OUTPUT_DIR'):
    SimulationConfig.OUTPUT_DIR = os.getenv('OPTOMECH_OUTPUT_DIR')
