#!/usr/bin/env python3
"""
Optomechanical Model
====================

Hamiltonians and closed-form operators of the driven optomechanical system:

    H = omega_c n_c + omega_m n_m - g0 n_c (b + b^dag) + d(t) a^dag + d^*(t) a
    d(t) = 2 i E exp(-i (omega_c t - psi)) cos(2 omega_m t)

together with the Magnus terms of one driven period, the effective generators
of a protocol block and the half-period free propagator. All rates are in
units of omega_m; E = eta * omega_m and g0 = k * omega_m.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.integrate import cumulative_simpson, simpson

from config.sim_config import SimulationConfig
from fock_algebra import (
    CAVITY,
    COMPOSITE,
    MECH,
    FockSpace,
    Operator,
    embed_cavity,
    embed_mech,
    function_of_number,
    identity,
    tensor,
)
from sim_errors import InvalidParameterError

logger = logging.getLogger(__name__)

FRAMES = ("rotating", "lab", "displaced")

# Coefficient of the cubic phonon term of the third-order Magnus operator
Y_COEFFICIENT = 16.0 * np.sqrt(6.0) / 27.0
CUBIC_ANGLE = 5.0 * np.pi / 12.0


@dataclass(frozen=True)
class SystemParams:
    """Physical constants and truncations (omega_m is the unit of all rates)"""

    k: float = SimulationConfig.K
    omega_m: float = SimulationConfig.OMEGA_M
    omega_c_ratio: int = SimulationConfig.OMEGA_C_RATIO
    cavity_dim: int = SimulationConfig.CAVITY_DIM
    mech_dim: int = SimulationConfig.MECH_DIM

    def __post_init__(self):
        if not 0.0 <= self.k < 1.0:
            raise InvalidParameterError(f"k={self.k} must lie in [0, 1)")
        if self.omega_m <= 0.0:
            raise InvalidParameterError(f"omega_m={self.omega_m} must be positive")
        if int(self.omega_c_ratio) != self.omega_c_ratio or self.omega_c_ratio <= 0:
            raise InvalidParameterError(f"omega_c_ratio={self.omega_c_ratio} must be a positive integer")
        FockSpace(self.cavity_dim, self.mech_dim)

    @property
    def g0(self) -> float:
        return self.k * self.omega_m

    @property
    def omega_c(self) -> float:
        return self.omega_c_ratio * self.omega_m

    @property
    def period(self) -> float:
        """Mechanical period T"""
        return 2.0 * np.pi / self.omega_m

    @property
    def block_duration(self) -> float:
        """Protocol block of five mechanical periods"""
        return 5.0 * self.period

    @property
    def space(self) -> FockSpace:
        return FockSpace(self.cavity_dim, self.mech_dim)

    @property
    def has_even_ratio(self) -> bool:
        return self.omega_c_ratio % 2 == 0

    def with_k(self, k: float) -> "SystemParams":
        return SystemParams(k, self.omega_m, self.omega_c_ratio, self.cavity_dim, self.mech_dim)

    def with_dims(self, cavity_dim: int, mech_dim: int) -> "SystemParams":
        return SystemParams(self.k, self.omega_m, self.omega_c_ratio, cavity_dim, mech_dim)

    def to_dict(self) -> Dict[str, float]:
        return {
            "k": self.k,
            "omega_m": self.omega_m,
            "omega_c_ratio": self.omega_c_ratio,
            "cavity_dim": self.cavity_dim,
            "mech_dim": self.mech_dim,
        }


@dataclass(frozen=True)
class DrivePulse:
    """Constant-amplitude driving window; t_start and duration in units of T"""

    eta: float
    psi: float
    t_start: float
    duration: float

    def __post_init__(self):
        if self.eta < 0.0:
            raise InvalidParameterError(f"eta={self.eta} must be non-negative")
        if self.duration <= 0.0:
            raise InvalidParameterError(f"duration={self.duration} must be positive")

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    def contains(self, t: float, period: float) -> bool:
        """Half-open window test for a physical time t"""
        return self.t_start * period <= t < self.t_end * period


# Single-mode building blocks ---------------------------------------------------

@lru_cache(maxsize=None)
def _ladder(dim: int) -> np.ndarray:
    matrix = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    matrix.flags.writeable = False
    return matrix


def _cavity(matrix: np.ndarray, dim: int) -> Operator:
    return Operator(FockSpace(dim, 1), CAVITY, matrix)


def _mech(matrix: np.ndarray, dim: int) -> Operator:
    return Operator(FockSpace(1, dim), MECH, matrix)


def _number_matrix(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def phase_rotation(psi: float, dim: int) -> Operator:
    """V_psi = exp(i psi n_c)"""
    return function_of_number(np.exp(1j * psi * np.arange(dim)), CAVITY)


def cavity_momentum(psi: float, dim: int) -> Operator:
    """Phase-shifted momentum P_psi = (i/sqrt2)(a e^{-i psi} - a^dag e^{i psi})"""
    a = _ladder(dim)
    return _cavity((1j / np.sqrt(2.0)) * (a * np.exp(-1j * psi) - a.conj().T * np.exp(1j * psi)), dim)


def cavity_quadrature(psi: float, dim: int) -> Operator:
    """X_psi = (a e^{-i psi} + a^dag e^{i psi}) / sqrt2"""
    a = _ladder(dim)
    return _cavity((a * np.exp(-1j * psi) + a.conj().T * np.exp(1j * psi)) / np.sqrt(2.0), dim)


def mech_position(dim: int) -> Operator:
    """X_m = (b + b^dag) / sqrt2"""
    b = _ladder(dim)
    return _mech((b + b.conj().T) / np.sqrt(2.0), dim)


def mech_momentum(dim: int) -> Operator:
    """P_m = (i/sqrt2)(b - b^dag)"""
    b = _ladder(dim)
    return _mech((1j / np.sqrt(2.0)) * (b - b.conj().T), dim)


def _pair_operator(dim: int) -> np.ndarray:
    a = _ladder(dim)
    return a @ a


# Drive --------------------------------------------------------------------

def _active_pulse(pulses: Sequence[DrivePulse], t: float, period: float) -> Optional[DrivePulse]:
    for pulse in pulses:
        if pulse.contains(t, period):
            return pulse
    return None


def drive_value(pulse: DrivePulse, t: float, frame: str = "rotating",
                params: Optional[SystemParams] = None) -> complex:
    """
    Drive d(t) of one window at physical time t

    Args:
        pulse: driving window
        t: physical time (units of 1/omega_m)
        frame: "lab" returns d(t); "rotating" returns exp(i omega_c t) d(t)

    Returns:
        complex drive amplitude, zero outside the window
    """
    params = params or SystemParams()
    if not pulse.contains(t, params.period):
        return 0.0j
    rotating = 2j * pulse.eta * params.omega_m * np.exp(1j * pulse.psi) * np.cos(2.0 * params.omega_m * t)
    if frame == "lab":
        return complex(np.exp(-1j * params.omega_c * t) * rotating)
    if frame in ("rotating", "displaced"):
        return complex(rotating)
    raise InvalidParameterError(f"Unknown frame {frame!r}; expected one of {FRAMES}")


def displacement_f(pulses: Sequence[DrivePulse], t: float, params: Optional[SystemParams] = None) -> complex:
    """f(t) = integral_0^t exp(i omega_c tau) d(tau) dtau, closed form per window"""
    params = params or SystemParams()
    if t <= 0.0:
        return 0.0j
    two_w = 2.0 * params.omega_m
    total = 0.0j
    for pulse in pulses:
        lo = pulse.t_start * params.period
        hi = min(pulse.t_end * params.period, t)
        if hi <= lo:
            continue
        total += 1j * pulse.eta * np.exp(1j * pulse.psi) * (np.sin(two_w * hi) - np.sin(two_w * lo))
    return complex(total)


def frame_displacement(pulses: Sequence[DrivePulse], t: float, params: Optional[SystemParams] = None) -> complex:
    """Coherent amplitude alpha(t) = -i f(t) carried by the cavity in the rotating frame"""
    return -1j * displacement_f(pulses, t, params)


# Full Hamiltonian -------------------------------------------------------------

class HamiltonianTerms:
    """
    Sparse pieces of the composite Hamiltonian, assembled once per
    (params, frame) and combined per time step
    """

    def __init__(self, params: SystemParams, frame: str = "rotating"):
        if frame not in FRAMES:
            raise InvalidParameterError(f"Unknown frame {frame!r}; expected one of {FRAMES}")
        self.params = params
        self.frame = frame
        dc, dm = params.cavity_dim, params.mech_dim

        a = scipy.sparse.csr_matrix(_ladder(dc))
        b = scipy.sparse.csr_matrix(_ladder(dm))
        ic = scipy.sparse.identity(dc, dtype=complex, format="csr")
        im = scipy.sparse.identity(dm, dtype=complex, format="csr")
        n_c = scipy.sparse.csr_matrix(_number_matrix(dc))
        n_m = scipy.sparse.csr_matrix(_number_matrix(dm))
        x_b = b + b.conj().T

        self.static = (params.omega_m * scipy.sparse.kron(ic, n_m)
                       - params.g0 * scipy.sparse.kron(n_c, x_b)).tocsr()
        if frame == "lab":
            self.static = (self.static + params.omega_c * scipy.sparse.kron(n_c, im)).tocsr()
        self.raise_c = scipy.sparse.kron(a.conj().T, im).tocsr()
        self.raise_c_dag = self.raise_c.conj().T.tocsr()
        self.raise_c_x = scipy.sparse.kron(a.conj().T, x_b).tocsr()
        self.raise_c_x_dag = self.raise_c_x.conj().T.tocsr()
        self.x_b = scipy.sparse.kron(ic, x_b).tocsr()

    def at(self, pulses: Sequence[DrivePulse], t: float, pulse: Optional[DrivePulse] = None) -> scipy.sparse.csr_matrix:
        """Hamiltonian matrix at physical time t"""
        period = self.params.period
        if pulse is None or not pulse.contains(t, period):
            pulse = _active_pulse(pulses, t, period)
        if pulse is None or pulse.eta == 0.0:
            return self.static
        if self.frame == "displaced":
            alpha = frame_displacement(pulses, t, self.params)
            g0 = self.params.g0
            return self.static - g0 * (alpha * self.raise_c_x + np.conj(alpha) * self.raise_c_x_dag
                                       + abs(alpha) ** 2 * self.x_b)
        drive = drive_value(pulse, t, "lab" if self.frame == "lab" else "rotating", self.params)
        return self.static + drive * self.raise_c + np.conj(drive) * self.raise_c_dag


def hamiltonian_lab(params: SystemParams, pulses: Sequence[DrivePulse], t: float,
                    frame: str = "rotating") -> Operator:
    """Composite Hamiltonian at time t in the lab, cavity-rotating or displaced frame"""
    matrix = HamiltonianTerms(params, frame).at(pulses, t)
    return Operator(params.space, COMPOSITE, matrix.toarray())


# Second-order Magnus terms ---------------------------------------------------

def m2_cavity(eta: float, psi: float, params: Optional[SystemParams] = None) -> Operator:
    """M2^C = -2 n_c^2 - (4 eta^2 / 3) n_c + (eta^2 / 3)(a^2 e^{-2i psi} + h.c.)"""
    dim = (params or SystemParams()).cavity_dim
    n = _number_matrix(dim)
    pair = _pair_operator(dim) * np.exp(-2j * psi)
    matrix = -2.0 * n @ n - (4.0 * eta ** 2 / 3.0) * n + (eta ** 2 / 3.0) * (pair + pair.conj().T)
    return _cavity(matrix, dim).as_hermitian()


def m2_interaction(eta: float, psi: float, params: Optional[SystemParams] = None) -> Operator:
    """M2^I = -sqrt2 eta P_psi (b^2 + b^dag^2)"""
    params = params or SystemParams()
    b2 = _pair_operator(params.mech_dim)
    squeeze = _mech(b2 + b2.conj().T, params.mech_dim)
    return (tensor(cavity_momentum(psi, params.cavity_dim), squeeze) * (-np.sqrt(2.0) * eta)).as_hermitian()


# Third-order Magnus terms ------------------------------------------------------

def _cubic(dim: int, cos_sign: float, sin_sign: float) -> np.ndarray:
    b = _ladder(dim)
    c = cos_sign * np.cos(CUBIC_ANGLE) * b.conj().T + sin_sign * np.sin(CUBIC_ANGLE) * b
    return c @ c @ c


def m3_mech(eta: float, params: Optional[SystemParams] = None) -> Operator:
    """M3^M = y eta^2 (b^dag cos(5pi/12) + b sin(5pi/12))^3 + h.c."""
    dim = (params or SystemParams()).mech_dim
    cube = Y_COEFFICIENT * eta ** 2 * _cubic(dim, 1.0, 1.0)
    return _mech(cube + cube.conj().T, dim).as_hermitian()


def a_coefficient(eta: float, psi: float, dim: int) -> Operator:
    """A_psi = (sqrt2/15)(36 eta^3 P_psi + 35 eta (n_c P_psi + P_psi n_c))"""
    p = cavity_momentum(psi, dim).matrix
    n = _number_matrix(dim)
    return _cavity((np.sqrt(2.0) / 15.0) * (36.0 * eta ** 3 * p + 35.0 * eta * (n @ p + p @ n)), dim)


def b_coefficient(eta: float, psi: float, dim: int) -> Operator:
    """B_psi = 2 sqrt2 i eta^2 (a^dag^2 e^{2i psi} - a^2 e^{-2i psi})"""
    a2 = _pair_operator(dim)
    return _cavity(2.0 * np.sqrt(2.0) * 1j * eta ** 2
                   * (a2.conj().T * np.exp(2j * psi) - a2 * np.exp(-2j * psi)), dim)


def g_coefficient(eta: float, dim: int) -> Operator:
    """G_m = (3 y i / 4) eta (b^dag cos(5pi/12) - b sin(5pi/12))^3 + h.c."""
    cube = (3.0 * Y_COEFFICIENT * 1j / 4.0) * eta * _cubic(dim, 1.0, -1.0)
    return _mech(cube + cube.conj().T, dim)


def m3_interaction(eta: float, psi: float, params: Optional[SystemParams] = None) -> Operator:
    """M3^I = A_psi X_m + B_psi P_m + X_psi G_m"""
    params = params or SystemParams()
    dc, dm = params.cavity_dim, params.mech_dim
    total = (tensor(a_coefficient(eta, psi, dc), mech_position(dm))
             + tensor(b_coefficient(eta, psi, dc), mech_momentum(dm))
             + tensor(cavity_quadrature(psi, dc), g_coefficient(eta, dm)))
    return total.as_hermitian()


# Effective generators -----------------------------------------------------------

@dataclass(frozen=True)
class EffectiveBlock:
    """
    Effective Hamiltonian of one protocol block. The block propagator is
    exp(-i hamiltonian generator_time) while the block lasts physical_duration.
    """

    eta: float
    order: int
    hamiltonian: Operator
    generator_time: float
    physical_duration: float

    def real_time_hamiltonian(self) -> Operator:
        """Generator whose action over physical_duration reproduces the block"""
        return self.hamiltonian * (self.generator_time / self.physical_duration)


def h2_operator(eta: float, dim: int) -> Operator:
    """H^(2) = (2/3) eta^2 (a^2 + a^dag^2) - 5 n_c^2"""
    n = _number_matrix(dim)
    a2 = _pair_operator(dim)
    return _cavity((2.0 / 3.0) * eta ** 2 * (a2 + a2.conj().T) - 5.0 * n @ n, dim).as_hermitian()


def h3_operator(eta: float, params: SystemParams) -> Operator:
    """H^(3) = (2/3) eta^2 (a^dag^2 - a^2)(b - b^dag)"""
    a2 = _pair_operator(params.cavity_dim)
    b = _ladder(params.mech_dim)
    cavity_part = _cavity((2.0 / 3.0) * eta ** 2 * (a2.conj().T - a2), params.cavity_dim)
    return tensor(cavity_part, _mech(b - b.conj().T, params.mech_dim)).as_hermitian()


def block_effective_hamiltonian(eta: float, params: SystemParams, order: int = 2) -> EffectiveBlock:
    """
    Effective Hamiltonian omega_m (k^2 H^(2) + k^3 H^(3)) of one block

    Args:
        eta: block driving amplitude
        params: system parameters
        order: 2 for the cavity-only generator, 3 for the composite one

    Returns:
        EffectiveBlock with generator time T and physical duration 5T
    """
    if order not in (2, 3):
        raise InvalidParameterError(f"order={order} must be 2 or 3")
    scale2 = params.omega_m * params.k ** 2
    h2 = h2_operator(eta, params.cavity_dim) * scale2
    if order == 2:
        hamiltonian = h2.as_hermitian()
    else:
        h3 = h3_operator(eta, params) * (params.omega_m * params.k ** 3)
        hamiltonian = (embed_cavity(h2, params.mech_dim) + h3).as_hermitian()
    return EffectiveBlock(eta, order, hamiltonian, params.period, params.block_duration)


def second_order_block_hg(etas: Sequence[float], params: SystemParams) -> Operator:
    """
    H_g = omega_m k^2 sum_j ((2/3) eta_j^2 (a^2 + a^dag^2) - 4 n_c^2), one term per 2T
    driven window without free intervals; a window evolves as exp(-i H_g T / 2)
    """
    if len(etas) == 0:
        raise InvalidParameterError("second_order_block_hg needs at least one amplitude")
    dim = params.cavity_dim
    n = _number_matrix(dim)
    a2 = _pair_operator(dim)
    matrix = np.zeros((dim, dim), dtype=complex)
    for eta in etas:
        matrix += (2.0 / 3.0) * eta ** 2 * (a2 + a2.conj().T) - 4.0 * n @ n
    return _cavity(params.omega_m * params.k ** 2 * matrix, dim).as_hermitian()


def odd_third_order_part(eta: float, params: SystemParams) -> Operator:
    """M3^M + B_0 P_m, the part of the third-order generator odd in b and b^dag"""
    dc, dm = params.cavity_dim, params.mech_dim
    return (embed_mech(m3_mech(eta, params), dc)
            + tensor(b_coefficient(eta, 0.0, dc), mech_momentum(dm))).as_hermitian()


def third_order_pair_hamiltonian(eta: float, params: SystemParams) -> Operator:
    """H_p = H_g + omega_m k^3 (M3^M + B_0 P_m) for one constant-amplitude 2T window"""
    hg = embed_cavity(second_order_block_hg([eta], params), params.mech_dim)
    return (hg + odd_third_order_part(eta, params) * (params.omega_m * params.k ** 3)).as_hermitian()


def half_period_propagator(params: SystemParams) -> Operator:
    """
    Undriven propagator over T/2,
    exp(i pi k^2 n_c^2) exp(-i pi n_m) exp(-2 sqrt2 i k n_c P_m)
    """
    if not params.has_even_ratio:
        raise InvalidParameterError(
            f"omega_c_ratio={params.omega_c_ratio} must be even for the half-period propagator"
        )
    dc, dm = params.cavity_dim, params.mech_dim
    n_c = np.arange(dc, dtype=float)
    kerr = np.diag(np.exp(1j * np.pi * params.k ** 2 * n_c ** 2))
    parity = np.diag(np.exp(-1j * np.pi * np.arange(dm)))
    generator = np.kron(np.diag(n_c), mech_momentum(dm).matrix)
    displacement = scipy.linalg.expm(-2j * np.sqrt(2.0) * params.k * generator)
    matrix = np.kron(kerr, np.eye(dm)) @ np.kron(np.eye(dc), parity) @ displacement
    return Operator(params.space, COMPOSITE, matrix)


def half_period_adjoint_residual(params: SystemParams) -> float:
    """max-norm of U^dag - U exp(-2 pi i k^2 n_c^2) for the half-period propagator"""
    u = half_period_propagator(params).matrix
    n_c = np.arange(params.cavity_dim, dtype=float)
    correction = np.kron(np.diag(np.exp(-2j * np.pi * params.k ** 2 * n_c ** 2)), np.eye(params.mech_dim))
    return float(np.max(np.abs(u.conj().T - u @ correction)))


def odd_part_cancellation(eta: float, params: SystemParams) -> Tuple[Operator, Operator]:
    """U_{T/2}^dag (M3^M + B_0 P_m) U_{T/2} alongside the operator itself"""
    u = half_period_propagator(params)
    odd = odd_third_order_part(eta, params)
    return u.dag() @ odd @ u, odd


# Quadrature oracles for the Magnus expansion ------------------------------------

def interaction_frame_terms(eta: float, psi: float, params: SystemParams
                            ) -> List[Tuple[Callable[[np.ndarray], np.ndarray], Operator]]:
    """
    Decomposition H_I(t) = sum_j c_j(t) O_j of the interaction Hamiltonian in the
    frame of the free driven system, for one driven period starting at t = 0
    """
    dc, dm = params.cavity_dim, params.mech_dim
    w, g0 = params.omega_m, params.g0
    a = _cavity(_ladder(dc), dc)
    n = _cavity(_number_matrix(dc), dc)
    b = _mech(_ladder(dm), dm)
    ic = identity(dc, CAVITY)

    def alpha(t):
        return eta * np.exp(1j * psi) * np.sin(2.0 * w * t)

    lower = lambda t: -g0 * np.exp(-1j * w * t)
    upper = lambda t: -g0 * np.exp(1j * w * t)
    return [
        (lower, tensor(n, b)),
        (upper, tensor(n, b.dag())),
        (lambda t: lower(t) * alpha(t), tensor(a.dag(), b)),
        (lambda t: upper(t) * alpha(t), tensor(a.dag(), b.dag())),
        (lambda t: lower(t) * np.conj(alpha(t)), tensor(a, b)),
        (lambda t: upper(t) * np.conj(alpha(t)), tensor(a, b.dag())),
        (lambda t: lower(t) * np.abs(alpha(t)) ** 2, tensor(ic, b)),
        (lambda t: upper(t) * np.abs(alpha(t)) ** 2, tensor(ic, b.dag())),
    ]


def _grid(params: SystemParams, panels: int) -> np.ndarray:
    if panels % 2:
        panels += 1
    return np.linspace(0.0, params.period, panels + 1)


def magnus_first_order_numeric(eta: float, psi: float, params: SystemParams, panels: int = 10000) -> Operator:
    """(1/T) integral_0^T H_I(t) dt by composite Simpson quadrature"""
    t = _grid(params, panels)
    total = np.zeros((params.space.composite_dim,) * 2, dtype=complex)
    for coefficient, op in interaction_frame_terms(eta, psi, params):
        total += simpson(coefficient(t), x=t) * op.matrix
    return Operator(params.space, COMPOSITE, total / params.period)


def magnus_second_order_numeric(eta: float, psi: float, params: SystemParams, panels: int = 10000) -> Operator:
    """
    -(i / 2T) integral_0^T dt1 integral_0^t1 dt2 [H_I(t1), H_I(t2)] using the term
    decomposition: each weight integral c_i(t1) C_j(t1) is done with a cumulative
    inner quadrature and an outer Simpson rule
    """
    t = _grid(params, panels)
    terms = interaction_frame_terms(eta, psi, params)
    values = [coefficient(t) for coefficient, _ in terms]
    running = [cumulative_simpson(v, x=t, initial=0.0) for v in values]
    total = np.zeros((params.space.composite_dim,) * 2, dtype=complex)
    for i, (_, op_i) in enumerate(terms):
        for j, (_, op_j) in enumerate(terms):
            if i == j:
                continue
            weight = simpson(values[i] * running[j], x=t)
            total += weight * (op_i.matrix @ op_j.matrix - op_j.matrix @ op_i.matrix)
    return Operator(params.space, COMPOSITE, (-1j / (2.0 * params.period)) * total)


def magnus_second_order_closed_form(eta: float, psi: float, params: SystemParams) -> Operator:
    """(omega_m / 2) k^2 (M2^C + M2^I) on the composite space"""
    scale = 0.5 * params.omega_m * params.k ** 2
    return (embed_cavity(m2_cavity(eta, psi, params), params.mech_dim) + m2_interaction(eta, psi, params)) * scale


def low_block_indices(params: SystemParams, margin: int = 3) -> np.ndarray:
    """Composite indices whose cavity and phonon numbers sit `margin` below the truncation"""
    dc, dm = params.cavity_dim, params.mech_dim
    return np.array([i * dm + j for i in range(max(dc - margin, 1)) for j in range(max(dm - margin, 1))])


def residual_modulo_identity(numeric: Operator, reference: Operator, params: SystemParams,
                             margin: int = 3) -> float:
    """
    Relative max-norm difference of two composite operators on the low-lying block,
    after removing the multiple of the identity (a global phase) by which they may differ
    """
    keep = low_block_indices(params, margin)
    diff = (numeric.matrix - reference.matrix)[np.ix_(keep, keep)]
    diff = diff - np.mean(np.diag(diff)) * np.eye(len(keep))
    scale = float(np.max(np.abs(reference.matrix[np.ix_(keep, keep)])))
    return float(np.max(np.abs(diff))) / (scale if scale > 0 else 1.0)


def mech_only_block(op: Operator, params: SystemParams, margin: int = 3) -> np.ndarray:
    """Cavity-vacuum block <0_c| op |0_c> restricted to low phonon numbers"""
    keep = max(params.mech_dim - margin, 1)
    return op.matrix[:keep, :keep]
