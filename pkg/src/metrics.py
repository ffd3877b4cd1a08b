#!/usr/bin/env python3
"""
Metrics
=======

Target states and the benchmark fidelities:

- F_n: lossless final cavity state against the target
- F_l: dissipative final cavity state against the target
- F_i: lossless against dissipative final cavity state
"""

import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from fock_algebra import CAVITY, FockSpace, QuantumState, fidelity
from sim_errors import ContractError, InvalidParameterError, SpaceMismatchError

logger = logging.getLogger(__name__)

FOCK = "fock"
SUPERPOSITION = "superposition"


@dataclass(frozen=True)
class TargetState:
    """Pure cavity target: Fock state |n> or (|0> + e^{i theta}|2>)/sqrt2"""

    kind: str = FOCK
    n: int = 2
    theta: float = 0.0

    def __post_init__(self):
        if self.kind not in (FOCK, SUPERPOSITION):
            raise InvalidParameterError(f"Unknown target kind {self.kind!r}")
        if self.kind == FOCK and self.n < 0:
            raise InvalidParameterError(f"Fock target n={self.n} must be non-negative")

    @classmethod
    def fock(cls, n: int = 2) -> "TargetState":
        return cls(FOCK, n, 0.0)

    @classmethod
    def superposition(cls, theta: float = 0.0) -> "TargetState":
        return cls(SUPERPOSITION, 2, float(theta))

    @classmethod
    def from_label(cls, label: str) -> "TargetState":
        """Parse "fock2", "fock:3", "superposition" or "superposition:-1.86" """
        text = label.strip().lower()
        if text.startswith(FOCK):
            rest = text[len(FOCK):].lstrip(":")
            return cls.fock(int(rest) if rest else 2)
        if text.startswith(SUPERPOSITION) or text == "sup":
            rest = text.split(":", 1)[1] if ":" in text else ""
            return cls.superposition(float(rest) if rest else 0.0)
        raise InvalidParameterError(f"Unknown target label {label!r}")

    @property
    def label(self) -> str:
        return f"fock{self.n}" if self.kind == FOCK else SUPERPOSITION

    @property
    def has_free_phase(self) -> bool:
        return self.kind == SUPERPOSITION

    def with_theta(self, theta: float) -> "TargetState":
        return TargetState(self.kind, self.n, float(theta))

    def vector(self, dim: int) -> np.ndarray:
        """Target amplitudes on a cavity truncation of size dim"""
        needed = self.n + 1 if self.kind == FOCK else 3
        if dim < needed:
            raise SpaceMismatchError(f"Target {self.label} needs cavity_dim >= {needed}, got {dim}")
        vector = np.zeros(dim, dtype=complex)
        if self.kind == FOCK:
            vector[self.n] = 1.0
        else:
            vector[0] = 1.0 / np.sqrt(2.0)
            vector[2] = np.exp(1j * self.theta) / np.sqrt(2.0)
        return vector

    def state(self, dim: int) -> QuantumState:
        return QuantumState(FockSpace(dim, 1), CAVITY, self.vector(dim))


def wrap_phase(theta: float) -> float:
    """Map an angle into (-pi, pi]"""
    wrapped = float(np.angle(np.exp(1j * theta)))
    return np.pi if wrapped == -np.pi else wrapped


def reduced_final_state(result) -> QuantumState:
    """Final cavity state with the free frame phase V_phi removed"""
    if getattr(result, "final_state", None) is None:
        raise ContractError("Result carries no final state")
    rho = result.final_cavity_state()
    phase = getattr(result, "final_frame_phase", 0.0)
    if phase == 0.0:
        return rho
    undo = np.exp(-1j * phase * np.arange(rho.dim))
    return QuantumState(rho.space, CAVITY, undo[:, None] * rho.data * undo.conj()[None, :], validate=False)


def best_superposition_theta(rho: QuantumState) -> Tuple[float, float]:
    """
    theta maximizing the fidelity to (|0> + e^{i theta}|2>)/sqrt2 and that fidelity;
    <Psi|rho|Psi> = (rho_00 + rho_22)/2 + Re(e^{i theta} rho_02) peaks at theta = -arg rho_02
    """
    data = rho.density_matrix()
    if data.shape[0] < 3:
        raise SpaceMismatchError("Superposition targets need cavity_dim >= 3")
    coherence = data[0, 2]
    theta = wrap_phase(-np.angle(coherence)) if abs(coherence) > 0 else 0.0
    value = 0.5 * np.real(data[0, 0] + data[2, 2]) + abs(coherence)
    return theta, float(np.sqrt(min(max(value, 0.0), 1.0)))


def _target_fidelity(rho: QuantumState, target: TargetState, maximize_theta: bool) -> float:
    if maximize_theta and target.has_free_phase:
        return best_superposition_theta(rho)[1]
    return fidelity(rho, target.vector(rho.dim))


def fidelity_fn(result_exact, target: TargetState, maximize_theta: bool = False) -> float:
    """F_n = sqrt(<Psi|rho_n|Psi>) of the lossless final cavity state"""
    return _target_fidelity(reduced_final_state(result_exact), target, maximize_theta)


def fidelity_fl(result_dissipative, target: TargetState, maximize_theta: bool = False) -> float:
    """F_l = sqrt(<Psi|rho_l|Psi>) of the dissipative final cavity state"""
    return _target_fidelity(reduced_final_state(result_dissipative), target, maximize_theta)


def fidelity_fi(result_exact, result_dissipative) -> float:
    """F_i = F(rho_n, rho_l), Uhlmann fidelity of the two final cavity states"""
    rho_n = reduced_final_state(result_exact)
    rho_l = reduced_final_state(result_dissipative)
    if rho_n.dim != rho_l.dim:
        raise SpaceMismatchError(f"Cavity states of dims {rho_n.dim} and {rho_l.dim} cannot be compared")
    return fidelity(rho_n, rho_l)


def population_parity_ratio(result) -> Dict[str, float]:
    """
    Largest total odd-Fock population over all snapshots against the largest
    single even-Fock population with n >= 2
    """
    max_odd = 0.0
    max_even = 0.0
    for populations in result.cavity_populations:
        populations = np.asarray(populations)
        max_odd = max(max_odd, float(populations[1::2].sum()))
        if len(populations) > 2:
            max_even = max(max_even, float(populations[2::2].max()))
    ratio = max_odd / max_even if max_even > 0 else float("inf")
    return {"max_odd": max_odd, "max_even": max_even, "ratio": ratio}
