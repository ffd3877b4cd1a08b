#!/usr/bin/env python3
"""
Dissipation
===========

Lindblad generators for photon leakage and mechanical thermalization, the
dissipator D[A] rho = A rho A^dag - {A^dag A, rho}/2, and a Trotter-split
density-matrix integrator (unitary conjugation + RK4 dissipative substeps).
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse

from fock_algebra import (
    CAVITY,
    COMPOSITE,
    MECH,
    FockSpace,
    Operator,
    annihilation,
    embed_cavity,
    embed_mech,
    number,
)
from sim_errors import InvalidParameterError, SpaceMismatchError

logger = logging.getLogger(__name__)

OPTICAL = "optical"
MECHANICAL = "mechanical"
CUSTOM = "custom"

Matrix = Union[np.ndarray, scipy.sparse.spmatrix]


def dissipator_apply(A: Operator, rho: np.ndarray) -> np.ndarray:
    """A rho A^dag - (A^dag A rho + rho A^dag A) / 2"""
    rho = np.asarray(rho)
    if rho.shape != A.matrix.shape:
        raise SpaceMismatchError(f"Jump operator of shape {A.matrix.shape} cannot act on state of shape {rho.shape}")
    a = A.matrix
    a_dag = a.conj().T
    number_like = a_dag @ a
    return a @ rho @ a_dag - 0.5 * (number_like @ rho + rho @ number_like)


@dataclass(frozen=True)
class Lindbladian:
    """Sum of rate-weighted dissipators on one composite space"""

    space: FockSpace
    jump_terms: Tuple[Tuple[float, Operator], ...]
    label: str = CUSTOM

    def __post_init__(self):
        for rate, op in self.jump_terms:
            if rate < 0.0 or not np.isfinite(rate):
                raise InvalidParameterError(f"Lindblad rate {rate} must be finite and non-negative")
            if op.kind != COMPOSITE or op.space != self.space:
                raise SpaceMismatchError(f"Jump operator on {op.space} ({op.kind}) does not live on {self.space}")

    @property
    def is_zero(self) -> bool:
        return all(rate == 0.0 for rate, _ in self.jump_terms)

    @property
    def rates(self) -> Tuple[float, ...]:
        return tuple(rate for rate, _ in self.jump_terms)

    def __add__(self, other: "Lindbladian") -> "Lindbladian":
        if self.space != other.space:
            raise SpaceMismatchError(f"Cannot combine Lindbladians on {self.space} and {other.space}")
        return Lindbladian(self.space, self.jump_terms + other.jump_terms, CUSTOM)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """L rho with dense jump operators (reference path)"""
        total = np.zeros_like(np.asarray(rho, dtype=complex))
        for rate, op in self.jump_terms:
            if rate > 0.0:
                total += rate * dissipator_apply(op, rho)
        return total

    def sparse_terms(self):
        """(rate, A, A^dag, A^dag A) as CSR matrices for the non-zero rates"""
        terms = []
        for rate, op in self.jump_terms:
            if rate == 0.0:
                continue
            a = scipy.sparse.csr_matrix(op.matrix)
            a_dag = a.conj().T.tocsr()
            terms.append((rate, a, a_dag, (a_dag @ a).tocsr()))
        return terms


def zero_lindbladian(space: FockSpace) -> Lindbladian:
    return Lindbladian(space, (), CUSTOM)


def optical_loss(kappa: float, space: FockSpace) -> Lindbladian:
    """kappa D[a]"""
    if kappa < 0.0:
        raise InvalidParameterError(f"kappa={kappa} must be non-negative")
    a = embed_cavity(annihilation(space.cavity_dim, CAVITY), space.mech_dim)
    return Lindbladian(space, ((float(kappa), a),), OPTICAL)


def dephasing_rate(gamma: float, n_bar: float, k: float) -> float:
    """4 gamma k^2 / log(1 + 1/n_bar), taken as 0 at n_bar = 0"""
    if n_bar == 0.0:
        return 0.0
    return 4.0 * gamma * k ** 2 / np.log1p(1.0 / n_bar)


def mechanical_thermalization(gamma: float, n_bar: float, k: float, space: FockSpace) -> Lindbladian:
    """
    gamma (n_bar + 1) D[b - k n_c] + gamma n_bar D[b^dag - k n_c]
    + (4 gamma k^2 / log(1 + 1/n_bar)) D[n_c]

    Args:
        gamma: mechanical damping rate
        n_bar: bath occupation
        k: coupling ratio shifting the jump operators
        space: composite truncation

    Returns:
        Lindbladian with the three jump terms
    """
    for name, value in (("gamma", gamma), ("n_bar", n_bar), ("k", k)):
        if value < 0.0:
            raise InvalidParameterError(f"{name}={value} must be non-negative")
    b = embed_mech(annihilation(space.mech_dim, MECH), space.cavity_dim)
    n_c = embed_cavity(number(space.cavity_dim, CAVITY), space.mech_dim)
    terms = (
        (float(gamma * (n_bar + 1.0)), b - n_c * k),
        (float(gamma * n_bar), b.dag() - n_c * k),
        (float(dephasing_rate(gamma, n_bar, k)), n_c),
    )
    return Lindbladian(space, terms, MECHANICAL)


class DensityIntegrator:
    """
    Trotter-split evolution of a density matrix under a time-independent
    Hamiltonian and a Lindbladian; the dissipative part of every step is
    integrated with classical RK4
    """

    def __init__(self, lindbladian: Lindbladian, dt: float, trotter_order: int = 1,
                 substeps: int = 1):
        if trotter_order not in (1, 2):
            raise InvalidParameterError(f"trotter_order={trotter_order} must be 1 or 2")
        if dt <= 0.0:
            raise InvalidParameterError(f"dt={dt} must be positive")
        self.lindbladian = lindbladian
        self.dt = dt
        self.trotter_order = trotter_order
        self.substeps = max(int(substeps), 1)
        self._terms = lindbladian.sparse_terms()
        self._unitaries = {}

    def _dissipative_rhs(self, rho: np.ndarray) -> np.ndarray:
        total = np.zeros_like(rho)
        for rate, a, a_dag, number_like in self._terms:
            jumped = a @ (a @ rho.conj().T).conj().T
            total += rate * (jumped - 0.5 * (number_like @ rho + (number_like @ rho.conj().T).conj().T))
        return total

    def dissipate(self, rho: np.ndarray, duration: float) -> np.ndarray:
        if not self._terms or duration == 0.0:
            return rho
        h = duration / self.substeps
        for _ in range(self.substeps):
            k1 = self._dissipative_rhs(rho)
            k2 = self._dissipative_rhs(rho + 0.5 * h * k1)
            k3 = self._dissipative_rhs(rho + 0.5 * h * k2)
            k4 = self._dissipative_rhs(rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return 0.5 * (rho + rho.conj().T)

    def _unitary(self, key, hamiltonian: Optional[np.ndarray]) -> Optional[np.ndarray]:
        if hamiltonian is None:
            return None
        if key not in self._unitaries:
            w, V = scipy.linalg.eigh(hamiltonian)
            self._unitaries[key] = (V * np.exp(-1j * w * self.dt)) @ V.conj().T
        return self._unitaries[key]

    def step(self, rho: np.ndarray, hamiltonian: Optional[np.ndarray] = None, key=None) -> np.ndarray:
        """One dt; `key` caches exp(-i H dt) across steps with the same Hamiltonian"""
        u = self._unitary(key if key is not None else id(hamiltonian), hamiltonian)
        if self.trotter_order == 1:
            if u is not None:
                rho = u @ rho @ u.conj().T
            return self.dissipate(rho, self.dt)
        rho = self.dissipate(rho, 0.5 * self.dt)
        if u is not None:
            rho = u @ rho @ u.conj().T
        return self.dissipate(rho, 0.5 * self.dt)

    def evolve(self, rho: np.ndarray, duration: float, hamiltonian: Optional[np.ndarray] = None,
               key=None) -> np.ndarray:
        """Evolve over `duration`, which must be a whole number of steps"""
        steps = int(round(duration / self.dt))
        if steps < 0 or abs(steps * self.dt - duration) > 1e-9 * max(duration, 1.0):
            raise InvalidParameterError(f"duration={duration} is not a multiple of dt={self.dt}")
        rho = np.array(rho, dtype=complex)
        for _ in range(steps):
            rho = self.step(rho, hamiltonian, key)
        return rho


def relax_mechanics(rho: np.ndarray, lindbladian: Lindbladian, duration: float, steps: int,
                    samples: int = 1) -> Sequence[np.ndarray]:
    """Pure dissipative evolution with `samples` evenly spaced snapshots"""
    integrator = DensityIntegrator(lindbladian, duration / steps)
    snapshots = []
    per_sample = max(steps // samples, 1)
    for _ in range(samples):
        rho = integrator.evolve(rho, per_sample * integrator.dt)
        snapshots.append(rho)
    return snapshots
