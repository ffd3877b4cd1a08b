#!/usr/bin/env python3
"""
Fock Algebra
============

Dense linear algebra over truncated bosonic Fock spaces: ladder operators,
tensor products, propagation kernels, partial traces and fidelities.

Composite indices follow numpy.kron ordering: |n_c, n_m> sits at
n_c * mech_dim + n_m.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.linalg import expm_multiply

from config.sim_config import SimulationConfig
from sim_errors import (
    InvalidDimensionError,
    InvalidParameterError,
    NumericalContractError,
    SpaceMismatchError,
)

logger = logging.getLogger(__name__)

CAVITY = "cavity"
MECH = "mech"
COMPOSITE = "composite"
KINDS = (CAVITY, MECH, COMPOSITE)

HERMITIAN_TOL = SimulationConfig.HERMITIAN_TOL
STATE_TOL = 1e-8


@dataclass(frozen=True)
class FockSpace:
    """Truncation of the cavity and mechanical modes"""

    cavity_dim: int
    mech_dim: int

    def __post_init__(self):
        for name in ("cavity_dim", "mech_dim"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidDimensionError(f"{name}={value!r} must be a positive integer")

    @property
    def composite_dim(self) -> int:
        return self.cavity_dim * self.mech_dim

    def dim(self, kind: str) -> int:
        """Matrix dimension of an object of the given kind on this space"""
        if kind == CAVITY:
            return self.cavity_dim
        if kind == MECH:
            return self.mech_dim
        if kind == COMPOSITE:
            return self.composite_dim
        raise SpaceMismatchError(f"Unknown space kind: {kind!r}")

    def matches(self, other: "FockSpace", kind: str) -> bool:
        """Whether two spaces agree on the dimensions relevant for `kind`"""
        if kind == CAVITY:
            return self.cavity_dim == other.cavity_dim
        if kind == MECH:
            return self.mech_dim == other.mech_dim
        return self == other


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.flags.writeable = False
    return array


def hermiticity_residual(matrix: np.ndarray) -> float:
    """max|M - M^dag| relative to the largest entry of M"""
    scale = float(np.max(np.abs(matrix))) if matrix.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(matrix - matrix.conj().T))) / scale


@dataclass(frozen=True)
class Operator:
    """Square matrix in the Fock basis of a cavity, mechanical or composite space"""

    space: FockSpace
    kind: str
    matrix: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpaceMismatchError(f"Unknown operator kind: {self.kind!r}")
        matrix = _readonly(self.matrix)
        expected = self.space.dim(self.kind)
        if matrix.shape != (expected, expected):
            raise SpaceMismatchError(
                f"{self.kind} operator on {self.space} needs shape {(expected, expected)}, got {matrix.shape}"
            )
        object.__setattr__(self, "matrix", matrix)
        if self.hermitian:
            residual = hermiticity_residual(matrix)
            if residual > HERMITIAN_TOL:
                raise NumericalContractError(f"Operator flagged Hermitian has residual {residual:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dag(self) -> "Operator":
        return Operator(self.space, self.kind, self.matrix.conj().T, self.hermitian)

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return hermiticity_residual(self.matrix) <= tol

    def as_hermitian(self) -> "Operator":
        """Same operator with the Hermiticity flag set (and checked)"""
        return Operator(self.space, self.kind, self.matrix, hermitian=True)

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        return scipy.sparse.csr_matrix(self.matrix)

    def _check_compatible(self, other: "Operator"):
        if self.kind != other.kind or not self.space.matches(other.space, self.kind):
            raise SpaceMismatchError(
                f"Cannot combine {self.kind} operator on {self.space} with {other.kind} operator on {other.space}"
            )

    def __add__(self, other: "Operator") -> "Operator":
        self._check_compatible(other)
        return Operator(self.space, self.kind, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_compatible(other)
        return Operator(self.space, self.kind, self.matrix - other.matrix)

    def __neg__(self) -> "Operator":
        return Operator(self.space, self.kind, -self.matrix, self.hermitian)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.space, self.kind, scalar * self.matrix)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_compatible(other)
        return Operator(self.space, self.kind, self.matrix @ other.matrix)


@dataclass(frozen=True)
class QuantumState:
    """Pure state vector or density matrix on a tagged Fock space"""

    space: FockSpace
    kind: str
    data: np.ndarray
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpaceMismatchError(f"Unknown state kind: {self.kind!r}")
        data = _readonly(self.data)
        dim = self.space.dim(self.kind)
        if data.ndim == 1:
            if data.shape != (dim,):
                raise SpaceMismatchError(f"State vector needs length {dim}, got {data.shape}")
        elif data.ndim == 2:
            if data.shape != (dim, dim):
                raise SpaceMismatchError(f"Density matrix needs shape {(dim, dim)}, got {data.shape}")
        else:
            raise SpaceMismatchError(f"State data must be 1-D or 2-D, got {data.ndim}-D")
        object.__setattr__(self, "data", data)
        if self.validate:
            self._check_physical()

    def _check_physical(self):
        if self.is_pure:
            norm = np.linalg.norm(self.data)
            if abs(norm - 1.0) > STATE_TOL:
                raise NumericalContractError(f"State vector has norm {norm:.12f}")
            return
        trace = np.trace(self.data)
        if abs(trace - 1.0) > STATE_TOL:
            raise NumericalContractError(f"Density matrix has trace {trace:.12f}")
        if hermiticity_residual(self.data) > 1e-8:
            raise NumericalContractError("Density matrix is not Hermitian")
        smallest = float(np.min(np.linalg.eigvalsh(0.5 * (self.data + self.data.conj().T))))
        if smallest < -STATE_TOL:
            raise NumericalContractError(f"Density matrix has eigenvalue {smallest:.3e}")

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def density_matrix(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return np.array(self.data)

    def to_density(self) -> "QuantumState":
        if not self.is_pure:
            return self
        return QuantumState(self.space, self.kind, self.density_matrix(), validate=False)

    def populations(self) -> np.ndarray:
        """Diagonal of the state in the Fock basis"""
        if self.is_pure:
            return np.abs(self.data) ** 2
        return np.real(np.diag(self.data)).copy()


# Operators -------------------------------------------------------------------

def _single_mode_space(dim: int, mode: str) -> FockSpace:
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise InvalidDimensionError(f"dim={dim!r} must be a positive integer")
    if mode == CAVITY:
        return FockSpace(int(dim), 1)
    if mode == MECH:
        return FockSpace(1, int(dim))
    raise SpaceMismatchError(f"Single-mode operators are cavity or mech, got {mode!r}")


def annihilation(dim: int, mode: str = CAVITY) -> Operator:
    """Truncated ladder operator with M[n-1, n] = sqrt(n)"""
    space = _single_mode_space(dim, mode)
    matrix = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1)
    return Operator(space, mode, matrix)


def creation(dim: int, mode: str = CAVITY) -> Operator:
    return annihilation(dim, mode).dag()


def number(dim: int, mode: str = CAVITY) -> Operator:
    space = _single_mode_space(dim, mode)
    return Operator(space, mode, np.diag(np.arange(dim, dtype=float)), hermitian=True)


def identity(dim: int, mode: str = CAVITY) -> Operator:
    space = _single_mode_space(dim, mode)
    return Operator(space, mode, np.eye(dim), hermitian=True)


def function_of_number(values: np.ndarray, mode: str = CAVITY) -> Operator:
    """Diagonal operator f(n) from its values on n = 0 .. dim-1"""
    values = np.asarray(values)
    space = _single_mode_space(len(values), mode)
    return Operator(space, mode, np.diag(values))


def tensor(A: Operator, B: Operator) -> Operator:
    """Kronecker product of a cavity operator with a mechanical operator"""
    if A.kind != CAVITY or B.kind != MECH:
        raise SpaceMismatchError(f"tensor needs (cavity, mech) operands, got ({A.kind}, {B.kind})")
    space = FockSpace(A.space.cavity_dim, B.space.mech_dim)
    return Operator(space, COMPOSITE, np.kron(A.matrix, B.matrix), A.hermitian and B.hermitian)


def embed_cavity(A: Operator, mech_dim: int) -> Operator:
    """A (x) I_mech"""
    return tensor(A, identity(mech_dim, MECH))


def embed_mech(B: Operator, cavity_dim: int) -> Operator:
    """I_cav (x) B"""
    return tensor(identity(cavity_dim, CAVITY), B)


def promote(op: Operator, space: FockSpace) -> Operator:
    """Lift a single-mode operator onto the composite space (identity for composite input)"""
    if op.kind == CAVITY:
        if op.space.cavity_dim != space.cavity_dim:
            raise SpaceMismatchError(f"Cavity operator of dim {op.dim} does not fit {space}")
        return embed_cavity(op, space.mech_dim)
    if op.kind == MECH:
        if op.space.mech_dim != space.mech_dim:
            raise SpaceMismatchError(f"Mechanical operator of dim {op.dim} does not fit {space}")
        return embed_mech(op, space.cavity_dim)
    if op.space != space:
        raise SpaceMismatchError(f"Composite operator on {op.space} does not fit {space}")
    return op


def commutator(A: Operator, B: Operator) -> Operator:
    return A @ B - B @ A


# Propagation kernels ------------------------------------------------------

def expm_apply(H: Union[Operator, np.ndarray, scipy.sparse.spmatrix], v: np.ndarray, t: float,
               check_hermitian: bool = True) -> np.ndarray:
    """
    Return exp(-i H t) v without forming the exponential

    Args:
        H: Hermitian generator (Operator, dense array or sparse matrix)
        v: state vector, or a (dim, m) block of column vectors
        t: duration

    Returns:
        propagated vector(s)
    """
    matrix = H.matrix if isinstance(H, Operator) else H
    if check_hermitian:
        dense = matrix.toarray() if scipy.sparse.issparse(matrix) else np.asarray(matrix)
        residual = hermiticity_residual(dense)
        if residual > HERMITIAN_TOL:
            raise NumericalContractError(f"expm_apply needs a Hermitian generator, residual {residual:.3e}")
    v = np.asarray(v, dtype=complex)
    if t == 0.0:
        return v.copy()
    generator = scipy.sparse.csr_matrix(matrix) if not scipy.sparse.issparse(matrix) else matrix.tocsr()
    return expm_multiply(-1j * t * generator, v)


def unitary(H: Operator, t: float) -> Operator:
    """Dense exp(-i H t) through the Hermitian eigendecomposition (single-mode / small spaces)"""
    if not H.is_hermitian():
        raise NumericalContractError("unitary needs a Hermitian generator")
    w, V = scipy.linalg.eigh(0.5 * (H.matrix + H.matrix.conj().T))
    return Operator(H.space, H.kind, (V * np.exp(-1j * w * t)) @ V.conj().T)


# States -------------------------------------------------------------------

def fock_vector(n: int, dim: int) -> np.ndarray:
    if not 0 <= n < dim:
        raise InvalidDimensionError(f"Fock index {n} outside truncation {dim}")
    vector = np.zeros(dim, dtype=complex)
    vector[n] = 1.0
    return vector


def fock_state(n: int, dim: int, mode: str = CAVITY) -> QuantumState:
    return QuantumState(_single_mode_space(dim, mode), mode, fock_vector(n, dim))


def product_state(cavity: QuantumState, mech: QuantumState) -> QuantumState:
    """Composite state of a cavity state and a mechanical state"""
    if cavity.kind != CAVITY or mech.kind != MECH:
        raise SpaceMismatchError("product_state needs a cavity state and a mechanical state")
    space = FockSpace(cavity.space.cavity_dim, mech.space.mech_dim)
    if cavity.is_pure and mech.is_pure:
        return QuantumState(space, COMPOSITE, np.kron(cavity.data, mech.data))
    return QuantumState(space, COMPOSITE, np.kron(cavity.density_matrix(), mech.density_matrix()))


def ground_state(space: FockSpace) -> QuantumState:
    """|0> (x) |0> on the composite space"""
    return QuantumState(space, COMPOSITE, fock_vector(0, space.composite_dim))


def thermal_populations(n_bar: float, dim: int) -> Tuple[np.ndarray, float]:
    """Bose-Einstein populations renormalized after truncation, and the truncation deficit"""
    if n_bar < 0:
        raise InvalidParameterError(f"n_bar={n_bar} must be non-negative")
    if dim < 1:
        raise InvalidDimensionError(f"dim={dim!r} must be a positive integer")
    ratio = n_bar / (1.0 + n_bar)
    weights = np.power(ratio, np.arange(dim, dtype=float))
    deficit = float(ratio ** dim)
    return weights / weights.sum(), deficit


def thermal_state(n_bar: float, dim: int, mode: str = MECH) -> QuantumState:
    """Diagonal thermal density matrix with mean occupation n_bar"""
    populations, deficit = thermal_populations(n_bar, dim)
    if deficit > 1e-6:
        logger.warning(f"Thermal state n_bar={n_bar} truncated at dim={dim} drops {deficit:.2e} of the weight")
    return QuantumState(_single_mode_space(dim, mode), mode, np.diag(populations).astype(complex))


def partial_trace_mech(state: QuantumState) -> QuantumState:
    """Trace out the mechanical mode of a composite state"""
    if state.kind != COMPOSITE:
        raise SpaceMismatchError(f"partial_trace_mech needs a composite state, got {state.kind}")
    dc, dm = state.space.cavity_dim, state.space.mech_dim
    if state.is_pure:
        psi = state.data.reshape(dc, dm)
        reduced = psi @ psi.conj().T
    else:
        reduced = np.einsum("ijkj->ik", state.data.reshape(dc, dm, dc, dm))
    return QuantumState(FockSpace(dc, 1), CAVITY, reduced, validate=False)


def partial_trace_cavity(state: QuantumState) -> QuantumState:
    """Trace out the cavity mode of a composite state"""
    if state.kind != COMPOSITE:
        raise SpaceMismatchError(f"partial_trace_cavity needs a composite state, got {state.kind}")
    dc, dm = state.space.cavity_dim, state.space.mech_dim
    if state.is_pure:
        psi = state.data.reshape(dc, dm)
        reduced = psi.T @ psi.conj()
    else:
        reduced = np.einsum("ijil->jl", state.data.reshape(dc, dm, dc, dm))
    return QuantumState(FockSpace(1, dm), MECH, reduced, validate=False)


def _checked_spectrum(matrix: np.ndarray, tol: float) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of the Hermitian part; raises on an eigenvalue below -tol"""
    w, V = np.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    if w.min() < -tol:
        raise NumericalContractError(f"Density matrix has eigenvalue {w.min():.3e}")
    return w, V


def _psd_sqrt(matrix: np.ndarray, tol: float) -> np.ndarray:
    w, V = _checked_spectrum(matrix, tol)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def fidelity(rho: QuantumState, sigma: Union[QuantumState, np.ndarray], tol: float = STATE_TOL) -> float:
    """
    Root fidelity Tr sqrt(sqrt(sigma) rho sqrt(sigma)); equals sqrt(<Psi|rho|Psi>)
    when one argument is pure

    Args:
        rho: state
        sigma: state, or a bare target vector on the same space as rho

    Returns:
        fidelity in [0, 1]
    """
    if not isinstance(sigma, QuantumState):
        sigma = QuantumState(rho.space, rho.kind, np.asarray(sigma, dtype=complex))
    if rho.kind != sigma.kind or rho.dim != sigma.dim:
        raise SpaceMismatchError(f"Cannot compare {rho.kind} state of dim {rho.dim} with {sigma.kind} state of dim {sigma.dim}")

    if rho.is_pure and sigma.is_pure:
        value = abs(np.vdot(sigma.data, rho.data))
    elif sigma.is_pure or rho.is_pure:
        target, mixed = (sigma, rho) if sigma.is_pure else (rho, sigma)
        w, V = _checked_spectrum(mixed.data, tol)
        overlaps = np.abs(V.conj().T @ target.data) ** 2
        value = np.sqrt(max(float(np.dot(np.clip(w, 0.0, None), overlaps)), 0.0))
    else:
        root = _psd_sqrt(sigma.data, tol)
        inner = root @ rho.data @ root
        w = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
        if w.min() < -tol:
            raise NumericalContractError(f"Density matrix has eigenvalue {w.min():.3e}")
        value = float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    return float(min(max(value, 0.0), 1.0))


def leakage_populations(state: QuantumState, levels: int = 2) -> Tuple[float, float]:
    """Population in the top `levels` Fock states of the cavity and of the mechanical mode"""
    if state.kind != COMPOSITE:
        populations = state.populations()
        top = float(populations[-levels:].sum())
        return (top, 0.0) if state.kind == CAVITY else (0.0, top)
    dc, dm = state.space.cavity_dim, state.space.mech_dim
    grid = state.populations().reshape(dc, dm)
    cavity_top = float(grid.sum(axis=1)[-levels:].sum()) if dc > levels else 0.0
    mech_top = float(grid.sum(axis=0)[-levels:].sum()) if dm > levels else 0.0
    return cavity_top, mech_top
