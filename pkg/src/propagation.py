#!/usr/bin/env python3
"""
Propagation
===========

The three propagators of the toolkit:

- propagate_exact: time-stepped unitary evolution under the full Hamiltonian
- propagate_effective: one exp(-i H T) per block with the effective generator
- propagate_lindblad: Trotter-split master equation with the effective
  generator and a Lindbladian

plus SimulationResult and its CSV / JSON writers.
"""

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse

from config.sim_config import SimulationConfig
from dissipation import DensityIntegrator, Lindbladian
from fock_algebra import (
    CAVITY,
    COMPOSITE,
    MECH,
    FockSpace,
    Operator,
    QuantumState,
    expm_apply,
    fidelity,
    fock_vector,
    leakage_populations,
    partial_trace_mech,
    product_state,
)
from model import (
    FRAMES,
    DrivePulse,
    EffectiveBlock,
    HamiltonianTerms,
    SystemParams,
    block_effective_hamiltonian,
    frame_displacement,
)
from schedule import DRIVEN, DrivingPattern, build_pattern
from sim_errors import AccuracyError, ContractError, InvalidParameterError

logger = logging.getLogger(__name__)

INTEGRATORS = ("midpoint", "magnus4")
RESULT_SCHEMA = f"optomech-result/{SimulationConfig.CSV_SCHEMA_VERSION}"

GAUSS_OFFSET = np.sqrt(3.0) / 6.0


@dataclass(frozen=True)
class PropagationConfig:
    """Time resolution and recording options of a propagation run"""

    steps_per_period: int = SimulationConfig.STEPS_PER_PERIOD
    record_stride: Optional[float] = None
    frame: str = SimulationConfig.FRAME
    integrator: str = SimulationConfig.INTEGRATOR
    check_convergence: bool = False
    convergence_tol: float = 1e-6
    leakage_threshold: float = SimulationConfig.LEAKAGE_THRESHOLD
    lindblad_steps_per_period: int = SimulationConfig.LINDBLAD_STEPS_PER_PERIOD
    trotter_order: int = SimulationConfig.TROTTER_ORDER
    effective_order: int = 3
    keep_reduced_states: bool = True

    def __post_init__(self):
        if self.steps_per_period < 100:
            raise InvalidParameterError(f"steps_per_period={self.steps_per_period} must be at least 100")
        if self.lindblad_steps_per_period < 1:
            raise InvalidParameterError(f"lindblad_steps_per_period={self.lindblad_steps_per_period} must be positive")
        if self.frame not in FRAMES:
            raise InvalidParameterError(f"frame={self.frame!r} must be one of {FRAMES}")
        if self.integrator not in INTEGRATORS:
            raise InvalidParameterError(f"integrator={self.integrator!r} must be one of {INTEGRATORS}")
        if self.record_stride is not None and self.record_stride <= 0.0:
            raise InvalidParameterError(f"record_stride={self.record_stride} must be positive")
        if self.trotter_order not in (1, 2):
            raise InvalidParameterError(f"trotter_order={self.trotter_order} must be 1 or 2")
        if self.effective_order not in (2, 3):
            raise InvalidParameterError(f"effective_order={self.effective_order} must be 2 or 3")

    def doubled(self) -> "PropagationConfig":
        return PropagationConfig(
            steps_per_period=2 * self.steps_per_period,
            record_stride=self.record_stride,
            frame=self.frame,
            integrator=self.integrator,
            check_convergence=False,
            leakage_threshold=self.leakage_threshold,
            lindblad_steps_per_period=self.lindblad_steps_per_period,
            trotter_order=self.trotter_order,
            effective_order=self.effective_order,
            keep_reduced_states=False,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "steps_per_period": self.steps_per_period,
            "record_stride": self.record_stride,
            "frame": self.frame,
            "integrator": self.integrator,
            "lindblad_steps_per_period": self.lindblad_steps_per_period,
            "trotter_order": self.trotter_order,
            "effective_order": self.effective_order,
        }


@dataclass
class SimulationResult:
    """Snapshots and final state of one propagation run"""

    kind: str
    times: List[float]
    cavity_populations: List[np.ndarray]
    final_state: Optional[QuantumState]
    reduced_cavity_states: List[np.ndarray] = field(default_factory=list)
    fidelity_trace: List[float] = field(default_factory=list)
    leakage_flags: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    final_frame_phase: float = 0.0
    frame: str = "rotating"
    # Frame of each snapshot's populations; empty means all in `frame`
    snapshot_frames: List[str] = field(default_factory=list)
    provenance: Dict[str, Any] = field(default_factory=dict)

    def frames(self) -> List[str]:
        return list(self.snapshot_frames) if self.snapshot_frames else [self.frame] * len(self.times)

    def final_cavity_state(self) -> QuantumState:
        """Reduced cavity density matrix of the final state"""
        if self.final_state is None:
            raise ContractError(f"{self.kind} result carries no final state")
        if self.final_state.kind == CAVITY:
            return self.final_state.to_density()
        if self.final_state.kind != COMPOSITE:
            raise ContractError(f"Cannot reduce a {self.final_state.kind} state to the cavity")
        return partial_trace_mech(self.final_state)

    def population_sums(self) -> np.ndarray:
        return np.array([float(np.sum(p)) for p in self.cavity_populations])

    def to_csv(self, path: str) -> str:
        """Column-oriented trajectory with a versioned schema comment line"""
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        n_levels = len(self.cavity_populations[0]) if self.cavity_populations else 0
        header = ["time_T"] + [f"pop_{n}" for n in range(n_levels)]
        if self.fidelity_trace:
            header.append("fidelity")
        mixed_frames = len(set(self.frames())) > 1
        if mixed_frames:
            header.append("frame")
        with open(path, "w", newline="") as handle:
            handle.write(f"# schema: {RESULT_SCHEMA} kind={self.kind} frame={self.frame}\n")
            writer = csv.writer(handle)
            writer.writerow(header)
            for index, (time, populations) in enumerate(zip(self.times, self.cavity_populations)):
                row = [repr(float(time))] + [repr(float(p)) for p in populations]
                if self.fidelity_trace:
                    row.append(repr(float(self.fidelity_trace[index])))
                if mixed_frames:
                    row.append(self.frames()[index])
                writer.writerow(row)
        return path

    def metadata(self) -> Dict[str, Any]:
        return {
            "schema": RESULT_SCHEMA,
            "kind": self.kind,
            "frame": self.frame,
            "code_version": SimulationConfig.VERSION,
            "n_snapshots": len(self.times),
            "final_time_T": self.times[-1] if self.times else 0.0,
            "final_frame_phase": self.final_frame_phase,
            "snapshot_frames": self.frames(),
            "leakage_flags": list(self.leakage_flags),
            "warnings": list(self.warnings),
            "provenance": self.provenance,
        }

    def to_json(self, path: str, extra: Optional[Dict[str, Any]] = None) -> str:
        """JSON sidecar with parameters, code version and residual reports"""
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        data = self.metadata()
        if extra:
            data.update(extra)
        with open(path, "w") as handle:
            json.dump(data, handle, indent=2, default=_json_default)
        return path

    def write(self, out_dir: str, stem: str, extra: Optional[Dict[str, Any]] = None) -> Tuple[str, str]:
        base = Path(out_dir) / stem
        return self.to_csv(f"{base}.csv"), self.to_json(f"{base}.json", extra)


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return {"real": value.real, "imag": value.imag}
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


# State handling ----------------------------------------------------------------

class _Ensemble:
    """Pure state or spectral decomposition of a mixed state as weighted columns"""

    def __init__(self, state: QuantumState, cutoff: float = 1e-14):
        self.space = state.space
        if state.is_pure:
            self.columns = np.array(state.data, dtype=complex).reshape(-1, 1)
            self.weights = np.ones(1)
            self.pure = True
        else:
            w, V = np.linalg.eigh(0.5 * (state.data + state.data.conj().T))
            keep = w > cutoff
            self.columns = np.array(V[:, keep], dtype=complex)
            self.weights = w[keep]
            self.pure = False

    def scaled(self) -> np.ndarray:
        return self.columns * np.sqrt(self.weights)

    def reduced_cavity(self) -> np.ndarray:
        dc, dm = self.space.cavity_dim, self.space.mech_dim
        blocks = self.scaled().T.reshape(-1, dc, dm)
        stacked = np.concatenate(list(blocks), axis=1)
        return stacked @ stacked.conj().T

    def state(self) -> QuantumState:
        if self.pure:
            return QuantumState(self.space, COMPOSITE, self.columns[:, 0], validate=False)
        scaled = self.scaled()
        return QuantumState(self.space, COMPOSITE, scaled @ scaled.conj().T, validate=False)


def _lab_phase(params: SystemParams, time: float) -> np.ndarray:
    """Diagonal of exp(-i omega_c n_c t) on the composite space"""
    n_c = np.repeat(np.arange(params.cavity_dim, dtype=float), params.mech_dim)
    return np.exp(-1j * params.omega_c * n_c * time)


def frame_phase_at(pattern: DrivingPattern, time_T: float) -> float:
    """Ramp phase accumulated by the driven periods completed before time_T"""
    total = 0.0
    for pulse, step in zip(pattern.pulses, pattern.ledger.phi_steps):
        if pulse.t_end <= time_T + 1e-12:
            total += step
    return total


def _record_times(pattern: DrivingPattern, stride: Optional[float]) -> List[float]:
    times = {5.0 * b for b in range(1, pattern.n_blocks + 1)}
    if stride is not None:
        count = int(np.floor(pattern.duration / stride + 1e-9))
        times.update(round(stride * i, 12) for i in range(1, count + 1))
    return sorted(times)


def _step_generator(terms: HamiltonianTerms, pulses: Sequence[DrivePulse], pulse: DrivePulse,
                    t: float, h: float, integrator: str) -> scipy.sparse.csr_matrix:
    if integrator == "midpoint":
        return terms.at(pulses, t + 0.5 * h, pulse)
    h1 = terms.at(pulses, t + (0.5 - GAUSS_OFFSET) * h, pulse)
    h2 = terms.at(pulses, t + (0.5 + GAUSS_OFFSET) * h, pulse)
    correction = (h2 @ h1 - h1 @ h2) * (-1j * np.sqrt(3.0) * h / 12.0)
    return (0.5 * (h1 + h2) + correction).tocsr()


def _evolve_columns(pattern: DrivingPattern, columns: np.ndarray, config: PropagationConfig,
                    on_record=None) -> np.ndarray:
    """
    Step a block of state columns through the pattern; `on_record(time_T, columns)`
    fires at every recording time
    """
    params = pattern.params
    period = params.period
    terms = HamiltonianTerms(params, "displaced" if config.frame == "displaced" else "rotating")
    pulses = pattern.pulses
    record_times = _record_times(pattern, config.record_stride)
    next_record = 0

    def record_until(time_T, state):
        nonlocal next_record
        while next_record < len(record_times) and record_times[next_record] <= time_T + 1e-9:
            if on_record is not None:
                on_record(record_times[next_record], state)
            next_record += 1

    for segment in pattern.segments:
        if segment.kind == DRIVEN and segment.eta > 0.0:
            for pulse in segment.pulses:
                steps = int(round(config.steps_per_period * pulse.duration))
                h = pulse.duration * period / steps
                for index in range(steps):
                    t = pulse.t_start * period + index * h
                    generator = _step_generator(terms, pulses, pulse, t, h, config.integrator)
                    columns = expm_apply(generator, columns, h, check_hermitian=False)
                    record_until((t + h) / period, columns)
        else:
            # Undriven windows: the rotating-frame Hamiltonian is constant
            edges = [segment.t_start]
            edges += [r for r in record_times if segment.t_start < r < segment.t_end]
            edges.append(segment.t_end)
            for lo, hi in zip(edges[:-1], edges[1:]):
                columns = expm_apply(terms.static, columns, (hi - lo) * period, check_hermitian=False)
                record_until(hi, columns)
    return columns


def _check_initial(initial: QuantumState, params: SystemParams):
    if initial.kind != COMPOSITE:
        raise ContractError(f"This propagator needs a composite initial state, got {initial.kind}")
    if initial.space != params.space:
        raise ContractError(f"Initial state lives on {initial.space}, pattern on {params.space}")


def _leakage_flag(result: SimulationResult, time_T: float, populations: Tuple[float, float], threshold: float):
    cavity_top, mech_top = populations
    if cavity_top > threshold or mech_top > threshold:
        message = f"t={time_T:g}T: top-level population cavity={cavity_top:.2e} mech={mech_top:.2e}"
        result.leakage_flags.append(message)
        logger.warning(f"Truncation leakage {message}")


def propagate_exact(pattern: DrivingPattern, initial: QuantumState,
                    config: Optional[PropagationConfig] = None,
                    target: Optional[np.ndarray] = None) -> SimulationResult:
    """
    Numerically exact unitary propagation of the full Hamiltonian

    Args:
        pattern: driving timeline
        initial: composite pure or mixed state
        config: time resolution, frame and recording options
        target: optional cavity target vector for a fidelity trace

    Returns:
        SimulationResult with snapshots at every block boundary (and record_stride)
    """
    config = config or PropagationConfig()
    params = pattern.params
    _check_initial(initial, params)
    ensemble = _Ensemble(initial)

    result = SimulationResult(
        kind="exact",
        times=[0.0],
        cavity_populations=[],
        final_state=None,
        final_frame_phase=pattern.final_frame_phase,
        frame=config.frame,
        provenance={
            "params": params.to_dict(),
            "block_amplitudes": list(pattern.block_amplitudes),
            "eta_max": pattern.eta_max,
            "parity": pattern.parity,
            "config": config.to_dict(),
        },
    )

    def snapshot(time_T, columns):
        view = _Ensemble.__new__(_Ensemble)
        view.space, view.weights, view.pure = ensemble.space, ensemble.weights, ensemble.pure
        view.columns = columns
        if config.frame == "lab":
            view.columns = columns * _lab_phase(params, time_T * params.period)[:, None]
        rho_c = view.reduced_cavity()
        populations = np.real(np.diag(rho_c)).copy()
        result.cavity_populations.append(populations)
        if config.keep_reduced_states:
            result.reduced_cavity_states.append(rho_c)
        if target is not None:
            phase = frame_phase_at(pattern, time_T)
            undo = np.exp(-1j * phase * np.arange(params.cavity_dim))
            rotated = undo[:, None] * rho_c * undo.conj()[None, :]
            state = QuantumState(FockSpace(params.cavity_dim, 1), CAVITY, rotated, validate=False)
            result.fidelity_trace.append(fidelity(state, np.asarray(target, dtype=complex)))
        composite_pops = np.sum(np.abs(view.columns) ** 2 * view.weights, axis=1)
        grid = composite_pops.reshape(params.cavity_dim, params.mech_dim)
        top = (float(grid.sum(axis=1)[-2:].sum()), float(grid.sum(axis=0)[-2:].sum()))
        _leakage_flag(result, time_T, top, config.leakage_threshold)
        if config.frame == "displaced":
            # The displaced frame coincides with the rotating one where alpha vanishes
            alpha = frame_displacement(pattern.pulses, time_T * params.period, params)
            result.snapshot_frames.append("displaced" if abs(alpha) > 1e-9 else "rotating")
        if time_T > 0.0:
            result.times.append(time_T)

    snapshot(0.0, ensemble.columns)
    ensemble.columns = _evolve_columns(pattern, ensemble.columns, config, snapshot)
    final = ensemble.state()
    if config.frame == "lab":
        phase = _lab_phase(params, pattern.duration * params.period)
        final = QuantumState(params.space, COMPOSITE,
                             phase * final.data if final.is_pure else phase[:, None] * final.data * phase.conj()[None, :],
                             validate=False)
    result.final_state = final

    norm = float(np.sum(ensemble.weights * np.sum(np.abs(ensemble.columns) ** 2, axis=0)))
    result.provenance["norm_deviation"] = abs(norm - 1.0)
    if abs(norm - 1.0) > 1e-8:
        result.warnings.append(f"norm drifted by {abs(norm - 1.0):.2e}")
        logger.warning(f"Exact propagation norm drifted by {abs(norm - 1.0):.2e}")

    if config.check_convergence:
        refined = propagate_exact(pattern, initial, config.doubled())
        change = 1.0 - fidelity(final, refined.final_state.data) if final.is_pure else \
            1.0 - fidelity(final, refined.final_state)
        result.provenance["step_doubling_change"] = change
        if change > config.convergence_tol:
            raise AccuracyError(
                f"Doubling steps_per_period={config.steps_per_period} changed the final state by {change:.2e}"
            )
    return result


def exact_block_propagator(eta: float, params: SystemParams, parity: str = "even",
                           config: Optional[PropagationConfig] = None) -> Tuple[Operator, float]:
    """
    Dense propagator of one protocol block (small spaces) and the final ramp phase

    Returns:
        (U over 5T at the block boundary, varphi_{N+1})
    """
    config = config or PropagationConfig(frame="displaced")
    pattern = build_pattern([eta], params, max(eta, 0.0), parity)
    columns = np.eye(params.space.composite_dim, dtype=complex)
    columns = _evolve_columns(pattern, columns, config)
    return Operator(params.space, COMPOSITE, columns), pattern.final_frame_phase


def block_propagator_error(eta: float, params: SystemParams, order: int = 3,
                           config: Optional[PropagationConfig] = None, margin: int = 3) -> float:
    """
    max|V_phi^dag U_exact - e^{i theta} exp(-i H T)| on the low-lying block, minimized
    over the global phase theta
    """
    exact, phase = exact_block_propagator(eta, params, config=config)
    block = block_effective_hamiltonian(eta, params, order)
    h = block.hamiltonian if block.hamiltonian.kind == COMPOSITE else \
        Operator(params.space, COMPOSITE, np.kron(block.hamiltonian.matrix, np.eye(params.mech_dim)))
    w, V = scipy.linalg.eigh(h.matrix)
    effective = (V * np.exp(-1j * w * block.generator_time)) @ V.conj().T

    undo = np.kron(np.exp(-1j * phase * np.arange(params.cavity_dim)), np.ones(params.mech_dim))
    framed = undo[:, None] * exact.matrix
    keep = np.array([i * params.mech_dim + j
                     for i in range(max(params.cavity_dim - margin, 1))
                     for j in range(max(params.mech_dim - margin, 1))])
    a = framed[np.ix_(keep, keep)]
    b = effective[np.ix_(keep, keep)]
    overlap = np.trace(b.conj().T @ a)
    theta = np.angle(overlap) if abs(overlap) > 0 else 0.0
    return float(np.max(np.abs(a - np.exp(1j * theta) * b)))


# Effective and dissipative propagation --------------------------------------------

def block_unitary(block: EffectiveBlock) -> np.ndarray:
    """Dense exp(-i H T) of an effective block"""
    w, V = scipy.linalg.eigh(block.hamiltonian.matrix)
    return (V * np.exp(-1j * w * block.generator_time)) @ V.conj().T


def propagate_effective(block_amplitudes: Sequence[float], params: SystemParams, initial: QuantumState,
                        order: int = 2, target: Optional[np.ndarray] = None) -> SimulationResult:
    """
    Per-block application of exp(-i H T) with the order-2 (cavity) or
    order-3 (composite) effective generator

    Args:
        block_amplitudes: one eta per block
        params: system parameters
        initial: cavity-only state (order 2) or composite / cavity state (order 3)
        order: perturbative order of the generator
        target: optional cavity target vector for a fidelity trace

    Returns:
        SimulationResult with one snapshot per block
    """
    if order not in (2, 3):
        raise InvalidParameterError(f"order={order} must be 2 or 3")
    if order == 2 and initial.kind != CAVITY:
        raise ContractError("Order-2 effective propagation acts on the cavity only; pass a cavity state")
    if order == 3 and initial.kind == CAVITY:
        mech_ground = QuantumState(FockSpace(1, params.mech_dim), MECH, fock_vector(0, params.mech_dim))
        initial = product_state(initial, mech_ground)
    if initial.kind == MECH:
        raise ContractError("Effective propagation needs a cavity or composite initial state")
    expected = params.cavity_dim if order == 2 else params.space.composite_dim
    if initial.dim != expected:
        raise ContractError(f"Initial state of dim {initial.dim} does not match {expected}")

    result = SimulationResult(
        kind=f"effective-order{order}",
        times=[0.0],
        cavity_populations=[],
        final_state=None,
        provenance={"params": params.to_dict(), "block_amplitudes": list(block_amplitudes), "order": order},
    )
    data = np.array(initial.data, dtype=complex)
    pure = initial.is_pure

    def snapshot(time_T, data):
        state = QuantumState(initial.space, initial.kind, data, validate=False)
        rho_c = state.to_density().data if state.kind == CAVITY else partial_trace_mech(state).data
        result.cavity_populations.append(np.real(np.diag(rho_c)).copy())
        result.reduced_cavity_states.append(np.array(rho_c))
        if target is not None:
            reduced = QuantumState(FockSpace(params.cavity_dim, 1), CAVITY, rho_c, validate=False)
            result.fidelity_trace.append(fidelity(reduced, np.asarray(target, dtype=complex)))
        if time_T > 0.0:
            result.times.append(time_T)

    snapshot(0.0, data)
    cache: Dict[float, Any] = {}
    for index, eta in enumerate(block_amplitudes):
        eta = float(eta)
        if eta not in cache:
            block = block_effective_hamiltonian(eta, params, order)
            cache[eta] = (block, block_unitary(block) if order == 2 else None)
        block, u = cache[eta]
        if order == 2:
            data = u @ data if pure else u @ data @ u.conj().T
        elif pure:
            data = expm_apply(block.hamiltonian, data, block.generator_time, check_hermitian=False)
        else:
            half = expm_apply(block.hamiltonian, data, block.generator_time, check_hermitian=False)
            data = expm_apply(block.hamiltonian, half.conj().T, block.generator_time, check_hermitian=False).conj().T
        snapshot(5.0 * (index + 1), data)

    result.final_state = QuantumState(initial.space, initial.kind, data, validate=False)
    return result


def propagate_lindblad(pattern: DrivingPattern, initial: QuantumState, lindbladian: Lindbladian,
                       config: Optional[PropagationConfig] = None,
                       target: Optional[np.ndarray] = None) -> SimulationResult:
    """
    Master-equation evolution with the per-block effective generator, split
    against the dissipator at dt = T / lindblad_steps_per_period

    Args:
        pattern: driving timeline (only its block amplitudes enter)
        initial: composite pure or mixed state
        lindbladian: jump terms on the pattern's space
        config: Trotter order, step size and effective order
        target: optional cavity target vector for a fidelity trace

    Returns:
        SimulationResult in the ramp-compensated frame (final_frame_phase = 0)
    """
    config = config or PropagationConfig()
    params = pattern.params
    _check_initial(initial, params)
    if lindbladian.space != params.space:
        raise ContractError(f"Lindbladian lives on {lindbladian.space}, pattern on {params.space}")

    dt = params.period / config.lindblad_steps_per_period
    integrator = DensityIntegrator(lindbladian, dt, config.trotter_order)
    rho = initial.density_matrix()

    result = SimulationResult(
        kind="lindblad",
        times=[0.0],
        cavity_populations=[],
        final_state=None,
        provenance={
            "params": params.to_dict(),
            "block_amplitudes": list(pattern.block_amplitudes),
            "rates": list(lindbladian.rates),
            "lindbladian": lindbladian.label,
            "config": config.to_dict(),
        },
    )
    max_drift = 0.0

    def snapshot(time_T, rho):
        state = QuantumState(params.space, COMPOSITE, rho, validate=False)
        rho_c = partial_trace_mech(state).data
        result.cavity_populations.append(np.real(np.diag(rho_c)).copy())
        if config.keep_reduced_states:
            result.reduced_cavity_states.append(np.array(rho_c))
        if target is not None:
            reduced = QuantumState(FockSpace(params.cavity_dim, 1), CAVITY, rho_c, validate=False)
            result.fidelity_trace.append(fidelity(reduced, np.asarray(target, dtype=complex)))
        _leakage_flag(result, time_T, leakage_populations(state), config.leakage_threshold)
        if time_T > 0.0:
            result.times.append(time_T)

    snapshot(0.0, rho)
    for index, eta in enumerate(pattern.block_amplitudes):
        block = block_effective_hamiltonian(eta, params, config.effective_order)
        h = block.real_time_hamiltonian().matrix
        if block.hamiltonian.kind == CAVITY:
            h = np.kron(h, np.eye(params.mech_dim))
        rho = integrator.evolve(rho, block.physical_duration, h, key=(config.effective_order, float(eta)))

        drift = abs(float(np.real(np.trace(rho))) - 1.0)
        max_drift = max(max_drift, drift)
        if drift > SimulationConfig.TRACE_DRIFT_LIMIT:
            raise AccuracyError(f"Trace drifted by {drift:.2e} after block {index + 1}")
        smallest = float(np.min(np.linalg.eigvalsh(rho)))
        if smallest < -SimulationConfig.POSITIVITY_TOL:
            message = f"block {index + 1}: density-matrix eigenvalue {smallest:.2e}"
            result.warnings.append(message)
            logger.warning(f"Positivity violation at {message}")
        snapshot(5.0 * (index + 1), rho)

    result.provenance["max_trace_drift"] = max_drift
    if max_drift > 1e-6:
        result.warnings.append(f"trace drift {max_drift:.2e} above 1e-6")
    result.final_state = QuantumState(params.space, COMPOSITE, rho, validate=False)
    return result


def trotter_convergence(pattern: DrivingPattern, initial: QuantumState, lindbladian: Lindbladian,
                        config: Optional[PropagationConfig] = None, halvings: int = 2,
                        target: Optional[np.ndarray] = None) -> List[Dict[str, Any]]:
    """
    Repeat propagate_lindblad with the Trotter step halved `halvings` times

    Returns:
        one row per resolution: steps_per_period, dt, fidelity_l (with a target),
        fidelity_change against the previous row and trace_distance to the
        previous final cavity state
    """
    if halvings < 1:
        raise InvalidParameterError(f"halvings={halvings} must be at least 1")
    config = config or PropagationConfig()
    rows: List[Dict[str, Any]] = []
    previous: Optional[QuantumState] = None
    for level in range(halvings + 1):
        steps = config.lindblad_steps_per_period * 2 ** level
        result = propagate_lindblad(pattern, initial, lindbladian,
                                    replace(config, lindblad_steps_per_period=steps, keep_reduced_states=False))
        rho = result.final_cavity_state()
        row: Dict[str, Any] = {"steps_per_period": steps, "dt": pattern.params.period / steps,
                               "fidelity_l": None, "fidelity_change": None, "trace_distance": None}
        if target is not None:
            row["fidelity_l"] = fidelity(rho, np.asarray(target, dtype=complex))
            if rows:
                row["fidelity_change"] = abs(row["fidelity_l"] - rows[-1]["fidelity_l"])
        if previous is not None:
            row["trace_distance"] = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho.data - previous.data))))
        logger.info(f"Trotter dt={row['dt']:.4g}: trace distance {row['trace_distance']}")
        rows.append(row)
        previous = rho
    return rows
