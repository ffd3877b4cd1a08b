#!/usr/bin/env python3
"""
Driving Schedule
================

Timeline of the protocol: every block of five mechanical periods consists of
two driven windows of 2T, each followed by T/2 of free evolution. Each driven
period gets a phase from the compensating ramp so that first-order terms cancel
pairwise and the photon-number-linear shift is absorbed into a frame phase.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from fock_algebra import CAVITY, COMPOSITE, Operator
from model import DrivePulse, SystemParams
from sim_errors import ConstraintViolationError, ContractError, InvalidParameterError

logger = logging.getLogger(__name__)

DRIVEN = "driven"
FREE = "free"

DRIVEN_WINDOW_T = 2.0
FREE_WINDOW_T = 0.5
BLOCK_T = 2 * (DRIVEN_WINDOW_T + FREE_WINDOW_T)
PERIODS_PER_BLOCK = 4

PARITIES = ("even", "odd")
PATTERN_SCHEMA = "optomech-pattern/1"


@dataclass(frozen=True)
class Segment:
    """One window of the timeline; driven windows hold one pulse per period"""

    kind: str
    t_start: float
    duration: float
    pulses: Tuple[DrivePulse, ...] = ()

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    @property
    def eta(self) -> float:
        return self.pulses[0].eta if self.pulses else 0.0


@dataclass(frozen=True)
class PhaseLedger:
    """Per-driven-period drive phases psi_j, frame phases varphi_j and their increments"""

    psi: Tuple[float, ...]
    varphi: Tuple[float, ...]
    phi_steps: Tuple[float, ...]

    @property
    def n_periods(self) -> int:
        return len(self.psi)

    @property
    def final_frame_phase(self) -> float:
        """varphi_{N+1}, the free phase left after the last driven period"""
        if not self.varphi:
            return 0.0
        return self.varphi[-1] + self.phi_steps[-1]


@dataclass(frozen=True)
class DrivingPattern:
    """Complete driving timeline for a list of block amplitudes"""

    segments: Tuple[Segment, ...]
    block_amplitudes: Tuple[float, ...]
    params: SystemParams
    ledger: PhaseLedger
    eta_max: float
    parity: str = "even"

    @property
    def n_blocks(self) -> int:
        return len(self.block_amplitudes)

    @property
    def duration(self) -> float:
        """Total duration in units of T"""
        return sum(segment.duration for segment in self.segments)

    @property
    def pulses(self) -> Tuple[DrivePulse, ...]:
        return tuple(pulse for segment in self.segments for pulse in segment.pulses)

    @property
    def period_amplitudes(self) -> Tuple[float, ...]:
        return tuple(pulse.eta for pulse in self.pulses)

    @property
    def final_frame_phase(self) -> float:
        return self.ledger.final_frame_phase


def _check_amplitudes(block_amplitudes: Sequence[float], eta_max: Optional[float] = None):
    for index, eta in enumerate(block_amplitudes):
        if not np.isfinite(eta) or eta < 0.0:
            raise ConstraintViolationError(f"Block {index} amplitude {eta} must be a finite non-negative number")
        if eta_max is not None and eta > eta_max:
            raise ConstraintViolationError(f"Block {index} amplitude {eta} exceeds eta_max={eta_max}")


def phase_schedule(block_amplitudes: Sequence[float], k: float, parity: str = "even") -> PhaseLedger:
    """
    Drive phases of every driven period with the compensating ramp

    varphi_j = (4/3) pi k^2 sum_{l<j} eta_l^2 over driven periods; the drive phase is
    psi_j = varphi_j + pi on one period of each pair and psi_j = varphi_j on the other.

    Args:
        block_amplitudes: one eta per block (four driven periods each)
        k: coupling ratio g0 / omega_m
        parity: "even" puts the pi offset on the first period of each pair

    Returns:
        PhaseLedger over all driven periods
    """
    if k < 0.0:
        raise InvalidParameterError(f"k={k} must be non-negative")
    if parity not in PARITIES:
        raise InvalidParameterError(f"parity={parity!r} must be one of {PARITIES}")
    _check_amplitudes(block_amplitudes)

    ramp = (4.0 / 3.0) * np.pi * k ** 2
    first_offset = 0 if parity == "even" else 1

    psi: List[float] = []
    varphi: List[float] = []
    steps: List[float] = []
    accumulated = 0.0
    for eta in block_amplitudes:
        for period in range(PERIODS_PER_BLOCK):
            offset = np.pi if (period % 2) == first_offset else 0.0
            varphi.append(ramp * accumulated)
            psi.append(offset + ramp * accumulated)
            steps.append(ramp * eta ** 2)
            accumulated += eta ** 2
    return PhaseLedger(tuple(psi), tuple(varphi), tuple(steps))


def build_pattern(block_amplitudes: Sequence[float], params: SystemParams, eta_max: float,
                  parity: str = "even") -> DrivingPattern:
    """Timeline of [driven 2T, free T/2, driven 2T, free T/2] per block"""
    if len(block_amplitudes) == 0:
        raise InvalidParameterError("A driving pattern needs at least one block")
    if eta_max < 0.0:
        raise InvalidParameterError(f"eta_max={eta_max} must be non-negative")
    _check_amplitudes(block_amplitudes, eta_max)

    amplitudes = tuple(float(eta) for eta in block_amplitudes)
    ledger = phase_schedule(amplitudes, params.k, parity)

    segments: List[Segment] = []
    clock = 0.0
    period_index = 0
    for eta in amplitudes:
        for _ in range(2):
            pulses = []
            for offset in range(int(DRIVEN_WINDOW_T)):
                pulses.append(DrivePulse(eta, ledger.psi[period_index], clock + offset, 1.0))
                period_index += 1
            segments.append(Segment(DRIVEN, clock, DRIVEN_WINDOW_T, tuple(pulses)))
            clock += DRIVEN_WINDOW_T
            segments.append(Segment(FREE, clock, FREE_WINDOW_T))
            clock += FREE_WINDOW_T

    return DrivingPattern(tuple(segments), amplitudes, params, ledger, float(eta_max), parity)


@dataclass
class CancellationReport:
    """Residuals of the phase conditions for a driving pattern"""

    first_moment: float
    zeta_prime: complex
    chi: float
    n_periods: int
    degenerate: bool = False
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "first_moment": self.first_moment,
            "zeta_prime_real": float(np.real(self.zeta_prime)),
            "zeta_prime_imag": float(np.imag(self.zeta_prime)),
            "chi": self.chi,
            "n_periods": self.n_periods,
            "degenerate": self.degenerate,
            "notes": list(self.notes),
        }


def validate_cancellation(pattern: DrivingPattern) -> CancellationReport:
    """First-moment residual, zeta' and chi of the driven periods of a pattern"""
    etas = np.array(pattern.period_amplitudes)
    relative = np.array(pattern.ledger.psi) - np.array(pattern.ledger.varphi)
    n = len(etas)

    first_moment = float(abs(np.sum(etas * np.exp(-1j * relative))))
    zeta_prime = complex(np.sum(etas ** 2 * np.exp(-2j * relative)) / n)
    chi = float(np.sum(etas ** 2) / n)

    report = CancellationReport(first_moment, zeta_prime, chi, n)
    if abs(zeta_prime) < 1e-12:
        report.degenerate = True
        report.notes.append("all amplitudes vanish; second-order drive term is zero")
        logger.warning("Degenerate driving pattern: zeta' vanishes")
    if first_moment > 1e-12:
        report.notes.append(f"first-moment residual {first_moment:.3e} above 1e-12")
        logger.warning(f"First-moment residual {first_moment:.3e} exceeds 1e-12")
    return report


def _frame_rotation(phase: float, generator: Operator) -> np.ndarray:
    dc = generator.space.cavity_dim
    rotation = np.diag(np.exp(1j * phase * np.arange(dc)))
    if generator.kind == COMPOSITE:
        return np.kron(rotation, np.eye(generator.space.mech_dim))
    if generator.kind != CAVITY:
        raise ContractError("Phase frames act on cavity or composite generators")
    return rotation


def compose_with_phase_frames(pattern: DrivingPattern,
                              period_generator: Callable[[float, float], Operator],
                              period_time: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Multi-period propagator written with explicit phase frames,

        prod_j exp(-i H(psi_j) T) = V_{varphi_{N+1}} prod_j V_{step_j}^dag exp(-i H(psi_j - varphi_j) T),

    alongside the direct ordered product

    Args:
        pattern: driving pattern supplying the ledger
        period_generator: (eta, psi) -> per-period effective generator
        period_time: duration each generator acts for (defaults to T)

    Returns:
        (framed product, direct product) as dense matrices
    """
    period_time = pattern.params.period if period_time is None else period_time
    ledger = pattern.ledger
    etas = pattern.period_amplitudes

    sample = period_generator(etas[0], ledger.psi[0])
    framed = np.eye(sample.dim, dtype=complex)
    direct = np.eye(sample.dim, dtype=complex)
    for eta, psi, varphi, step in zip(etas, ledger.psi, ledger.varphi, ledger.phi_steps):
        generator = period_generator(eta, psi)
        reduced = period_generator(eta, psi - varphi)
        direct = scipy.linalg.expm(-1j * period_time * generator.matrix) @ direct
        framed = (_frame_rotation(step, reduced).conj().T
                  @ scipy.linalg.expm(-1j * period_time * reduced.matrix) @ framed)
    framed = _frame_rotation(ledger.final_frame_phase, sample) @ framed
    return framed, direct


def fit_number_generator(propagator: Operator, time: float, levels: int = 6,
                         reference: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Fit c0 + c1 n + c2 n^2 to the diagonal of the generator G of a cavity
    propagator U = exp(-i G time)

    Args:
        propagator: cavity unitary
        time: duration the generator acts for
        levels: number of low Fock levels entering the fit
        reference: approximate generator diagonal selecting the logarithm branch
            of each eigenphase (principal branch when omitted)

    Returns:
        array [c0, c1, c2]
    """
    if propagator.kind != CAVITY:
        raise ContractError("fit_number_generator needs a cavity propagator")
    if levels < 3 or levels > propagator.dim:
        raise InvalidParameterError(f"levels={levels} must lie in [3, {propagator.dim}]")

    schur, vectors = scipy.linalg.schur(propagator.matrix, output="complex")
    phases = -np.angle(np.diag(schur))
    if reference is not None:
        weights = np.abs(vectors) ** 2
        estimate = time * (weights.T @ np.asarray(reference, dtype=float))
        phases = estimate + np.angle(np.exp(1j * (phases - estimate)))
    generator = (vectors * (phases / time)) @ vectors.conj().T

    n = np.arange(levels, dtype=float)
    diagonal = np.real(np.diag(generator))[:levels]
    c2, c1, c0 = np.polyfit(n, diagonal, 2)
    return np.array([c0, c1, c2])


# Serialization -----------------------------------------------------------------

def pattern_to_dict(pattern: DrivingPattern) -> Dict[str, Any]:
    return {
        "schema": PATTERN_SCHEMA,
        "params": pattern.params.to_dict(),
        "eta_max": pattern.eta_max,
        "parity": pattern.parity,
        "block_amplitudes": list(pattern.block_amplitudes),
        "segments": [
            {
                "kind": segment.kind,
                "t_start_T": segment.t_start,
                "duration_T": segment.duration,
                "eta": segment.eta,
                "psi": [pulse.psi for pulse in segment.pulses],
            }
            for segment in pattern.segments
        ],
    }


def pattern_to_json(pattern: DrivingPattern) -> str:
    """Serialize a pattern; floats use their shortest round-tripping repr"""
    return json.dumps(pattern_to_dict(pattern), indent=2)


def pattern_from_json(text: str) -> DrivingPattern:
    """Rebuild a pattern and check it against the stored segments"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ContractError(f"Pattern is not valid JSON: {e}")
    if data.get("schema") != PATTERN_SCHEMA:
        raise ContractError(f"Unsupported pattern schema {data.get('schema')!r}")

    p = data["params"]
    params = SystemParams(k=p["k"], omega_m=p["omega_m"], omega_c_ratio=p["omega_c_ratio"],
                          cavity_dim=p["cavity_dim"], mech_dim=p["mech_dim"])
    pattern = build_pattern(data["block_amplitudes"], params, data["eta_max"], data.get("parity", "even"))

    stored = data.get("segments", [])
    rebuilt = pattern_to_dict(pattern)["segments"]
    if stored != rebuilt:
        raise ContractError("Stored segments do not match the schedule rebuilt from the block amplitudes")
    return pattern
