#!/usr/bin/env python3
"""
Verification Suite
==================

Registered invariant checks with measured residuals: Magnus quadrature
oracles, phase-frame algebra, half-period identities, cancellation
conditions, dissipator trace preservation and the perturbative-order scaling
of the block propagator.
"""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg

from dissipation import mechanical_thermalization, optical_loss
from fock_algebra import CAVITY, FockSpace, Operator, embed_cavity
from model import (
    SystemParams,
    half_period_adjoint_residual,
    half_period_propagator,
    HamiltonianTerms,
    interaction_frame_terms,
    m2_cavity,
    m2_interaction,
    magnus_first_order_numeric,
    magnus_second_order_closed_form,
    magnus_second_order_numeric,
    mech_only_block,
    odd_part_cancellation,
    phase_rotation,
    residual_modulo_identity,
)
from propagation import PropagationConfig, block_propagator_error
from schedule import build_pattern, compose_with_phase_frames, fit_number_generator, validate_cancellation
from sim_errors import OptomechError

logger = logging.getLogger(__name__)

MAGNUS_POINTS = ((0.0, 0.0), (4.0, 0.0), (4.0, np.pi / 3.0))
SCALING_KS = (1.0 / 13.0, 1.0 / 26.0, 1.0 / 52.0)


@dataclass
class CheckResult:
    """Outcome of one invariant check"""

    name: str
    passed: bool
    value: float
    threshold: str
    detail: str = ""


CHECKS: List[Tuple[str, Callable[[SystemParams], CheckResult], bool]] = []


def register_check(name: str, slow: bool = False):
    """Add a check function to the suite"""
    def decorator(func):
        CHECKS.append((name, func, slow))
        return func
    return decorator


def _oracle_params(params: SystemParams) -> SystemParams:
    return params.with_dims(8, 6)


@register_check("magnus_first_order_vanishes")
def check_first_order(params: SystemParams) -> CheckResult:
    small = _oracle_params(params)
    worst = 0.0
    for eta, psi in MAGNUS_POINTS:
        average = magnus_first_order_numeric(eta, psi, small)
        samples = np.linspace(0.0, small.period, 33)
        scale = max(
            float(np.max(np.abs(sum(c(np.array([t]))[0] * op.matrix
                                    for c, op in interaction_frame_terms(eta, psi, small)))))
            for t in samples
        )
        worst = max(worst, float(np.max(np.abs(average.matrix))) / scale)
    return CheckResult("magnus_first_order_vanishes", worst < 1e-6, worst, "< 1e-6 relative")


@register_check("magnus_second_order_matches")
def check_second_order(params: SystemParams) -> CheckResult:
    small = _oracle_params(params)
    worst = 0.0
    for eta, psi in MAGNUS_POINTS:
        numeric = magnus_second_order_numeric(eta, psi, small)
        worst = max(worst, residual_modulo_identity(numeric, magnus_second_order_closed_form(eta, psi, small), small))
    return CheckResult("magnus_second_order_matches", worst < 1e-4, worst, "< 1e-4 relative")


@register_check("mechanical_second_order_vanishes")
def check_mech_second_order(params: SystemParams) -> CheckResult:
    small = _oracle_params(params)
    worst = 0.0
    for eta, psi in MAGNUS_POINTS:
        numeric = magnus_second_order_numeric(eta, psi, small)
        block = mech_only_block(numeric, small)
        block = block - np.mean(np.diag(block)) * np.eye(block.shape[0])
        scale = small.omega_m * small.k ** 2 * max(1.0, eta ** 2)
        worst = max(worst, float(np.max(np.abs(block))) / scale)
    return CheckResult("mechanical_second_order_vanishes", worst < 1e-4, worst, "< 1e-4 relative")


@register_check("phase_conjugation_identity")
def check_phase_conjugation(params: SystemParams) -> CheckResult:
    small = _oracle_params(params)
    worst = 0.0
    for eta, psi in MAGNUS_POINTS:
        v = phase_rotation(psi, small.cavity_dim)
        cavity = v @ m2_cavity(eta, 0.0, small) @ v.dag()
        worst = max(worst, float(np.max(np.abs(cavity.matrix - m2_cavity(eta, psi, small).matrix))))
        vv = embed_cavity(v, small.mech_dim)
        interaction = vv @ m2_interaction(eta, 0.0, small) @ vv.dag()
        worst = max(worst, float(np.max(np.abs(interaction.matrix - m2_interaction(eta, psi, small).matrix))))
    return CheckResult("phase_conjugation_identity", worst < 1e-12, worst, "< 1e-12")


@register_check("half_period_adjoint_identity")
def check_half_period_adjoint(params: SystemParams) -> CheckResult:
    worst = 0.0
    for k in (1.0 / 16.0, 1.0 / 26.0):
        worst = max(worst, half_period_adjoint_residual(params.with_k(k).with_dims(12, 10)))
    return CheckResult("half_period_adjoint_identity", worst < 1e-10, worst, "< 1e-10")


@register_check("half_period_matches_free_evolution")
def check_half_period_exact(params: SystemParams) -> CheckResult:
    small = params.with_dims(6, 24)
    u = half_period_propagator(small).matrix
    static = HamiltonianTerms(small).static.toarray()
    exact = scipy.linalg.expm(-1j * static * small.period / 2.0)
    keep = np.array([i * small.mech_dim + j for i in range(small.cavity_dim) for j in range(4)])
    residual = float(np.max(np.abs((u - exact)[:, keep])))
    return CheckResult("half_period_matches_free_evolution", residual < 1e-8, residual, "< 1e-8 on low phonon states")


@register_check("odd_part_cancellation")
def check_odd_cancellation(params: SystemParams) -> CheckResult:
    small = params.with_k(0.0).with_dims(6, 8)
    conjugated, odd = odd_part_cancellation(4.0, small)
    residual = float(np.max(np.abs(conjugated.matrix + odd.matrix)))
    return CheckResult("odd_part_cancellation", residual < 1e-10, residual, "< 1e-10 at k = 0")


@register_check("first_moment_cancellation")
def check_cancellation(params: SystemParams) -> CheckResult:
    pattern = build_pattern([4.0] * 16, params.with_k(1.0 / 26.0), 4.0)
    report = validate_cancellation(pattern)
    zeta_gap = abs(abs(report.zeta_prime) - 16.0)
    passed = report.first_moment < 1e-12 and zeta_gap < 1e-6
    return CheckResult("first_moment_cancellation", passed, report.first_moment, "< 1e-12",
                       f"|zeta'| - eta^2 = {zeta_gap:.2e}")


def _period_generator(params: SystemParams):
    def generator(eta: float, psi: float) -> Operator:
        return magnus_second_order_closed_form(eta, psi, params)
    return generator


@register_check("phase_frame_composition")
def check_frame_composition(params: SystemParams) -> CheckResult:
    small = params.with_k(1.0 / 26.0).with_dims(5, 4)
    pattern = build_pattern([4.0, 2.5], small, 4.0)
    framed, direct = compose_with_phase_frames(pattern, _period_generator(small))
    residual = float(np.max(np.abs(framed - direct)))
    return CheckResult("phase_frame_composition", residual < 1e-10, residual, "< 1e-10")


def ramp_suppression(eta: float, params: SystemParams, levels: int = 6) -> Tuple[float, float]:
    """
    n_c-linear coefficient of the cavity generator of one block with the
    ramped and with the bare {pi, 0} phase schedule
    """
    small = params.with_dims(12, 1)
    pattern = build_pattern([eta], small, eta)
    period = small.period

    def cavity_generator(psi: float) -> np.ndarray:
        return 0.5 * small.omega_m * small.k ** 2 * m2_cavity(eta, psi, small).matrix

    ramped = np.eye(small.cavity_dim, dtype=complex)
    bare = np.eye(small.cavity_dim, dtype=complex)
    for index, psi in enumerate(pattern.ledger.psi):
        ramped = scipy.linalg.expm(-1j * period * cavity_generator(psi)) @ ramped
        bare_psi = np.pi if index % 2 == 0 else 0.0
        bare = scipy.linalg.expm(-1j * period * cavity_generator(bare_psi)) @ bare

    phase = pattern.final_frame_phase
    n = np.arange(small.cavity_dim, dtype=float)
    ramped = np.diag(np.exp(-1j * phase * n)) @ ramped
    time = period * len(pattern.ledger.psi)
    reference = np.real(np.diag(cavity_generator(0.0)))
    ramped_fit = fit_number_generator(Operator(FockSpace(small.cavity_dim, 1), CAVITY, ramped), time, levels,
                                      reference + phase * n / time)
    bare_fit = fit_number_generator(Operator(FockSpace(small.cavity_dim, 1), CAVITY, bare), time, levels, reference)
    return float(ramped_fit[1]), float(bare_fit[1])


@register_check("linear_shift_suppressed")
def check_ramp(params: SystemParams) -> CheckResult:
    ramped, bare = ramp_suppression(4.0, params.with_k(1.0 / 26.0))
    ratio = abs(bare) / max(abs(ramped), 1e-300)
    return CheckResult("linear_shift_suppressed", ratio >= 10.0, ratio, ">= 10x",
                       f"ramped c1 = {ramped:.3e}, bare c1 = {bare:.3e}")


@register_check("dissipator_trace_free")
def check_dissipator(params: SystemParams) -> CheckResult:
    space = FockSpace(5, 4)
    rng = np.random.default_rng(7)
    x = rng.normal(size=(20, 20)) + 1j * rng.normal(size=(20, 20))
    rho = x @ x.conj().T
    rho /= np.trace(rho)
    generator = optical_loss(1e-3, space) + mechanical_thermalization(1e-3, 1.0, 1.0 / 26.0, space)
    residual = abs(np.trace(generator.apply(rho)))
    return CheckResult("dissipator_trace_free", residual < 1e-12, float(residual), "< 1e-12")


def scaling_slope(params: SystemParams, eta: float = 4.0, order: int = 3,
                  ks: Tuple[float, ...] = SCALING_KS,
                  config: Optional[PropagationConfig] = None) -> Tuple[float, List[float]]:
    """Log-log slope of the block-propagator error against k"""
    small = params.with_dims(10, 8)
    errors = [block_propagator_error(eta, small.with_k(k), order, config) for k in ks]
    slope = float(np.polyfit(np.log(ks), np.log(errors), 1)[0])
    return slope, errors


@register_check("block_error_scaling", slow=True)
def check_scaling(params: SystemParams) -> CheckResult:
    slope, errors = scaling_slope(params)
    detail = ", ".join(f"k=1/{1.0 / k:.0f}: {e:.2e}" for k, e in zip(SCALING_KS, errors))
    return CheckResult("block_error_scaling", 3.5 <= slope <= 4.5, slope, "slope in [3.5, 4.5]", detail)


def run_checks(params: SystemParams, include_slow: bool = True,
               names: Optional[List[str]] = None) -> List[CheckResult]:
    """Run the registered checks; an exception counts as a failure with its message"""
    results = []
    for name, func, slow in CHECKS:
        if names and name not in names:
            continue
        if slow and not include_slow:
            continue
        try:
            result = func(params)
        except OptomechError as e:
            logger.error(f"Check {name} raised {type(e).__name__}: {e}")
            result = CheckResult(name, False, float("nan"), "-", f"{type(e).__name__}: {e}")
        status = "✅ PASS" if result.passed else "❌ FAIL"
        print(f"{status}  {result.name:<36} {result.value:>12.3e}  ({result.threshold}) {result.detail}")
        results.append(result)
    return results


def write_diagnostics(results: List[CheckResult], path: str, params: SystemParams,
                      extra: Optional[Dict[str, Any]] = None) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    data = {
        "params": params.to_dict(),
        "passed": all(r.passed for r in results),
        "checks": [
            {**asdict(r), "value": None if not np.isfinite(r.value) else r.value}
            for r in results
        ],
    }
    if extra:
        data.update(extra)
    with open(path, "w") as handle:
        json.dump(data, handle, indent=2)
    return path
