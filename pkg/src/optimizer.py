#!/usr/bin/env python3
"""
Pulse Optimizer
===============

Bounded derivative-free search over the per-block amplitudes eta_j (and the
relative phase theta of superposition targets) against the order-2 cavity-only
effective propagation, with seeded multistart restarts.
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from config.sim_config import SimulationConfig
from fock_algebra import CAVITY, FockSpace, QuantumState, fock_vector, ground_state
from metrics import TargetState, best_superposition_theta, fidelity_fn, wrap_phase
from model import SystemParams, block_effective_hamiltonian
from propagation import PropagationConfig, block_unitary, propagate_effective, propagate_exact
from schedule import build_pattern
from sim_errors import ConstraintViolationError, InvalidParameterError

logger = logging.getLogger(__name__)

SCORES = ("exact", "order3", "order2")


@dataclass(frozen=True)
class OptimizationProblem:
    """Search domain [0, eta_max]^n_blocks (x theta for superposition targets)"""

    target: TargetState
    n_blocks: int
    eta_max: float = SimulationConfig.ETA_MAX
    k: float = SimulationConfig.K
    seed: int = SimulationConfig.SEED
    restarts: int = SimulationConfig.RESTARTS
    cavity_dim: int = SimulationConfig.CAVITY_DIM
    mech_dim: int = SimulationConfig.MECH_DIM
    max_evaluations: int = SimulationConfig.MAX_EVALUATIONS
    improvement_tol: float = SimulationConfig.IMPROVEMENT_TOL
    patience: int = SimulationConfig.RESTART_PATIENCE
    workers: int = SimulationConfig.WORKERS
    parity: str = SimulationConfig.FIRST_PERIOD_PARITY

    def __post_init__(self):
        if self.n_blocks < 1:
            raise InvalidParameterError(f"n_blocks={self.n_blocks} must be at least 1")
        if self.eta_max < 0.0:
            raise InvalidParameterError(f"eta_max={self.eta_max} must be non-negative")
        if self.restarts < 1:
            raise InvalidParameterError(f"restarts={self.restarts} must be at least 1")
        if self.max_evaluations < 1:
            raise InvalidParameterError(f"max_evaluations={self.max_evaluations} must be positive")
        if self.patience < 0:
            raise InvalidParameterError(f"patience={self.patience} must be non-negative")

    @property
    def params(self) -> SystemParams:
        return SystemParams(k=self.k, cavity_dim=self.cavity_dim, mech_dim=self.mech_dim)

    @property
    def optimize_theta(self) -> bool:
        return self.target.has_free_phase

    @property
    def dimension(self) -> int:
        return self.n_blocks + (1 if self.optimize_theta else 0)

    def bounds(self) -> List[Tuple[Optional[float], Optional[float]]]:
        bounds: List[Tuple[Optional[float], Optional[float]]] = [(0.0, self.eta_max)] * self.n_blocks
        if self.optimize_theta:
            bounds.append((None, None))
        return bounds

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["target"] = {"kind": self.target.kind, "n": self.target.n, "theta": self.target.theta}
        return data


@dataclass
class OptimizationReport:
    """Best pulse of a multistart search"""

    best_amplitudes: List[float]
    best_theta: Optional[float]
    objective_trace: List[float]
    evaluations: int
    achieved_fidelity_order2: float
    achieved_fidelity_exact: Optional[float] = None
    best_restart: int = 0
    restart_objectives: List[float] = field(default_factory=list)
    stopped_early: bool = False
    problem: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self, path: Optional[str] = None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path:
            with open(path, "w") as handle:
                handle.write(text)
        return text

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OptimizationReport":
        return cls(**{key: data[key] for key in cls.__dataclass_fields__ if key in data})


def _split(x: Sequence[float], problem: OptimizationProblem) -> Tuple[np.ndarray, Optional[float]]:
    x = np.asarray(x, dtype=float)
    if len(x) != problem.dimension:
        raise ConstraintViolationError(f"Expected {problem.dimension} coordinates, got {len(x)}")
    theta = wrap_phase(x[-1]) if problem.optimize_theta else None
    return x[:problem.n_blocks], theta


@lru_cache(maxsize=4096)
def _order2_block_unitary(eta: float, params: SystemParams) -> np.ndarray:
    """exp(-i H T) of the order-2 cavity generator, cached per unique eta"""
    u = block_unitary(block_effective_hamiltonian(eta, params, 2))
    u.setflags(write=False)
    return u


def _final_cavity_vector(amplitudes: Sequence[float], params: SystemParams) -> np.ndarray:
    state = fock_vector(0, params.cavity_dim)
    for eta in amplitudes:
        state = _order2_block_unitary(float(eta), params) @ state
    return state


def objective(amplitudes: Sequence[float], problem: OptimizationProblem,
              theta: Optional[float] = None) -> float:
    """
    1 - F of the order-2 cavity propagation from |0> against the target

    Args:
        amplitudes: block amplitudes, optionally followed by theta for superposition targets
        problem: search definition
        theta: explicit superposition phase (overrides a trailing coordinate)

    Returns:
        infidelity in [0, 1]
    """
    x = np.asarray(amplitudes, dtype=float)
    if problem.optimize_theta and len(x) == problem.dimension:
        etas, coordinate = _split(x, problem)
        theta = coordinate if theta is None else theta
    else:
        etas = x
    if len(etas) != problem.n_blocks:
        raise ConstraintViolationError(f"Expected {problem.n_blocks} amplitudes, got {len(etas)}")
    if np.any(~np.isfinite(etas)) or np.any(etas < 0.0) or np.any(etas > problem.eta_max):
        raise ConstraintViolationError(f"Amplitudes {etas.tolist()} leave [0, {problem.eta_max}]")

    target = problem.target.with_theta(theta) if (problem.optimize_theta and theta is not None) else problem.target
    final = _final_cavity_vector(etas, problem.params)
    value = abs(np.vdot(target.vector(problem.cavity_dim), final))
    return float(1.0 - min(value, 1.0))


def _clipped_objective(x: np.ndarray, problem: OptimizationProblem) -> float:
    clipped = np.array(x, dtype=float)
    clipped[:problem.n_blocks] = np.clip(clipped[:problem.n_blocks], 0.0, problem.eta_max)
    return objective(clipped, problem)


def _run_restart(args: Tuple[OptimizationProblem, int, np.random.SeedSequence, int]) -> Dict[str, Any]:
    problem, index, seed_seq, budget = args
    rng = np.random.default_rng(seed_seq)
    x0 = rng.uniform(0.0, problem.eta_max, problem.n_blocks)
    if problem.optimize_theta:
        x0 = np.append(x0, rng.uniform(-np.pi, np.pi))

    result = minimize(
        _clipped_objective, x0, args=(problem,), method="Nelder-Mead", bounds=problem.bounds(),
        options={"maxfev": budget, "fatol": problem.improvement_tol, "xatol": 1e-6, "adaptive": True},
    )
    x = np.array(result.x, dtype=float)
    x[:problem.n_blocks] = np.clip(x[:problem.n_blocks], 0.0, problem.eta_max)
    return {"index": index, "x": x.tolist(), "value": float(_clipped_objective(x, problem)),
            "evaluations": int(result.nfev)}


def _collect_restarts(problem: OptimizationProblem, jobs: List[Tuple],
                      run_chunk: Callable[[List[Tuple]], List[Dict[str, Any]]]) -> Tuple[List[Dict[str, Any]], bool]:
    """
    Run restarts in index order, `workers` at a time, until `patience` restarts
    in a row improve the best objective by less than improvement_tol or the
    objective reaches improvement_tol. Outcomes past the stopping restart are
    dropped so the result does not depend on the worker count.
    """
    chunk_size = max(problem.workers, 1)
    outcomes: List[Dict[str, Any]] = []
    best = float("inf")
    stale = 0
    for start in range(0, len(jobs), chunk_size):
        for outcome in sorted(run_chunk(jobs[start:start + chunk_size]), key=lambda o: o["index"]):
            outcomes.append(outcome)
            stale = stale + 1 if best - outcome["value"] < problem.improvement_tol else 0
            best = min(best, outcome["value"])
            if best <= problem.improvement_tol or (problem.patience and stale >= problem.patience):
                return outcomes, len(outcomes) < len(jobs)
    return outcomes, False


def _exact_fidelity(amplitudes: Sequence[float], target: TargetState, problem: OptimizationProblem,
                    config: Optional[PropagationConfig]) -> float:
    params = problem.params
    pattern = build_pattern(list(amplitudes), params, problem.eta_max, problem.parity)
    result = propagate_exact(pattern, ground_state(params.space), config)
    return fidelity_fn(result, target)


def optimize(problem: OptimizationProblem, run_exact: bool = True,
             exact_config: Optional[PropagationConfig] = None) -> OptimizationReport:
    """
    Multistart bounded Nelder-Mead search, deterministic for a fixed seed

    Args:
        problem: search definition
        run_exact: also replay the optimum with the exact propagator
        exact_config: propagation settings of that replay

    Returns:
        OptimizationReport of the best restart (lowest objective, lowest index on ties)
    """
    if problem.eta_max == 0.0:
        zeros = [0.0] * problem.n_blocks
        theta = 0.0 if problem.optimize_theta else None
        value = objective(zeros, problem, theta)
        print(f"⚠️ eta_max = 0: only the undriven pulse is admissible (objective {value:.6f})")
        report = OptimizationReport(zeros, theta, [value], 1, 1.0 - value, problem=problem.to_dict())
    else:
        budget = max(problem.max_evaluations // problem.restarts, problem.dimension + 1)
        seeds = np.random.SeedSequence(problem.seed).spawn(problem.restarts)
        jobs = [(problem, index, seed, budget) for index, seed in enumerate(seeds)]

        if problem.workers > 1:
            with ProcessPoolExecutor(max_workers=problem.workers) as pool:
                outcomes, stopped = _collect_restarts(problem, jobs, lambda chunk: list(pool.map(_run_restart, chunk)))
        else:
            outcomes, stopped = _collect_restarts(problem, jobs, lambda chunk: [_run_restart(job) for job in chunk])

        trace: List[float] = []
        best = None
        for outcome in outcomes:
            if best is None or outcome["value"] < best["value"]:
                best = outcome
            trace.append(best["value"])
            print(f"📊 Restart {outcome['index'] + 1}/{problem.restarts}: objective {outcome['value']:.6f} "
                  f"(best {best['value']:.6f})")
        if stopped:
            print(f"⏹️ Stopped after {len(outcomes)} restarts: no improvement above {problem.improvement_tol:g}")

        etas, theta = _split(best["x"], problem)
        report = OptimizationReport(
            best_amplitudes=[float(eta) for eta in etas],
            best_theta=theta,
            objective_trace=trace,
            evaluations=sum(o["evaluations"] for o in outcomes),
            achieved_fidelity_order2=0.0,
            best_restart=best["index"],
            restart_objectives=[o["value"] for o in outcomes],
            stopped_early=stopped,
            problem=problem.to_dict(),
        )

    target = problem.target
    effective = propagate_effective(report.best_amplitudes, problem.params,
                                    QuantumState(FockSpace(problem.cavity_dim, 1), CAVITY,
                                                 fock_vector(0, problem.cavity_dim)), order=2)
    if problem.optimize_theta:
        theta, value = best_superposition_theta(effective.final_cavity_state())
        report.best_theta = theta
        report.achieved_fidelity_order2 = value
        target = target.with_theta(theta)
    else:
        report.achieved_fidelity_order2 = fidelity_fn(effective, target)

    if run_exact:
        report.achieved_fidelity_exact = _exact_fidelity(report.best_amplitudes, target, problem, exact_config)
        print(f"✅ Exact-dynamics fidelity {report.achieved_fidelity_exact:.4f} "
              f"(order-2 {report.achieved_fidelity_order2:.4f})")
    return report


@dataclass
class SweepTable:
    """Best fidelity per (k, horizon) and the best k of every horizon"""

    score: str
    rows: List[Dict[str, Any]]
    best_k: Dict[int, float]

    def to_dict(self) -> Dict[str, Any]:
        return {"score": self.score, "rows": self.rows,
                "best_k": {str(h): k for h, k in self.best_k.items()}}


def _sweep_point(args: Tuple[OptimizationProblem, str, Optional[PropagationConfig]]) -> Dict[str, Any]:
    problem, score, exact_config = args
    report = optimize(problem, run_exact=(score == "exact"), exact_config=exact_config)
    target = problem.target.with_theta(report.best_theta) if report.best_theta is not None else problem.target
    if score == "exact":
        value = report.achieved_fidelity_exact
    elif score == "order3":
        params = problem.params
        cavity = QuantumState(FockSpace(params.cavity_dim, 1), CAVITY, fock_vector(0, params.cavity_dim))
        value = fidelity_fn(propagate_effective(report.best_amplitudes, params, cavity, order=3), target)
    else:
        value = report.achieved_fidelity_order2
    return {
        "k": problem.k,
        "horizon": problem.n_blocks,
        "fidelity": float(value),
        "fidelity_order2": report.achieved_fidelity_order2,
        "best_theta": report.best_theta,
        "amplitudes": report.best_amplitudes,
    }


def sweep_k(template: OptimizationProblem, k_grid: Sequence[float], horizon_grid: Sequence[int],
            score: str = "exact", workers: int = 1,
            exact_config: Optional[PropagationConfig] = None) -> SweepTable:
    """
    Optimize every (k, horizon) pair and pick the best k per horizon

    Args:
        template: problem supplying target, eta_max, seed and budgets
        k_grid: coupling ratios
        horizon_grid: horizons in blocks
        score: fidelity used for ranking: exact, order3 or order2
        workers: grid points evaluated concurrently

    Returns:
        SweepTable in (horizon, k) grid order
    """
    if len(k_grid) == 0 or len(horizon_grid) == 0:
        raise InvalidParameterError("sweep_k needs non-empty k and horizon grids")
    if score not in SCORES:
        raise InvalidParameterError(f"score={score!r} must be one of {SCORES}")
    if score == "order2":
        logger.warning("Order-2 scores grow monotonically with k; the best k is the largest grid value")

    jobs = [(replace(template, k=float(k), n_blocks=int(h), workers=1), score, exact_config)
            for h in horizon_grid for k in k_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]

    best_k: Dict[int, float] = {}
    for h in horizon_grid:
        candidates = [row for row in rows if row["horizon"] == int(h)]
        best = max(candidates, key=lambda row: row["fidelity"])
        best_k[int(h)] = best["k"]
        print(f"📊 Horizon {h} blocks: best k = {best['k']:.5f} (fidelity {best['fidelity']:.4f})")
    return SweepTable(score, rows, best_k)
