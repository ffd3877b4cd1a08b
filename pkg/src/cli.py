#!/usr/bin/env python3
"""
Command Line Interface
======================

Batch entry point for the state-preparation experiments:

    optimize     search block amplitudes and replay the best pulse exactly
    simulate     replay a stored or JSON pulse with a chosen propagator
    noise-sweep  F_l / F_i tables over thermal, optical or mechanical noise
    convergence  Trotter step-halving table of the dissipative replay
    sweep-k      best coupling ratio per horizon
    verify       registered invariant checks
    pulses       list, summarize or export the pulse store

Every output carries the sha256 hash of the experiment configuration.
"""

import argparse
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from config.sim_config import SimulationConfig
from dissipation import mechanical_thermalization, optical_loss, zero_lindbladian
from fock_algebra import CAVITY, FockSpace, QuantumState, fock_state, fock_vector, ground_state, product_state, thermal_state
from metrics import TargetState, best_superposition_theta, fidelity_fi, fidelity_fl, fidelity_fn, population_parity_ratio
from model import SystemParams
from optimizer import OptimizationProblem, OptimizationReport, optimize, sweep_k
from propagation import PropagationConfig, propagate_effective, propagate_exact, propagate_lindblad, trotter_convergence
from pulse_library import PulseLibrary
from schedule import build_pattern, pattern_to_json, validate_cancellation
from sim_errors import OptomechError, UsageError
from verification import run_checks, write_diagnostics

logger = logging.getLogger(__name__)

COMMANDS = ("optimize", "simulate", "noise-sweep", "convergence", "sweep-k", "verify", "pulses")
NOISE_KINDS = ("thermal", "optical", "mechanical")
NOISE_SCHEMA = f"optomech-noise/{SimulationConfig.CSV_SCHEMA_VERSION}"
SWEEP_SCHEMA = f"optomech-sweep/{SimulationConfig.CSV_SCHEMA_VERSION}"
CONVERGENCE_SCHEMA = f"optomech-convergence/{SimulationConfig.CSV_SCHEMA_VERSION}"

DEFAULT_NTH = [float(x) for x in np.linspace(0.0, 2.0, 9)]
DEFAULT_KAPPA = [float(x) for x in np.logspace(-6, -2, 9)]
DEFAULT_GAMMA = [float(x) for x in np.logspace(-6, -2, 9)]
DEFAULT_NBAR = [1.0, 10.0, 100.0]

# Fields that do not change what a run computes
UNHASHED_FIELDS = ("out", "workers", "db_path")


@dataclass
class ExperimentConfig:
    """All parameters of one CLI run; rates in omega_m units, times in T units"""

    command: str = "optimize"
    target: str = "fock2"
    k: float = SimulationConfig.K
    eta_max: float = SimulationConfig.ETA_MAX
    horizon: int = SimulationConfig.HORIZON_BLOCKS
    seed: int = SimulationConfig.SEED
    restarts: int = SimulationConfig.RESTARTS
    max_evaluations: int = SimulationConfig.MAX_EVALUATIONS
    omega_c_ratio: int = SimulationConfig.OMEGA_C_RATIO
    cavity_dim: int = SimulationConfig.CAVITY_DIM
    mech_dim: int = SimulationConfig.MECH_DIM
    dissipative_cavity_dim: int = SimulationConfig.DISSIPATIVE_CAVITY_DIM
    dissipative_mech_dim: int = SimulationConfig.DISSIPATIVE_MECH_DIM
    frame: str = SimulationConfig.FRAME
    integrator: str = SimulationConfig.INTEGRATOR
    steps_per_period: int = SimulationConfig.STEPS_PER_PERIOD
    lindblad_steps_per_period: int = SimulationConfig.LINDBLAD_STEPS_PER_PERIOD
    trotter_order: int = SimulationConfig.TROTTER_ORDER
    halvings: int = 2
    parity: str = SimulationConfig.FIRST_PERIOD_PARITY
    order: str = "exact"
    noise: str = "thermal"
    nth: List[float] = field(default_factory=lambda: list(DEFAULT_NTH))
    kappa: List[float] = field(default_factory=lambda: list(DEFAULT_KAPPA))
    gamma: List[float] = field(default_factory=lambda: list(DEFAULT_GAMMA))
    nbar: List[float] = field(default_factory=lambda: list(DEFAULT_NBAR))
    curves: List[str] = field(default_factory=lambda: sorted(SimulationConfig.PROTOCOL_CURVES))
    k_grid: List[float] = field(default_factory=list)
    horizon_grid: List[int] = field(default_factory=list)
    score: str = "exact"
    pulse_file: Optional[str] = None
    include_slow: bool = True
    checks: List[str] = field(default_factory=list)
    workers: int = SimulationConfig.WORKERS
    out: str = SimulationConfig.OUTPUT_DIR
    db_path: str = SimulationConfig.PULSE_DB_PATH

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as handle:
                data = json.load(handle)
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"Cannot read config file {path}: {e}")
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise UsageError(f"Unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def with_overrides(self, overrides: Dict[str, Any]) -> "ExperimentConfig":
        return replace(self, **{key: value for key, value in overrides.items() if value is not None})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @property
    def config_hash(self) -> str:
        """sha256 of the canonical JSON of every field that affects results"""
        data = {key: value for key, value in self.to_dict().items() if key not in UNHASHED_FIELDS}
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()

    def validate(self):
        if self.command not in COMMANDS:
            raise UsageError(f"Unknown command {self.command!r}")
        if self.horizon < 1:
            raise UsageError(f"horizon={self.horizon} must be at least one block")
        if self.eta_max < 0.0:
            raise UsageError(f"eta_max={self.eta_max} must be non-negative")
        if not 0.0 <= self.k < 1.0:
            raise UsageError(f"k={self.k} must lie in [0, 1)")
        if self.noise not in NOISE_KINDS:
            raise UsageError(f"noise={self.noise!r} must be one of {NOISE_KINDS}")
        if self.order not in ("exact", "2", "3"):
            raise UsageError(f"order={self.order!r} must be exact, 2 or 3")
        if self.halvings < 1:
            raise UsageError(f"halvings={self.halvings} must be at least 1")
        if self.workers < 1:
            raise UsageError(f"workers={self.workers} must be positive")
        for name in ("nth", "kappa", "gamma", "nbar"):
            values = getattr(self, name)
            if any(v < 0.0 for v in values):
                raise UsageError(f"{name} values {values} must be non-negative")
        for label in self.curves:
            if SimulationConfig.get_curve(label) is None:
                raise UsageError(f"Unknown protocol curve {label!r}; expected one of "
                                 f"{sorted(SimulationConfig.PROTOCOL_CURVES)}")
        try:
            TargetState.from_label(self.target)
        except (OptomechError, ValueError) as e:
            raise UsageError(str(e))

    # Derived objects ------------------------------------------------------------

    @property
    def target_state(self) -> TargetState:
        return TargetState.from_label(self.target)

    def params(self, dissipative: bool = False, k: Optional[float] = None) -> SystemParams:
        cavity_dim = self.dissipative_cavity_dim if dissipative else self.cavity_dim
        mech_dim = self.dissipative_mech_dim if dissipative else self.mech_dim
        return SystemParams(k=self.k if k is None else k, omega_c_ratio=self.omega_c_ratio,
                            cavity_dim=cavity_dim, mech_dim=mech_dim)

    def propagation_config(self, frame: Optional[str] = None) -> PropagationConfig:
        return PropagationConfig(
            steps_per_period=self.steps_per_period,
            frame=frame or self.frame,
            integrator=self.integrator,
            lindblad_steps_per_period=self.lindblad_steps_per_period,
            trotter_order=self.trotter_order,
        )

    def problem(self, n_blocks: Optional[int] = None) -> OptimizationProblem:
        return OptimizationProblem(
            target=self.target_state,
            n_blocks=self.horizon if n_blocks is None else n_blocks,
            eta_max=self.eta_max,
            k=self.k,
            seed=self.seed,
            restarts=self.restarts,
            cavity_dim=self.cavity_dim,
            mech_dim=self.mech_dim,
            max_evaluations=self.max_evaluations,
            workers=self.workers,
            parity=self.parity,
        )


def _provenance(config: ExperimentConfig) -> Dict[str, Any]:
    return {
        "config": config.to_dict(),
        "config_hash": config.config_hash,
        "code_version": SimulationConfig.VERSION,
        "defaults": SimulationConfig.as_dict(),
    }


def _stem(config: ExperimentConfig, prefix: str) -> str:
    label = config.target.replace(":", "_")
    return f"{prefix}_{label}_k{config.k:.5f}_h{config.horizon}_{config.config_hash[:8]}"


def _write_json(path: Path, data: Dict[str, Any]) -> str:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as handle:
        json.dump(data, handle, indent=2, default=str)
    return str(path)


# Pulses ------------------------------------------------------------------------

def load_pulse(config: ExperimentConfig, k: Optional[float] = None,
               horizon: Optional[int] = None) -> OptimizationReport:
    """
    Pulse from --pulse (report JSON or bare amplitude list) or from the pulse store

    Raises:
        UsageError: the file is missing or unreadable, or no stored pulse matches
    """
    if config.pulse_file:
        path = Path(config.pulse_file)
        if not path.exists():
            raise UsageError(f"Pulse file {path} does not exist")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise UsageError(f"Pulse file {path} is not valid JSON: {e}")
        if isinstance(data, list):
            return OptimizationReport([float(x) for x in data], None, [], 0, float("nan"),
                                      problem={"k": config.k, "n_blocks": len(data), "eta_max": config.eta_max})
        if "best_amplitudes" not in data:
            raise UsageError(f"Pulse file {path} has no best_amplitudes")
        return OptimizationReport.from_dict(data)

    k = config.k if k is None else k
    horizon = config.horizon if horizon is None else horizon
    report = PulseLibrary(config.db_path).find_pulse(config.target_state.label, k, horizon, config.eta_max)
    if report is None:
        raise UsageError(f"No stored {config.target} pulse for k={k:.5f}, horizon={horizon}; "
                         f"run optimize first or pass --pulse")
    logger.info(f"Loaded stored pulse for k={k:.5f}, horizon={horizon}: {len(report.best_amplitudes)} blocks")
    return report


def _pulse_target(config: ExperimentConfig, report: OptimizationReport) -> TargetState:
    target = config.target_state
    if target.has_free_phase and report.best_theta is not None:
        return target.with_theta(report.best_theta)
    return target


def _pulse_eta_max(config: ExperimentConfig, report: OptimizationReport) -> float:
    stored = report.problem.get("eta_max") if report.problem else None
    eta_max = config.eta_max if stored is None else float(stored)
    return max(eta_max, max(report.best_amplitudes, default=0.0))


# Commands ------------------------------------------------------------------------

def cmd_optimize(config: ExperimentConfig) -> Dict[str, str]:
    """Optimize, store the pulse and replay it with the exact propagator"""
    problem = config.problem()
    print(f"🎯 Optimizing {config.target}: k={config.k:.5f}, horizon={config.horizon}, "
          f"eta_max={config.eta_max}, restarts={config.restarts}")
    report = optimize(problem, run_exact=False)

    target = _pulse_target(config, report)
    params = config.params()
    pattern = build_pattern(report.best_amplitudes, params, config.eta_max, config.parity)
    result = propagate_exact(pattern, ground_state(params.space), config.propagation_config(),
                             target=target.vector(params.cavity_dim))
    report.achieved_fidelity_exact = fidelity_fn(result, target)
    print(f"✅ F_n = {report.achieved_fidelity_exact:.4f} (order-2 {report.achieved_fidelity_order2:.4f})")
    if report.best_theta is not None:
        print(f"📊 Best superposition phase theta = {report.best_theta:.4f}")

    PulseLibrary(config.db_path).record_pulse(report, config.target_state.label)

    stem = _stem(config, "optimize")
    out = Path(config.out)
    report_path = _write_json(out / f"{stem}_report.json", {**report.to_dict(), **_provenance(config)})
    pattern_path = out / f"{stem}_pattern.json"
    pattern_path.write_text(pattern_to_json(pattern))
    extra = {
        **_provenance(config),
        "fidelity_n": report.achieved_fidelity_exact,
        "fidelity_order2": report.achieved_fidelity_order2,
        "best_theta": report.best_theta,
        "cancellation": validate_cancellation(pattern).to_dict(),
        "parity_ratio": population_parity_ratio(result),
    }
    csv_path, json_path = result.write(config.out, stem, extra)
    return {"report": report_path, "pattern": str(pattern_path), "csv": csv_path, "json": json_path}


def cmd_simulate(config: ExperimentConfig) -> Dict[str, str]:
    """Replay a pulse with the exact, order-2 or order-3 propagator"""
    report = load_pulse(config)
    target = _pulse_target(config, report)
    k = float(report.problem.get("k", config.k)) if report.problem else config.k
    params = config.params(k=k)
    cavity_vector = target.vector(params.cavity_dim)

    if config.order == "exact":
        pattern = build_pattern(report.best_amplitudes, params, _pulse_eta_max(config, report), config.parity)
        result = propagate_exact(pattern, ground_state(params.space), config.propagation_config(),
                                 target=cavity_vector)
    else:
        space = FockSpace(params.cavity_dim, 1)
        initial = QuantumState(space, CAVITY, fock_vector(0, params.cavity_dim))
        result = propagate_effective(report.best_amplitudes, params, initial, order=int(config.order),
                                     target=cavity_vector)

    value = fidelity_fn(result, target)
    print(f"✅ {config.order} replay of {len(report.best_amplitudes)} blocks: F = {value:.4f}")
    extra = {**_provenance(config), "fidelity": value, "amplitudes": report.best_amplitudes,
             "parity_ratio": population_parity_ratio(result)}
    if config.target_state.has_free_phase:
        extra["best_theta_replay"] = best_superposition_theta(result.final_cavity_state())[0]
    csv_path, json_path = result.write(config.out, _stem(config, f"simulate_{config.order}"), extra)
    return {"csv": csv_path, "json": json_path}


def _noise_points(config: ExperimentConfig) -> List[Dict[str, float]]:
    if config.noise == "thermal":
        return [{"nth": nth} for nth in config.nth]
    if config.noise == "optical":
        return [{"kappa": kappa} for kappa in config.kappa]
    return [{"gamma": gamma, "nbar": nbar} for nbar in config.nbar for gamma in config.gamma]


def lossless_reference(block_amplitudes: Sequence[float], params: SystemParams, order: int = 3):
    """
    rho_n for F_i: the effective generator the Lindblad propagator uses, without
    dissipation, started from the ground state
    """
    if order == 2:
        initial = QuantumState(FockSpace(params.cavity_dim, 1), CAVITY, fock_vector(0, params.cavity_dim))
    else:
        initial = ground_state(params.space)
    return propagate_effective(block_amplitudes, params, initial, order=order)


def _noise_setup(params: SystemParams, point: Dict[str, float]):
    """(initial state, Lindbladian) of one noise point"""
    space = params.space
    if "nth" in point:
        initial = product_state(fock_state(0, params.cavity_dim, CAVITY), thermal_state(point["nth"], params.mech_dim))
        return initial, zero_lindbladian(space)
    if "kappa" in point:
        return ground_state(space), optical_loss(point["kappa"], space)
    return ground_state(space), mechanical_thermalization(point["gamma"], point["nbar"], params.k, space)


def _noise_point(args) -> Dict[str, Any]:
    """One dissipative replay; top level so it can run in a worker process"""
    config, report, k, point, reference = args
    params = config.params(dissipative=True, k=k)
    target = _pulse_target(config, report)
    pattern = build_pattern(report.best_amplitudes, params, _pulse_eta_max(config, report), config.parity)
    initial, lindbladian = _noise_setup(params, point)

    result = propagate_lindblad(pattern, initial, lindbladian, config.propagation_config())
    row: Dict[str, Any] = dict(point)
    row["fidelity_l"] = fidelity_fl(result, target)
    row["fidelity_i"] = fidelity_fi(reference, result)
    row["warnings"] = len(result.warnings)
    return row


def cmd_noise_sweep(config: ExperimentConfig) -> Dict[str, str]:
    """F_l and F_i of the stored protocol curves under one kind of noise"""
    jobs = []
    curves: Dict[str, Dict[str, float]] = {}
    order = config.propagation_config().effective_order
    for label in config.curves:
        k, horizon = SimulationConfig.get_curve(label)
        report = load_pulse(config, k, horizon)
        params = config.params(dissipative=True, k=k)
        target = _pulse_target(config, report)
        pattern = build_pattern(report.best_amplitudes, params, _pulse_eta_max(config, report), config.parity)
        exact = propagate_exact(pattern, ground_state(params.space), config.propagation_config("displaced"))
        reference = lossless_reference(report.best_amplitudes, params, order)
        curves[label] = {"fidelity_n": fidelity_fn(exact, target),
                         "fidelity_n_effective": fidelity_fn(reference, target)}
        print(f"📊 Curve {label} (k=1/{1.0 / k:.0f}, {horizon} blocks): lossless F_n = "
              f"{curves[label]['fidelity_n']:.4f} (order-{order} {curves[label]['fidelity_n_effective']:.4f})")
        for point in _noise_points(config):
            jobs.append((label, horizon, (config, report, k, point, reference)))

    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_noise_point, [job[2] for job in jobs]))
    else:
        outcomes = [_noise_point(job[2]) for job in jobs]

    rows = []
    for (label, horizon, args), outcome in zip(jobs, outcomes):
        rows.append({"curve": label, "k": args[2], "horizon": horizon, **outcome})
        print(f"   {label} {outcome}")

    stem = f"noise_{config.noise}_{config.target_state.label}_{config.config_hash[:8]}"
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    columns = ["curve", "k", "horizon"] + list(_noise_points(config)[0]) + ["fidelity_l", "fidelity_i"]
    csv_path = out / f"{stem}.csv"
    with open(csv_path, "w", newline="") as handle:
        handle.write(f"# schema: {NOISE_SCHEMA} noise={config.noise}\n")
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] if isinstance(row[c], str) else repr(float(row[c])) for c in columns])
    json_path = _write_json(out / f"{stem}.json",
                            {"schema": NOISE_SCHEMA, "rows": rows, "curves": curves, **_provenance(config)})
    return {"csv": str(csv_path), "json": json_path}


def cmd_convergence(config: ExperimentConfig) -> Dict[str, str]:
    """Trotter step-halving table of the dissipative replay of every curve and noise point"""
    rows = []
    keys = list(_noise_points(config)[0])
    for label in config.curves:
        k, horizon = SimulationConfig.get_curve(label)
        report = load_pulse(config, k, horizon)
        params = config.params(dissipative=True, k=k)
        target = _pulse_target(config, report)
        pattern = build_pattern(report.best_amplitudes, params, _pulse_eta_max(config, report), config.parity)
        for point in _noise_points(config):
            initial, lindbladian = _noise_setup(params, point)
            table = trotter_convergence(pattern, initial, lindbladian, config.propagation_config(),
                                        config.halvings, target.vector(params.cavity_dim))
            rows.extend({"curve": label, "k": k, "horizon": horizon, **point, **row} for row in table)

    print(f"| curve | {' | '.join(keys)} | dt / T | F_l | change in F_l | trace distance to previous |")
    print("|---" * (len(keys) + 5) + "|")
    for row in rows:
        point = " | ".join(f"{row[key]:g}" for key in keys)
        change = "-" if row["fidelity_change"] is None else f"{row['fidelity_change']:.2e}"
        distance = "-" if row["trace_distance"] is None else f"{row['trace_distance']:.2e}"
        print(f"| {row['curve']} | {point} | 1/{row['steps_per_period']} | {row['fidelity_l']:.6f} | {change} | {distance} |")

    stem = f"convergence_{config.noise}_{config.target_state.label}_{config.config_hash[:8]}"
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    columns = (["curve", "k", "horizon"] + keys
               + ["steps_per_period", "dt", "fidelity_l", "fidelity_change", "trace_distance"])
    csv_path = out / f"{stem}.csv"
    with open(csv_path, "w", newline="") as handle:
        handle.write(f"# schema: {CONVERGENCE_SCHEMA} noise={config.noise} trotter_order={config.trotter_order}\n")
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if row[c] is None else row[c] if isinstance(row[c], (str, int)) else repr(float(row[c]))
                             for c in columns])
    json_path = _write_json(out / f"{stem}.json", {"schema": CONVERGENCE_SCHEMA, "rows": rows, **_provenance(config)})
    return {"csv": str(csv_path), "json": json_path}


def cmd_sweep_k(config: ExperimentConfig) -> Dict[str, str]:
    """Optimize every (k, horizon) pair and report the best k per horizon"""
    k_grid = config.k_grid or [1.0 / n for n in (31, 26, 21, 16)]
    horizon_grid = config.horizon_grid or [config.horizon]
    exact_config = config.propagation_config("displaced")
    table = sweep_k(replace(config.problem(), workers=1), k_grid, horizon_grid, config.score,
                    workers=config.workers, exact_config=exact_config)

    stem = f"sweep_k_{config.target_state.label}_{config.score}_{config.config_hash[:8]}"
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    with open(csv_path, "w", newline="") as handle:
        handle.write(f"# schema: {SWEEP_SCHEMA} score={config.score}\n")
        writer = csv.writer(handle)
        writer.writerow(["k", "horizon", "fidelity", "fidelity_order2"])
        for row in table.rows:
            writer.writerow([repr(row["k"]), row["horizon"], repr(row["fidelity"]), repr(row["fidelity_order2"])])
    json_path = _write_json(out / f"{stem}.json", {"schema": SWEEP_SCHEMA, **table.to_dict(), **_provenance(config)})
    return {"csv": str(csv_path), "json": json_path}


def cmd_verify(config: ExperimentConfig) -> Dict[str, Any]:
    """Run the invariant checks; the run fails when any check fails"""
    params = SystemParams(k=config.k, omega_c_ratio=config.omega_c_ratio)
    print("🔍 Running invariant checks")
    print("=" * 60)
    results = run_checks(params, include_slow=config.include_slow, names=config.checks or None)
    print("=" * 60)
    passed = sum(1 for r in results if r.passed)
    print(f"📊 {passed}/{len(results)} checks passed")
    path = write_diagnostics(results, str(Path(config.out) / f"verify_{config.config_hash[:8]}.json"),
                             params, _provenance(config))
    return {"json": path, "passed": passed == len(results)}


def cmd_pulses(config: ExperimentConfig, export: Optional[str] = None) -> Dict[str, Any]:
    """List the pulse store and optionally export it"""
    library = PulseLibrary(config.db_path)
    stats = library.get_statistics()
    print(f"📊 {stats['total_pulses']} stored pulses")
    for row in library.list_pulses():
        exact = "-" if row["fidelity_exact"] is None else f"{row['fidelity_exact']:.4f}"
        print(f"   #{row['id']} {row['target']} k={row['k']:.5f} horizon={row['horizon']} "
              f"eta_max={row['eta_max']} seed={row['seed']} F2={row['fidelity_order2']:.4f} F_n={exact}")
    if export:
        library.export_pulses(export)
    return stats


# Argument parsing ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Two-photon state preparation in a driven optomechanical system.")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument("--config", help="JSON experiment config; flags override its values.")
        p.add_argument("--target", help="fock2, fock:<n>, superposition or superposition:<theta>.")
        p.add_argument("--k", type=float, help="Coupling ratio g0 / omega_m.")
        p.add_argument("--eta-max", type=float, help="Largest admissible block amplitude.")
        p.add_argument("--horizon", type=int, help="Protocol length in blocks of 5T.")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help="Output directory.")
        p.add_argument("--db", dest="db_path", help="Pulse store path.")
        p.add_argument("--omega-c-ratio", type=int, help="omega_c / omega_m.")
        p.add_argument("--cavity-dim", type=int)
        p.add_argument("--mech-dim", type=int)
        p.add_argument("--frame", choices=["rotating", "lab", "displaced"])
        p.add_argument("--integrator", choices=["midpoint", "magnus4"])
        p.add_argument("--steps", dest="steps_per_period", type=int, help="Exact-propagator steps per period.")
        p.add_argument("--parity", choices=["even", "odd"])
        p.add_argument("--pulse", dest="pulse_file", help="Pulse JSON (report or amplitude list).")

    p = sub.add_parser("optimize", help="Optimize block amplitudes.")
    common(p)
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-evaluations", type=int)

    p = sub.add_parser("simulate", help="Replay a pulse.")
    common(p)
    p.add_argument("--order", choices=["exact", "2", "3"])

    p = sub.add_parser("noise-sweep", help="Dissipative fidelity tables.")
    common(p)
    p.add_argument("--noise", choices=NOISE_KINDS)
    p.add_argument("--nth", type=float, nargs="+", help="Initial thermal phonon numbers.")
    p.add_argument("--kappa", type=float, nargs="+", help="Optical decay rates.")
    p.add_argument("--gamma", type=float, nargs="+", help="Mechanical damping rates.")
    p.add_argument("--nbar", type=float, nargs="+", help="Bath phonon numbers.")
    p.add_argument("--curves", nargs="+", help="Protocol curves I, II, III.")
    p.add_argument("--dissipative-cavity-dim", type=int)
    p.add_argument("--dissipative-mech-dim", type=int)
    p.add_argument("--lindblad-steps", dest="lindblad_steps_per_period", type=int)
    p.add_argument("--trotter-order", type=int, choices=[1, 2])

    p = sub.add_parser("convergence", help="Trotter step-halving table.")
    common(p)
    p.add_argument("--noise", choices=NOISE_KINDS)
    p.add_argument("--nth", type=float, nargs="+")
    p.add_argument("--kappa", type=float, nargs="+")
    p.add_argument("--gamma", type=float, nargs="+")
    p.add_argument("--nbar", type=float, nargs="+")
    p.add_argument("--curves", nargs="+")
    p.add_argument("--dissipative-cavity-dim", type=int)
    p.add_argument("--dissipative-mech-dim", type=int)
    p.add_argument("--lindblad-steps", dest="lindblad_steps_per_period", type=int, help="Coarsest resolution.")
    p.add_argument("--trotter-order", type=int, choices=[1, 2])
    p.add_argument("--halvings", type=int, help="Times the Trotter step is halved.")

    p = sub.add_parser("sweep-k", help="Best coupling ratio per horizon.")
    common(p)
    p.add_argument("--k-grid", type=float, nargs="+")
    p.add_argument("--horizon-grid", type=int, nargs="+")
    p.add_argument("--score", choices=["exact", "order3", "order2"])
    p.add_argument("--restarts", type=int)
    p.add_argument("--max-evaluations", type=int)

    p = sub.add_parser("verify", help="Run the invariant checks.")
    common(p)
    p.add_argument("--quick", action="store_true", help="Skip slow checks.")
    p.add_argument("--check", dest="checks", nargs="+", help="Run only the named checks.")

    p = sub.add_parser("pulses", help="List or export stored pulses.")
    p.add_argument("--db", dest="db_path")
    p.add_argument("--export", help="Write every stored report to this JSON file.")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config) if getattr(args, "config", None) else ExperimentConfig()
    overrides = {f.name: getattr(args, f.name, None) for f in fields(ExperimentConfig)}
    overrides["command"] = args.command
    if getattr(args, "quick", False):
        overrides["include_slow"] = False
    config = config.with_overrides(overrides)
    config.validate()
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point; returns the process exit status"""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")

    try:
        config = config_from_args(args)
        if args.command == "optimize":
            outputs = cmd_optimize(config)
        elif args.command == "simulate":
            outputs = cmd_simulate(config)
        elif args.command == "noise-sweep":
            outputs = cmd_noise_sweep(config)
        elif args.command == "convergence":
            outputs = cmd_convergence(config)
        elif args.command == "sweep-k":
            outputs = cmd_sweep_k(config)
        elif args.command == "verify":
            outputs = cmd_verify(config)
            if not outputs["passed"]:
                print(f"❌ Verification failed, diagnostics in {outputs['json']}")
                return 1
        else:
            cmd_pulses(config, getattr(args, "export", None))
            return 0
    except UsageError as e:
        print(f"❌ Usage error: {e}")
        return 2
    except ValueError as e:
        print(f"❌ Invalid parameter: {e}")
        return 2
    except OptomechError as e:
        print(f"❌ {type(e).__name__}: {e}")
        return 1

    for name, path in outputs.items():
        if name != "passed":
            print(f"📁 {name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
