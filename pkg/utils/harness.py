import csv
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from utils.analysis import (OneElementParams, grid_extrema, sa_gap, sa_sinr, stationary_values,
                            unit_magnitude_params)
from utils.channel import ChannelSet, CsiErrorParams, corrupt_csi, draw_channel_set, sample_visibility
from utils.errors import InvalidInputError, SimulatorError
from utils.geometry import ScenarioGeometry, place_scenario
from utils.link_metrics import NoiseBudget, molecular_noise, true_sinr
from utils.optimizers import OptimizationResult, bcd
from utils.qam import simulate_symbol_errors
from utils.scenario import SimulationConfig, apply_overrides

logger = logging.getLogger(__name__)

METRICS = ('throughput_bps', 'ser', 'runtime_s', 'sinr_db')
RUNTIME_SOLVERS = ('gd', 'sa', 'sdr')


@dataclass(frozen=True)
class ExperimentRow:
    experiment: str
    solver: str
    sweep_variable: str
    sweep_value: str
    metric: str
    mean: float
    ci_half_width: float
    trials: int
    failed_trials: int
    seed: int

    def __post_init__(self):
        if self.metric not in METRICS:
            raise InvalidInputError(f"Unknown metric {self.metric!r}")
        if self.trials <= 0:
            raise InvalidInputError("An experiment row needs at least one trial")


CSV_FIELDS = [f.name for f in fields(ExperimentRow)]


@dataclass
class TrialSetup:
    """Everything one Monte Carlo trial draws before optimizing"""

    geometry: ScenarioGeometry
    visibility: np.ndarray
    true_channels: ChannelSet
    estimated_channels: ChannelSet
    powers: np.ndarray
    err: CsiErrorParams
    noise_true: NoiseBudget
    noise_assumed: NoiseBudget


@dataclass
class TrialOutcome:
    sinr: float
    throughput_bps: float
    ser: Optional[float] = None
    iteration_time_s: Optional[float] = None


def throughput_bps(bandwidth_hz: float, gamma: float) -> float:
    return bandwidth_hz * math.log2(1.0 + gamma)


def trial_rng(seed: int, sweep_index: int, trial_index: int) -> np.random.Generator:
    """Independent stream per (sweep point, trial); independent of worker scheduling"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(sweep_index, trial_index)))


def worker_count(cfg: SimulationConfig) -> int:
    if cfg.experiment.workers is not None:
        return cfg.experiment.workers
    env = os.getenv('RIS_THZ_THREADS')
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning(f"Ignoring non-integer RIS_THZ_THREADS={env!r}")
    return os.cpu_count() or 1


def prepare_trial(cfg: SimulationConfig, rng: np.random.Generator) -> TrialSetup:
    """Place nodes, draw visibility, true channels and their estimates"""
    scenario = cfg.scenario
    atm, model = scenario.atmosphere, scenario.absorption_model

    # Step 1: geometry (random only for the ring layout)
    geometry = place_scenario(scenario, rng if scenario.interferer_layout == 'ring' else None)

    # Step 2: direct-link visibility and true channels
    visibility = sample_visibility(scenario.visibility, scenario.transmitter_count, rng,
                                   scenario.los_probability, scenario.signal_los_probability)
    true_channels = draw_channel_set(geometry, visibility, scenario.zeta, scenario.frequency_hz, rng, atm, model)

    # Step 3: imperfect CSI
    err = scenario.csi_errors()
    estimated = corrupt_csi(true_channels, err, rng)

    # Step 4: noise under the true and the assumed re-radiation model
    powers = scenario.powers
    noise_true = molecular_noise(geometry, powers, visibility, scenario.frequency_hz, scenario.zeta,
                                 scenario.sigma_w2, atm, model)
    return TrialSetup(geometry, visibility, true_channels, estimated, powers, err, noise_true,
                      noise_true.with_zeta(scenario.optimizer_zeta))


def optimize_trial(cfg: SimulationConfig, setup: TrialSetup, rng: np.random.Generator,
                   solver: Optional[str] = None) -> OptimizationResult:
    err = setup.err if cfg.solver.robust else CsiErrorParams.perfect(setup.powers.size)
    return bcd(setup.estimated_channels, setup.powers, setup.noise_assumed, err,
               cfg.solver.bcd_params(solver), rng)


def _throughput_trial(cfg: SimulationConfig, rng: np.random.Generator) -> TrialOutcome:
    setup = prepare_trial(cfg, rng)
    result = optimize_trial(cfg, setup, rng)
    gamma = true_sinr(result.u_star, result.phases_star, setup.true_channels, setup.powers, setup.noise_true)
    return TrialOutcome(gamma, throughput_bps(cfg.scenario.bandwidth_hz, gamma))


def _ser_trial(cfg: SimulationConfig, rng: np.random.Generator) -> TrialOutcome:
    setup = prepare_trial(cfg, rng)
    result = optimize_trial(cfg, setup, rng)
    u, theta0 = result.u_star, result.phases_star.theta0
    amplitudes = np.sqrt(setup.powers)

    true_gains = amplitudes * (np.conj(u) @ (setup.true_channels.stacked @ theta0).T)
    detector_gain = amplitudes[0] * (np.conj(u) @ setup.estimated_channels.stacked[0] @ theta0)
    noise_variance = setup.noise_true.sigma_w2 + setup.noise_true.molecular_term

    errors, sent = simulate_symbol_errors(true_gains[0], detector_gain, true_gains[1:], noise_variance,
                                          cfg.experiment.symbols, rng)
    gamma = true_sinr(u, result.phases_star, setup.true_channels, setup.powers, setup.noise_true)
    return TrialOutcome(gamma, throughput_bps(cfg.scenario.bandwidth_hz, gamma), ser=errors / sent)


def _runtime_trial(cfg: SimulationConfig, rng: np.random.Generator) -> TrialOutcome:
    setup = prepare_trial(cfg, rng)
    result = optimize_trial(cfg, setup, rng)
    gamma = result.gamma
    return TrialOutcome(gamma, throughput_bps(cfg.scenario.bandwidth_hz, gamma),
                        iteration_time_s=float(np.median(result.iteration_times)))


def _guarded(trial: Callable, cfg: SimulationConfig, rng: np.random.Generator,
             label: str) -> Optional[TrialOutcome]:
    try:
        return trial(cfg, rng)
    except (SimulatorError, np.linalg.LinAlgError) as e:
        logger.error(f"Trial {label} failed: {e}")
    except (ValueError, ArithmeticError) as e:
        logger.error(f"Trial {label} failed with an unexpected {type(e).__name__}: {e}")
    return None


def run_trials(cfg: SimulationConfig, trial: Callable, sweep_index: int,
               workers: Optional[int] = None) -> Tuple[List[TrialOutcome], int]:
    """
    Run every trial of one sweep point on a thread pool

    Args:
        cfg (SimulationConfig): Configuration of this sweep point
        trial (Callable): Trial function taking (cfg, rng)
        sweep_index (int): Index of the sweep point, part of every trial's seed
        workers (int): Pool size; from the config / environment when omitted

    Returns:
        Tuple[List[TrialOutcome], int]: Successful outcomes in trial order and the failure count
    """
    trials = cfg.experiment.trials
    seed = cfg.experiment.seed
    workers = workers or worker_count(cfg)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_guarded, trial, cfg, trial_rng(seed, sweep_index, t), f"{sweep_index}/{t}")
            for t in range(trials)
        ]
        outcomes = [future.result() for future in futures]

    succeeded = [o for o in outcomes if o is not None]
    failed = trials - len(succeeded)
    if not succeeded:
        raise SimulatorError(f"All {trials} trials of sweep point {sweep_index} failed")
    if failed:
        logger.warning(f"{failed} of {trials} trials failed and were excluded")
    return succeeded, failed


def summarize(values: Sequence[float]) -> Tuple[float, float]:
    """Mean and 95% Student-t confidence half-width"""
    values = np.asarray(values, dtype=float)
    mean = float(np.mean(values))
    if values.size < 2:
        return mean, 0.0
    half_width = stats.t.ppf(0.975, values.size - 1) * stats.sem(values)
    return mean, float(half_width) if np.isfinite(half_width) else 0.0


def sweep_points(cfg: SimulationConfig,
                 sweep: Optional[Tuple[str, Sequence]] = None) -> List[Tuple[str, str, SimulationConfig]]:
    """(variable, value label, config) per sweep point; a single unlabeled point without a sweep"""
    if sweep is None:
        return [('', '', cfg)]
    variable, values = sweep
    points = []
    for value in values:
        changes = {variable: value}
        if variable == 'N_I' and cfg.scenario.interferer_layout != 'ring':
            changes['interferer_layout'] = 'ring'
        points.append((variable, str(value), apply_overrides(cfg, **changes)))
    return points


def _rows(experiment: str, solver: str, variable: str, label: str, metric: str, values: Sequence[float],
          failed: int, seed: int) -> ExperimentRow:
    mean, half_width = summarize(values)
    return ExperimentRow(experiment, solver, variable, label, metric, mean, half_width, len(values), failed, seed)


def _sinr_db(outcomes: Sequence[TrialOutcome]) -> List[float]:
    return [10.0 * math.log10(max(o.sinr, 1e-300)) for o in outcomes]


def run_throughput(cfg: SimulationConfig, sweep: Optional[Tuple[str, Sequence]] = None,
                   workers: Optional[int] = None) -> List[ExperimentRow]:
    """
    Mean throughput B log2(1 + gamma) of the configured solver per sweep point

    Args:
        cfg (SimulationConfig): Base configuration
        sweep: (variable, values) or None for a single point
        workers (int): Thread pool size override

    Returns:
        List[ExperimentRow]: throughput_bps and sinr_db rows per sweep point
    """
    rows = []
    solver = cfg.solver.name
    for index, (variable, label, point_cfg) in enumerate(sweep_points(cfg, sweep)):
        logger.info(f"Running throughput for {solver} at {variable or 'base'}={label or '-'}")
        outcomes, failed = run_trials(point_cfg, _throughput_trial, index, workers)
        seed = point_cfg.experiment.seed
        rows.append(_rows('throughput', solver, variable, label, 'throughput_bps',
                          [o.throughput_bps for o in outcomes], failed, seed))
        rows.append(_rows('throughput', solver, variable, label, 'sinr_db', _sinr_db(outcomes), failed, seed))
        logger.info(f"Mean throughput {rows[-2].mean / 1e9:.3f} Gbps over {len(outcomes)} trials")
    return rows


def run_ser(cfg: SimulationConfig, sweep: Optional[Tuple[str, Sequence]] = None,
            workers: Optional[int] = None) -> List[ExperimentRow]:
    """Mean 4-QAM symbol error rate on the true channels per sweep point"""
    rows = []
    solver = cfg.solver.name
    for index, (variable, label, point_cfg) in enumerate(sweep_points(cfg, sweep)):
        logger.info(f"Running SER for {solver} at {variable or 'base'}={label or '-'}")
        outcomes, failed = run_trials(point_cfg, _ser_trial, index, workers)
        seed = point_cfg.experiment.seed
        rows.append(_rows('ser', solver, variable, label, 'ser', [o.ser for o in outcomes], failed, seed))
        rows.append(_rows('ser', solver, variable, label, 'sinr_db', _sinr_db(outcomes), failed, seed))
        logger.info(f"Mean SER {rows[-2].mean:.3e} over {len(outcomes)} trials")
    return rows


def run_runtime(cfg: SimulationConfig, sweep: Optional[Tuple[str, Sequence]] = None,
                solvers: Sequence[str] = RUNTIME_SOLVERS) -> List[ExperimentRow]:
    """
    Median per-iteration BCD wall time of each sub-solver.

    Trials run on a single worker so timings do not compete for cores.
    """
    rows = []
    for index, (variable, label, point_cfg) in enumerate(sweep_points(cfg, sweep)):
        for solver in solvers:
            solver_cfg = apply_overrides(point_cfg, solver=solver)
            logger.info(f"Timing {solver} at {variable or 'base'}={label or '-'}")
            outcomes, failed = run_trials(solver_cfg, _runtime_trial, index, workers=1)
            times = [o.iteration_time_s for o in outcomes]
            rows.append(ExperimentRow('runtime', solver, variable, label, 'runtime_s', float(np.median(times)),
                                      0.0, len(times), failed, solver_cfg.experiment.seed))
    return rows


@dataclass
class OracleCheck:
    name: str
    passed: bool
    detail: str


def run_oracle(instances: int = 200, seed: int = 2024, grid_points: int = 100_000) -> List[OracleCheck]:
    """
    Self-checks of the one-element closed forms against grid search

    Args:
        instances (int): Random one-element instances
        seed (int): Seed of the instance generator
        grid_points (int): Grid resolution of the reference search

    Returns:
        List[OracleCheck]: One entry per check
    """
    rng = np.random.default_rng(seed)
    checks = []

    worst = 0.0
    for _ in range(instances):
        a, h, b, g = complex_normal_scalars(rng, 4)
        params = OneElementParams.from_first_form(1.0, a, h, 1.0, b, g, float(rng.uniform(0.05, 1.0)))
        grid_max = grid_extrema(params, grid_points)[0]
        worst = max(worst, abs(stationary_values(params).high - grid_max) / grid_max)
    checks.append(OracleCheck('stationary_max_vs_grid', worst <= 1e-4, f"worst relative error {worst:.2e}"))

    worst = 0.0
    for _ in range(instances):
        a, h, b, g = complex_normal_scalars(rng, 4)
        params = OneElementParams.from_first_form(1.0, a, h, 1e-12, b, g, float(rng.uniform(0.05, 1.0)))
        limit = (params.Lp + params.Mp) / params.Np
        worst = max(worst, abs(stationary_values(params).high - limit) / limit)
    checks.append(OracleCheck('vanishing_interference_limit', worst <= 1e-6, f"worst relative error {worst:.2e}"))

    worst = 0.0
    for _ in range(instances):
        k, delta, c = float(rng.uniform(0.0, 5.0)), float(rng.uniform(-math.pi, math.pi)), float(rng.uniform(0.05, 1.0))
        values = stationary_values(unit_magnitude_params(k, delta, c))
        g1, g2 = sa_gap(k, delta, c)
        gamma_sa = sa_sinr(k, delta, c)
        error = max(abs(values.high - gamma_sa - g1), abs(gamma_sa - values.low - g2))
        worst = max(worst, error / max(values.high, 1e-300))
    checks.append(OracleCheck('sa_gap_vs_stationary', worst <= 1e-9, f"worst relative error {worst:.2e}"))

    for check in checks:
        logger.info(f"Oracle {check.name}: {'PASS' if check.passed else 'FAIL'} ({check.detail})")
    return checks


def complex_normal_scalars(rng: np.random.Generator, count: int) -> np.ndarray:
    return (rng.standard_normal(count) + 1j * rng.standard_normal(count)) / math.sqrt(2.0)


def write_csv(rows: Sequence[ExperimentRow], destination: Union[str, Path, None] = None) -> None:
    """Write rows with a header; to stdout when ``destination`` is None or '-'"""
    if destination is None or str(destination) == '-':
        _write_rows(rows, sys.stdout)
        return
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='', encoding='utf-8') as handle:
        _write_rows(rows, handle)
    logger.info(f"Wrote {len(rows)} rows to {path}")


def _write_rows(rows: Sequence[ExperimentRow], handle) -> None:
    writer = csv.DictWriter(handle, fieldnames=CSV_FIELDS, lineterminator='\n')
    writer.writeheader()
    for row in rows:
        writer.writerow(asdict(row))
