import json
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from utils.atmosphere import AbsorptionModel, AtmosphereConfig
from utils.channel import VISIBILITY_MODES, CsiErrorParams
from utils.errors import ConfigError, InvalidInputError, SimulatorError
from utils.link_metrics import thermal_noise_variance
from utils.optimizers import SUB_SOLVERS, BcdParams, GdParams
from utils.sdr import SdrParams

logger = logging.getLogger(__name__)

Placement = Tuple[float, float, float]

INTERFERER_LAYOUTS = ('fixed', 'ring')
SWEEP_VARIABLES = {
    'N': int,
    'N_R': int,
    'N_I': int,
    'frequency_hz': float,
    'eta1_sq': float,
    'eta2_sq': float,
    'zeta': int,
}


def _placement(value) -> Placement:
    r, azimuth, elevation = (float(v) for v in value)
    return (r, azimuth, elevation)


@dataclass(frozen=True)
class ScenarioConfig:
    """Node geometry, arrays, powers, noise, re-radiation switch and CSI error levels"""

    frequency_hz: float = 220e9
    bandwidth_hz: float = 10e9
    atmosphere: AtmosphereConfig = field(default_factory=AtmosphereConfig)
    squared_deviation: bool = True
    N: int = 100
    N_R: int = 100
    N_I: int = 1
    rx_position: Placement = (0.0, 0.0, 0.0)
    ris_position: Placement = (1.0, 0.0, 0.0)
    tx0_position: Placement = (1.0, 60.0, 0.0)
    interferer_positions: Tuple[Placement, ...] = ((1.5, 110.0, 0.0),)
    interferer_layout: str = 'fixed'
    ring_radius_m: float = 2.0
    power_w: float = 2.0
    interferer_power_w: Optional[float] = None
    noise_dbm_per_hz: float = -174.0
    zeta: int = 1
    zeta_assumed: Optional[int] = None
    visibility: str = 'nd'
    los_probability: float = 0.5
    signal_los_probability: float = 0.0
    eta1_sq: float = 0.0
    eta2_sq: float = 0.0

    def __post_init__(self):
        if self.frequency_hz <= 0.0 or self.bandwidth_hz <= 0.0:
            raise InvalidInputError("Frequency and bandwidth must be positive")
        for name in ('N', 'N_R'):
            count = getattr(self, name)
            if count < 1 or math.isqrt(count) ** 2 != count:
                raise InvalidInputError(f"{name} must be a positive perfect square, got {count}")
        if self.N_I < 0:
            raise InvalidInputError(f"N_I must be non-negative, got {self.N_I}")
        if self.zeta not in (0, 1) or self.zeta_assumed not in (None, 0, 1):
            raise InvalidInputError("zeta and zeta_assumed must be 0 or 1")
        if self.visibility not in VISIBILITY_MODES:
            raise InvalidInputError(f"visibility must be one of {VISIBILITY_MODES}, got {self.visibility!r}")
        if self.interferer_layout not in INTERFERER_LAYOUTS:
            raise InvalidInputError(f"interferer_layout must be one of {INTERFERER_LAYOUTS}")
        if self.power_w <= 0.0 or (self.interferer_power_w is not None and self.interferer_power_w <= 0.0):
            raise InvalidInputError("Transmit powers must be positive")
        if self.eta1_sq < 0.0 or self.eta2_sq < 0.0:
            raise InvalidInputError("CSI error variances must be non-negative")
        if self.ring_radius_m <= 0.0:
            raise InvalidInputError("Ring radius must be positive")

    @property
    def transmitter_count(self) -> int:
        return self.N_I + 1

    @property
    def absorption_model(self) -> AbsorptionModel:
        return AbsorptionModel(squared_deviation=self.squared_deviation)

    @property
    def optimizer_zeta(self) -> int:
        """zeta the optimizer assumes for its noise term"""
        return self.zeta if self.zeta_assumed is None else self.zeta_assumed

    @property
    def powers(self) -> np.ndarray:
        powers = np.full(self.transmitter_count, self.power_w if self.interferer_power_w is None
                         else self.interferer_power_w)
        powers[0] = self.power_w
        return powers

    @property
    def sigma_w2(self) -> float:
        return thermal_noise_variance(self.noise_dbm_per_hz, self.bandwidth_hz)

    def csi_errors(self) -> CsiErrorParams:
        return CsiErrorParams.from_variances(self.eta1_sq, self.eta2_sq, self.transmitter_count)


@dataclass(frozen=True)
class SolverConfig:
    name: str = 'gd'
    robust: bool = True
    rel_tol: float = 1e-6
    max_outer_iters: int = 200
    gd: GdParams = field(default_factory=GdParams)
    sdr: SdrParams = field(default_factory=SdrParams)

    def __post_init__(self):
        if self.name not in SUB_SOLVERS:
            raise InvalidInputError(f"Unknown solver {self.name!r}; expected one of {SUB_SOLVERS}")

    def bcd_params(self, name: Optional[str] = None) -> BcdParams:
        return BcdParams(self.rel_tol, self.max_outer_iters, name or self.name, self.gd, self.sdr)


@dataclass(frozen=True)
class ExperimentConfig:
    trials: int = 200
    symbols: int = 100_000
    seed: int = 2024
    workers: Optional[int] = None

    def __post_init__(self):
        if self.trials < 1 or self.symbols < 1:
            raise InvalidInputError("trials and symbols must be positive")
        if self.seed < 0:
            raise InvalidInputError("seed must be non-negative")
        if self.workers is not None and self.workers < 1:
            raise InvalidInputError("workers must be positive")


@dataclass(frozen=True)
class SimulationConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)


def _check_keys(section: str, data: Dict[str, Any], allowed) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"Unknown keys in [{section}]: {', '.join(sorted(unknown))}")


def _field_names(cls) -> List[str]:
    return [f.name for f in fields(cls)]


def _scenario_from_dict(data: Dict[str, Any]) -> ScenarioConfig:
    data = dict(data)
    allowed = set(_field_names(ScenarioConfig)) - {'squared_deviation'} | {'absorption'}
    _check_keys('scenario', data, allowed)

    atmosphere = data.pop('atmosphere', {})
    _check_keys('scenario.atmosphere', atmosphere, _field_names(AtmosphereConfig))
    data['atmosphere'] = AtmosphereConfig(**atmosphere)

    absorption = data.pop('absorption', {})
    _check_keys('scenario.absorption', absorption, ['squared_deviation'])
    if 'squared_deviation' in absorption:
        data['squared_deviation'] = bool(absorption['squared_deviation'])

    for key in ('rx_position', 'ris_position', 'tx0_position'):
        if key in data:
            data[key] = _placement(data[key])
    if 'interferer_positions' in data:
        data['interferer_positions'] = tuple(_placement(p) for p in data['interferer_positions'])
    return ScenarioConfig(**data)


def _solver_from_dict(data: Dict[str, Any]) -> SolverConfig:
    data = dict(data)
    _check_keys('solver', data, ['name', 'robust', 'bcd', 'gd', 'sdr'])
    bcd = data.pop('bcd', {})
    _check_keys('solver.bcd', bcd, ['rel_tol', 'max_outer_iters'])
    gd = data.pop('gd', {})
    _check_keys('solver.gd', gd, _field_names(GdParams))
    sdr = data.pop('sdr', {})
    _check_keys('solver.sdr', sdr, _field_names(SdrParams))
    return SolverConfig(gd=GdParams(**gd), sdr=SdrParams(**sdr), **bcd, **data)


def config_from_dict(data: Dict[str, Any]) -> SimulationConfig:
    """
    Build a SimulationConfig from a parsed document

    Args:
        data (dict): Document with optional scenario / solver / experiment sections

    Returns:
        SimulationConfig: Validated configuration
    """
    if not isinstance(data, dict):
        raise ConfigError("Configuration document must be a mapping")
    _check_keys('root', data, ['scenario', 'solver', 'experiment'])
    try:
        experiment = dict(data.get('experiment', {}))
        _check_keys('experiment', experiment, _field_names(ExperimentConfig))
        return SimulationConfig(
            scenario=_scenario_from_dict(data.get('scenario', {})),
            solver=_solver_from_dict(data.get('solver', {})),
            experiment=ExperimentConfig(**experiment),
        )
    except ConfigError:
        raise
    except (SimulatorError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid configuration: {e}") from e


def load_config(path: Union[str, Path]) -> SimulationConfig:
    """Read a JSON (or TOML, where tomllib exists) configuration file"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Configuration file not found: {path}")

    try:
        if path.suffix.lower() == '.toml':
            try:
                import tomllib
            except ImportError as e:
                raise ConfigError("TOML configuration needs Python 3.11 or newer") from e
            with path.open('rb') as handle:
                data = tomllib.load(handle)
        else:
            with path.open('r', encoding='utf-8') as handle:
                data = json.load(handle)
    except ConfigError:
        raise
    except (OSError, ValueError) as e:
        raise ConfigError(f"Could not parse {path}: {e}") from e

    logger.info(f"Loaded configuration from {path}")
    return config_from_dict(data)


def apply_overrides(config: SimulationConfig, **changes) -> SimulationConfig:
    """
    Return a copy of ``config`` with flat field overrides.

    Keys are field names of any section; ``solver`` selects the sub-solver name.
    """
    sections = {'scenario': {}, 'solver': {}, 'experiment': {}}
    for key, value in changes.items():
        if value is None:
            continue
        if key == 'solver':
            sections['solver']['name'] = value
        elif key in _field_names(ScenarioConfig):
            sections['scenario'][key] = value
        elif key in _field_names(SolverConfig):
            sections['solver'][key] = value
        elif key in _field_names(ExperimentConfig):
            sections['experiment'][key] = value
        else:
            raise ConfigError(f"Unknown configuration field {key!r}")

    try:
        return SimulationConfig(
            scenario=replace(config.scenario, **sections['scenario']),
            solver=replace(config.solver, **sections['solver']),
            experiment=replace(config.experiment, **sections['experiment']),
        )
    except (SimulatorError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid override: {e}") from e


def parse_sweep(spec: str) -> Tuple[str, List[Union[int, float]]]:
    """Parse 'var=v1,v2,...' into the variable name and typed values"""
    name, sep, values = spec.partition('=')
    name = name.strip()
    if not sep or not values.strip():
        raise ConfigError(f"Sweep must look like var=v1,v2,..., got {spec!r}")
    if name not in SWEEP_VARIABLES:
        raise ConfigError(f"Cannot sweep {name!r}; choose one of {', '.join(SWEEP_VARIABLES)}")

    cast = SWEEP_VARIABLES[name]
    parsed = []
    for item in values.split(','):
        try:
            number = float(item)
        except ValueError as e:
            raise ConfigError(f"Sweep value {item!r} is not a number") from e
        if cast is int:
            if not number.is_integer():
                raise ConfigError(f"Sweep value {item!r} for {name} must be an integer")
            number = int(number)
        parsed.append(number)
    return name, parsed
