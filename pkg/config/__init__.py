# Config package for the RIS-aided THz link simulator
from pathlib import Path

from utils.scenario import SimulationConfig, load_config

DEFAULT_CONFIG_PATH = Path(__file__).with_name('default.json')


def load_default_config() -> SimulationConfig:
    return load_config(DEFAULT_CONFIG_PATH)
