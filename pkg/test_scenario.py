"""
Tests for configuration loading, overrides and sweep parsing
"""

import json

import numpy as np
import pytest

from config import load_default_config
from utils.errors import ConfigError, InvalidInputError
from utils.scenario import (ScenarioConfig, SimulationConfig, apply_overrides, config_from_dict, load_config,
                            parse_sweep)


def test_default_document_matches_dataclass_defaults():
    assert load_default_config() == SimulationConfig()


def test_partial_document_keeps_defaults():
    cfg = config_from_dict({'scenario': {'N': 16, 'atmosphere': {'relative_humidity_percent': 20.0}},
                            'solver': {'name': 'sa', 'bcd': {'max_outer_iters': 5}, 'sdr': {'bisection_hi': 50.0}}})
    assert cfg.scenario.N == 16 and cfg.scenario.N_R == 100
    assert cfg.scenario.atmosphere.relative_humidity_percent == 20.0
    assert cfg.solver.name == 'sa' and cfg.solver.max_outer_iters == 5
    assert cfg.solver.sdr.bisection_hi == 50.0
    assert cfg.solver.bcd_params().sub_solver == 'sa'
    assert cfg.solver.bcd_params('sdr').sub_solver == 'sdr'


def test_placements_are_tuples():
    cfg = config_from_dict({'scenario': {'N_I': 2, 'interferer_positions': [[1.5, 110, 0], [2, -45, 0]]}})
    assert cfg.scenario.interferer_positions == ((1.5, 110.0, 0.0), (2.0, -45.0, 0.0))


@pytest.mark.parametrize("document", [
    {'scenario': {'carrier': 1}},
    {'solver': {'gd': {'momentum': 0.9}}},
    {'experiment': {'runs': 3}},
    {'output': {}},
    {'scenario': {'N': 10}},
    {'solver': {'name': 'newton'}},
    {'experiment': {'trials': 0}},
    [],
])
def test_invalid_documents(document):
    with pytest.raises(ConfigError):
        config_from_dict(document)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / 'missing.json')
    broken = tmp_path / 'broken.json'
    broken.write_text('{"scenario": ', encoding='utf-8')
    with pytest.raises(ConfigError):
        load_config(broken)


def test_load_json_file(tmp_path):
    path = tmp_path / 'small.json'
    path.write_text(json.dumps({'scenario': {'N': 4, 'N_R': 4}, 'experiment': {'trials': 3}}), encoding='utf-8')
    cfg = load_config(path)
    assert (cfg.scenario.N, cfg.scenario.N_R, cfg.experiment.trials) == (4, 4, 3)


def test_load_toml_file(tmp_path):
    pytest.importorskip('tomllib')
    path = tmp_path / 'small.toml'
    path.write_text('[scenario]\nN = 9\nzeta = 0\n\n[solver]\nname = "sa"\n', encoding='utf-8')
    cfg = load_config(path)
    assert cfg.scenario.N == 9 and cfg.scenario.zeta == 0 and cfg.solver.name == 'sa'


def test_apply_overrides():
    base = SimulationConfig()
    cfg = apply_overrides(base, solver='sdr', robust=False, zeta=0, trials=7, seed=None)
    assert cfg.solver.name == 'sdr' and cfg.solver.robust is False
    assert cfg.scenario.zeta == 0 and cfg.experiment.trials == 7
    assert cfg.experiment.seed == base.experiment.seed
    assert base.solver.name == 'gd'
    with pytest.raises(ConfigError):
        apply_overrides(base, carrier=1.0)
    with pytest.raises(ConfigError):
        apply_overrides(base, N=10)


def test_parse_sweep():
    assert parse_sweep('N=16,36,64') == ('N', [16, 36, 64])
    assert parse_sweep('eta2_sq=0,1e-12') == ('eta2_sq', [0.0, 1e-12])
    assert parse_sweep(' N_I = 1,2') == ('N_I', [1, 2])
    for bad in ('N', 'N=', 'power=1,2', 'N=16,abc', 'N=16.5'):
        with pytest.raises(ConfigError):
            parse_sweep(bad)


def test_derived_scenario_quantities():
    scenario = ScenarioConfig(N_I=2, interferer_power_w=0.5, zeta=1, zeta_assumed=0, eta1_sq=1e-12, eta2_sq=4e-12)
    np.testing.assert_allclose(scenario.powers, [2.0, 0.5, 0.5])
    assert scenario.optimizer_zeta == 0
    assert scenario.sigma_w2 == pytest.approx(3.981e-11, rel=1e-3)
    np.testing.assert_allclose(scenario.csi_errors().rho ** 2, [1e-12, 4e-12, 4e-12])
    np.testing.assert_allclose(ScenarioConfig(N_I=2).powers, [2.0, 2.0, 2.0])
    assert ScenarioConfig().optimizer_zeta == 1


def test_scenario_validation():
    with pytest.raises(InvalidInputError):
        ScenarioConfig(N_R=12)
    with pytest.raises(InvalidInputError):
        ScenarioConfig(visibility='always')
    with pytest.raises(InvalidInputError):
        ScenarioConfig(zeta_assumed=2)
