"""
Tests for the Monte Carlo harness, CSV output and the command line
"""

import csv
import json
import math

import numpy as np
import pytest

import app
from utils.errors import InvalidInputError, SimulatorError
from utils.harness import (CSV_FIELDS, ExperimentRow, optimize_trial, prepare_trial, run_oracle, run_runtime,
                           run_ser, run_throughput, run_trials, summarize, sweep_points, throughput_bps, trial_rng,
                           worker_count, write_csv)
from utils.link_metrics import build_context
from utils.scenario import SimulationConfig, apply_overrides

SMALL = {
    'scenario': {'N': 4, 'N_R': 4},
    'solver': {'name': 'sa', 'bcd': {'max_outer_iters': 20}},
    'experiment': {'trials': 3, 'symbols': 2000, 'seed': 7},
}


def _small_config(**changes):
    cfg = apply_overrides(SimulationConfig(), N=4, N_R=4, solver='sa', max_outer_iters=20, trials=3,
                          symbols=2000, seed=7)
    return apply_overrides(cfg, **changes)


def test_throughput_formula():
    assert throughput_bps(10e9, 1.0) == pytest.approx(10e9)
    assert throughput_bps(10e9, 0.0) == 0.0
    assert throughput_bps(1.0, 3.0) == pytest.approx(2.0)


def test_summarize():
    mean, half = summarize([1.0, 2.0, 3.0])
    assert mean == 2.0
    assert half == pytest.approx(4.302653 * 1.0 / math.sqrt(3.0), rel=1e-5)
    assert summarize([5.0]) == (5.0, 0.0)
    assert summarize([2.0, 2.0])[1] == 0.0


def test_trial_streams():
    a = trial_rng(1, 0, 0).random(4)
    np.testing.assert_array_equal(a, trial_rng(1, 0, 0).random(4))
    assert not np.array_equal(a, trial_rng(1, 0, 1).random(4))
    assert not np.array_equal(a, trial_rng(1, 1, 0).random(4))


def test_worker_count(monkeypatch):
    monkeypatch.setenv('RIS_THZ_THREADS', '3')
    assert worker_count(SimulationConfig()) == 3
    assert worker_count(apply_overrides(SimulationConfig(), workers=2)) == 2
    monkeypatch.setenv('RIS_THZ_THREADS', 'many')
    assert worker_count(SimulationConfig()) >= 1


def test_experiment_row_validation():
    with pytest.raises(InvalidInputError):
        ExperimentRow('throughput', 'gd', '', '', 'goodput', 1.0, 0.0, 1, 0, 0)
    with pytest.raises(InvalidInputError):
        ExperimentRow('throughput', 'gd', '', '', 'ser', 1.0, 0.0, 0, 0, 0)


def test_sweep_points_force_ring_layout_for_interferer_count():
    points = sweep_points(_small_config(), ('N_I', [0, 3]))
    assert [p[1] for p in points] == ['0', '3']
    assert all(p[2].scenario.interferer_layout == 'ring' for p in points)
    assert points[1][2].scenario.N_I == 3
    assert sweep_points(_small_config()) == [('', '', _small_config())]


def test_prepare_trial_shapes():
    setup = prepare_trial(_small_config(eta1_sq=1e-12, eta2_sq=1e-12), trial_rng(7, 0, 0))
    assert setup.true_channels.stacked.shape == (2, 4, 5)
    assert setup.estimated_channels.stacked.shape == (2, 4, 5)
    assert not np.array_equal(setup.true_channels.reflected, setup.estimated_channels.reflected)
    # default: no direct links
    np.testing.assert_array_equal(setup.visibility, [0, 0])
    assert setup.noise_true.zeta == 1 and setup.noise_assumed.zeta == 1


def test_throughput_rows_and_determinism():
    cfg = _small_config()
    serial = run_throughput(cfg, ('N', [4, 9]), workers=1)
    parallel = run_throughput(cfg, ('N', [4, 9]), workers=3)
    assert serial == parallel
    assert [(r.sweep_value, r.metric) for r in serial] == [
        ('4', 'throughput_bps'), ('4', 'sinr_db'), ('9', 'throughput_bps'), ('9', 'sinr_db')]
    for row in serial:
        assert row.trials == 3 and row.failed_trials == 0 and row.seed == 7
        assert row.experiment == 'throughput' and row.solver == 'sa'
    assert serial[0].mean > 0.0


def test_random_phases_trail_gradient_descent():
    gd = run_throughput(_small_config(N=36, solver='gd', trials=2), workers=1)[0]
    rand = run_throughput(_small_config(N=36, solver='rand', trials=2), workers=1)[0]
    assert gd.solver == 'gd' and rand.solver == 'rand'
    assert 0.0 < rand.mean < gd.mean


def test_throughput_grows_with_ris_size():
    rows = run_throughput(_small_config(trials=2), ('N', [16, 36, 64, 100]), workers=1)
    means = [r.mean for r in rows if r.metric == 'throughput_bps']
    assert len(means) == 4
    assert all(later > earlier for earlier, later in zip(means, means[1:]))


def test_sinr_scales_with_square_of_ris_size():
    cfg = _small_config(N_I=0, trials=3)
    small, large = (run_throughput(apply_overrides(cfg, N=n), workers=1)[1] for n in (16, 64))
    assert small.metric == large.metric == 'sinr_db'
    ratio = 10.0 ** ((large.mean - small.mean) / 10.0)
    assert 12.0 <= ratio <= 20.0


def test_scattering_re_radiation_never_loses_to_molecular_noise():
    base = _small_config(N=64, trials=4)

    def mean_throughput(**changes):
        return run_throughput(apply_overrides(base, **changes), workers=1)[0].mean

    direct_scatter = mean_throughput(visibility='d', zeta=0)
    direct_noise = mean_throughput(visibility='d', zeta=1)
    blocked_scatter = mean_throughput(zeta=0)
    blocked_noise = mean_throughput(zeta=1)
    assert direct_scatter >= direct_noise
    assert abs(blocked_scatter - blocked_noise) / blocked_noise < 0.05


def test_signal_alignment_is_optimal_without_interference():
    cfg = _small_config(N=9, N_I=0)
    setup = prepare_trial(cfg, trial_rng(7, 0, 0))
    sa = optimize_trial(cfg, setup, np.random.default_rng(1), 'sa')
    gd = optimize_trial(cfg, setup, np.random.default_rng(1), 'gd')
    assert gd.gamma == pytest.approx(sa.gamma, rel=1e-6)

    ctx = build_context(setup.estimated_channels, setup.powers, setup.noise_assumed, np.zeros(1))
    thetas = np.exp(1j * np.random.default_rng(2).uniform(-math.pi, math.pi, (100_000, 9)))
    received = ctx.H[0] @ np.column_stack([thetas, np.ones(len(thetas))]).T
    # matched filter SINR of every random phase vector
    probes = ctx.powers[0] * np.sum(np.abs(received) ** 2, axis=0) / ctx.noise_floor
    assert sa.gamma >= probes.max() * (1 - 1e-9)


def test_ser_rows():
    rows = run_ser(_small_config(trials=2), workers=1)
    assert [r.metric for r in rows] == ['ser', 'sinr_db']
    assert 0.0 <= rows[0].mean <= 1.0


def test_runtime_rows():
    rows = run_runtime(_small_config(trials=2), solvers=('sa', 'gd'))
    assert [(r.solver, r.metric) for r in rows] == [('sa', 'runtime_s'), ('gd', 'runtime_s')]
    assert all(r.mean >= 0.0 and r.trials == 2 for r in rows)


def test_runtime_ordering_against_sdr():
    cfg = _small_config(N=16, N_R=16, trials=1, max_outer_iters=2)
    times = {row.solver: row.mean for row in run_runtime(cfg)}
    assert times['sa'] < times['sdr']
    assert times['gd'] < times['sdr']
    assert times['sdr'] / times['gd'] >= 10.0


def test_robust_design_lowers_ser_when_interferer_estimates_are_poor():
    # interferer estimates are pure error; the robust load keeps the receiver from nulling them
    cfg = _small_config(N=4, N_I=3, interferer_layout='ring', eta2_sq=1e-11, solver='gd',
                        noise_dbm_per_hz=-212.0, trials=4, symbols=4000)
    robust = run_ser(cfg, workers=1)[0]
    plain = run_ser(apply_overrides(cfg, robust=False), workers=1)[0]
    assert robust.metric == plain.metric == 'ser'
    assert robust.failed_trials == plain.failed_trials == 0
    assert robust.mean < plain.mean


def test_failed_trials_are_counted_and_all_failures_raise():
    cfg = _small_config(trials=8)

    def flaky(config, rng):
        if rng.random() < 0.25:
            raise SimulatorError("synthetic failure")
        return 'ok'

    def broken(config, rng):
        raise SimulatorError("synthetic failure")

    outcomes, failed = run_trials(cfg, flaky, 0, workers=2)
    assert len(outcomes) + failed == 8
    with pytest.raises(SimulatorError):
        run_trials(cfg, broken, 0, workers=2)

    def misshapen(config, rng):
        return np.ones(3) @ np.ones(4)

    with pytest.raises(SimulatorError):
        run_trials(cfg, misshapen, 0, workers=2)


def test_write_csv(tmp_path, capsys):
    rows = [ExperimentRow('throughput', 'gd', 'N', '16', 'throughput_bps', 1.5e10, 2e8, 10, 1, 2024)]
    path = tmp_path / 'out' / 'rows.csv'
    write_csv(rows, path)
    with path.open(newline='', encoding='utf-8') as handle:
        records = list(csv.DictReader(handle))
    assert list(records[0]) == CSV_FIELDS
    assert records[0]['sweep_value'] == '16' and float(records[0]['mean']) == 1.5e10

    write_csv(rows, '-')
    assert capsys.readouterr().out.splitlines()[0] == ','.join(CSV_FIELDS)


def test_oracle_checks_pass():
    checks = run_oracle(instances=20, grid_points=20_000)
    assert [c.name for c in checks] == ['stationary_max_vs_grid', 'vanishing_interference_limit',
                                        'sa_gap_vs_stationary']
    assert all(c.passed for c in checks)


def test_cli_exit_codes(tmp_path):
    assert app.main(['throughput', '--config', str(tmp_path / 'missing.json')]) == app.EXIT_CONFIG
    assert app.main(['throughput', '--sweep', 'power=1,2']) == app.EXIT_CONFIG
    assert app.main(['oracle', '--instances', '10']) == app.EXIT_OK


def test_cli_reports_unexpected_errors_as_simulation_failures(monkeypatch):
    def boom(cfg, sweep):
        raise RuntimeError("unexpected")

    monkeypatch.setattr(app, 'run_throughput', boom)
    assert app.main(['throughput', '--trials', '1']) == app.EXIT_SOLVER


def test_cli_writes_csv(tmp_path):
    config_path = tmp_path / 'small.json'
    config_path.write_text(json.dumps(SMALL), encoding='utf-8')
    out = tmp_path / 'throughput.csv'
    code = app.main(['throughput', '--config', str(config_path), '--sweep', 'N=4', '--trials', '2',
                     '--workers', '1', '--out', str(out)])
    assert code == app.EXIT_OK
    with out.open(newline='', encoding='utf-8') as handle:
        records = list(csv.DictReader(handle))
    assert [r['metric'] for r in records] == ['throughput_bps', 'sinr_db']
    assert all(r['trials'] == '2' for r in records)
