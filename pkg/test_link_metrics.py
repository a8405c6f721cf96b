"""
Tests for the noise budget and the three SINR forms
"""

import math

import numpy as np
import pytest
from scipy.constants import speed_of_light

from utils.atmosphere import transmittance
from utils.channel import ChannelSet, CsiErrorParams
from utils.errors import DimensionMismatchError, InvalidInputError
from utils.geometry import place_scenario
from utils.link_metrics import (NoiseBudget, RisPhases, build_context, error_covariance_scale,
                                molecular_noise, sinr, sinr_batch, sinr_fractional_form, sinr_trace_form,
                                thermal_noise_variance, true_sinr)
from utils.scenario import ScenarioConfig


def _cn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def random_instance(rng, N=8, N_R=4, N_I=2, zeta=1, robust=True, visibility=None):
    """Random channels, powers and noise of unit-order magnitude"""
    K = N_I + 1
    if visibility is None:
        visibility = rng.integers(0, 2, size=K)
    channels = ChannelSet(_cn(rng, (K, N_R, N)), _cn(rng, (K, N_R)), np.asarray(visibility))
    powers = rng.uniform(0.5, 2.0, size=K)
    noise = NoiseBudget(rng.uniform(0.1, 1.0), rng.uniform(0.0, 0.2, K) * channels.visibility,
                        rng.uniform(0.0, 0.02, K), zeta, N)
    if robust:
        err = CsiErrorParams(rng.uniform(0.0, 0.05, K), rng.uniform(0.0, 0.05, K))
    else:
        err = CsiErrorParams.perfect(K)
    scale = error_covariance_scale(err, N, channels.visibility)
    return channels, powers, noise, scale


def _unit(rng, n):
    u = _cn(rng, n)
    return u / np.linalg.norm(u)


def test_thermal_noise_variance():
    # -174 dBm/Hz over 10 GHz is about 3.98e-11 W
    assert thermal_noise_variance(-174.0, 10e9) == pytest.approx(3.981e-11, rel=1e-3)
    with pytest.raises(InvalidInputError):
        thermal_noise_variance(-174.0, 0.0)


def test_molecular_noise_matches_scalar_oracle():
    cfg = ScenarioConfig()
    geometry = place_scenario(cfg)
    powers = np.array([2.0, 2.0])
    budget = molecular_noise(geometry, powers, np.array([1, 1]), 220e9, 1, 3.98e-11)

    f = 220e9
    for i in range(2):
        d_i = geometry.direct_links[i].distance
        d_gamma = geometry.incident_links[i].distance
        m1 = (speed_of_light / (4 * math.pi * f * d_i)) ** 2 * 2.0 * (1 - transmittance(f, d_i))
        m2 = (speed_of_light ** 2 / (16 * (math.pi * f) ** 2 * 1.0 * d_gamma)) ** 2 * 2.0 * (
            1 - transmittance(f, 1.0) * transmittance(f, d_gamma))
        assert budget.sigma_m1_i2[i] == pytest.approx(m1, rel=1e-12)
        assert budget.sigma_m2_i2[i] == pytest.approx(m2, rel=1e-12)
        assert budget.sigma_m_i2[i] == pytest.approx(m1 + 100 * m2, rel=1e-12)
    assert budget.sigma_m2 == pytest.approx(budget.sigma_m1_2 + 100 * budget.sigma_m2_2, rel=1e-12)
    assert budget.sigma_m2 == pytest.approx(float(np.sum(budget.sigma_m_i2)), rel=1e-15)


def test_molecular_noise_lossless_and_blocked():
    from utils.atmosphere import AtmosphereConfig
    geometry = place_scenario(ScenarioConfig())
    dry = molecular_noise(geometry, np.array([2.0, 2.0]), np.array([1, 1]), 220e9, 1, 1e-11,
                          atm=AtmosphereConfig(relative_humidity_percent=0.0))
    assert dry.sigma_m2 == 0.0
    blocked = molecular_noise(geometry, np.array([2.0, 2.0]), np.array([0, 1]), 220e9, 1, 1e-11)
    assert blocked.sigma_m1_i2[0] == 0.0 and blocked.sigma_m1_i2[1] > 0.0


def test_molecular_noise_linear_in_power():
    geometry = place_scenario(ScenarioConfig())
    one = molecular_noise(geometry, np.array([1.0, 1.0]), np.array([1, 1]), 220e9, 1, 1e-11)
    three = molecular_noise(geometry, np.array([3.0, 3.0]), np.array([1, 1]), 220e9, 1, 1e-11)
    assert three.sigma_m2 == pytest.approx(3.0 * one.sigma_m2, rel=1e-12)


def test_error_covariance_scale():
    err = CsiErrorParams(np.array([math.sqrt(1e-13)]), np.array([math.sqrt(1e-13)]))
    assert error_covariance_scale(err, 100, np.array([1]))[0] == pytest.approx(1.01e-11, rel=1e-12)
    assert error_covariance_scale(CsiErrorParams.perfect(2), 100, np.array([1, 1])).tolist() == [0.0, 0.0]


def test_ris_phases():
    phases = RisPhases(np.array([0.0, math.pi / 2]))
    np.testing.assert_allclose(phases.theta0, [1.0, 1j, 1.0], atol=1e-15)
    recovered = RisPhases.from_theta(np.array([2j, 0.0]))
    np.testing.assert_allclose(recovered.theta, [1j, 1.0], atol=1e-15)


def test_noise_only_denominator():
    rng = np.random.default_rng(0)
    channels, powers, noise, scale = random_instance(rng, N_I=0, zeta=0, robust=False)
    phases = RisPhases.random(channels.N, rng)
    u = _unit(rng, channels.N_R)
    ctx = build_context(channels, powers, noise, scale, u=u)
    expected = powers[0] * abs(np.conj(u) @ channels.stacked[0] @ phases.theta0) ** 2 / noise.sigma_w2
    assert sinr(u, phases, ctx) == pytest.approx(expected, rel=1e-12)
    np.testing.assert_allclose(ctx.M, 0.0, atol=1e-15)
    assert ctx.alpha == pytest.approx(noise.sigma_w2, rel=1e-12)


def test_phase_invariance_of_beamformer():
    rng = np.random.default_rng(1)
    channels, powers, noise, scale = random_instance(rng)
    ctx = build_context(channels, powers, noise, scale)
    phases = RisPhases.random(channels.N, rng)
    u = _unit(rng, channels.N_R)
    assert sinr(u * np.exp(0.7j), phases, ctx) == pytest.approx(sinr(u, phases, ctx), rel=1e-12)


@pytest.mark.parametrize("zeta", [0, 1])
@pytest.mark.parametrize("robust", [True, False])
def test_three_forms_agree(zeta, robust):
    rng = np.random.default_rng(10 + zeta + 2 * robust)
    for _ in range(25):
        channels, powers, noise, scale = random_instance(rng, zeta=zeta, robust=robust)
        u = _unit(rng, channels.N_R)
        phases = RisPhases.random(channels.N, rng)
        ctx = build_context(channels, powers, noise, scale, u=u)
        direct = sinr(u, phases, ctx)
        assert sinr_trace_form(phases, ctx) == pytest.approx(direct, rel=1e-9)
        assert sinr_fractional_form(phases, ctx) == pytest.approx(direct, rel=1e-9)


def test_denominator_identity():
    rng = np.random.default_rng(2)
    channels, powers, noise, scale = random_instance(rng)
    u = _unit(rng, channels.N_R)
    phases = RisPhases.random(channels.N, rng)
    ctx = build_context(channels, powers, noise, scale, u=u)
    theta0 = phases.theta0
    quadratic = np.real(np.conj(theta0) @ ctx.M @ theta0) + ctx.alpha
    interference = sum(powers[i] * abs(np.conj(u) @ channels.stacked[i] @ theta0) ** 2 for i in range(1, 3))
    assert quadratic == pytest.approx(interference + ctx.noise_floor, rel=1e-12)


def test_forms_are_hermitian():
    rng = np.random.default_rng(3)
    channels, powers, noise, scale = random_instance(rng)
    ctx = build_context(channels, powers, noise, scale, u=_unit(rng, channels.N_R),
                        phases=RisPhases.random(channels.N, rng))
    for matrix in (ctx.M, ctx.K, *ctx.G, *ctx.R, *ctx.B):
        assert np.linalg.norm(matrix - np.conj(matrix).T) < 1e-12


def test_zeta_zero_removes_molecular_term():
    rng = np.random.default_rng(4)
    channels, powers, noise, scale = random_instance(rng, zeta=1)
    off = build_context(channels, powers, noise.with_zeta(0), scale)
    on = build_context(channels, powers, noise, scale)
    assert off.noise_floor == pytest.approx(off.rho_total + noise.sigma_w2, rel=1e-15)
    assert on.noise_floor - off.noise_floor == pytest.approx(noise.sigma_m2, rel=1e-9)


def test_sinr_batch_matches_single_evaluation():
    rng = np.random.default_rng(5)
    channels, powers, noise, scale = random_instance(rng)
    ctx = build_context(channels, powers, noise, scale)
    u = _unit(rng, channels.N_R)
    thetas = np.exp(1j * rng.uniform(-math.pi, math.pi, (6, channels.N)))
    batch = sinr_batch(u, thetas, ctx)
    single = [sinr(u, RisPhases.from_theta(t), ctx) for t in thetas]
    np.testing.assert_allclose(batch, single, rtol=1e-12)


def test_true_sinr_ignores_error_covariance():
    rng = np.random.default_rng(6)
    channels, powers, noise, _ = random_instance(rng)
    u = _unit(rng, channels.N_R)
    phases = RisPhases.random(channels.N, rng)
    exact = build_context(channels, powers, noise, np.zeros(3))
    assert true_sinr(u, phases, channels, powers, noise) == pytest.approx(sinr(u, phases, exact), rel=1e-15)


def test_dimension_checks():
    rng = np.random.default_rng(7)
    channels, powers, noise, scale = random_instance(rng)
    with pytest.raises(DimensionMismatchError):
        build_context(channels, powers[:2], noise, scale)
    ctx = build_context(channels, powers, noise, scale)
    with pytest.raises(DimensionMismatchError):
        ctx.with_beamformer(np.ones(channels.N_R + 1))
    with pytest.raises(DimensionMismatchError):
        ctx.with_phases(RisPhases(np.zeros(channels.N + 1)))
