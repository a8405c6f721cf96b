import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from utils.atmosphere import (DEFAULT_ABSORPTION, DEFAULT_ATMOSPHERE, AbsorptionModel,
                              AtmosphereConfig, transmittance)
from utils.channel import ChannelSet, CsiErrorParams, free_space_amplitude
from utils.errors import DimensionMismatchError, InvalidInputError

logger = logging.getLogger(__name__)


def thermal_noise_variance(noise_dbm_per_hz: float, bandwidth_hz: float) -> float:
    """Thermal noise power in W over ``bandwidth_hz`` for a density given in dBm/Hz"""
    if bandwidth_hz <= 0.0:
        raise InvalidInputError(f"Bandwidth must be positive, got {bandwidth_hz}")
    return 10.0 ** ((noise_dbm_per_hz - 30.0) / 10.0) * bandwidth_hz


@dataclass(frozen=True, eq=False)
class NoiseBudget:
    """
    Thermal and molecular noise variances in W.

    ``sigma_m1_i2`` holds the direct-link term of each transmitter (already zero
    for blocked links), ``sigma_m2_i2`` the reflected-link term per RIS element.
    """

    sigma_w2: float
    sigma_m1_i2: np.ndarray
    sigma_m2_i2: np.ndarray
    zeta: int
    N: int

    def __post_init__(self):
        if self.sigma_w2 < 0.0:
            raise InvalidInputError(f"Thermal noise variance must be non-negative, got {self.sigma_w2}")
        if self.zeta not in (0, 1):
            raise InvalidInputError(f"zeta must be 0 or 1, got {self.zeta}")
        m1 = np.atleast_1d(np.asarray(self.sigma_m1_i2, dtype=float))
        m2 = np.atleast_1d(np.asarray(self.sigma_m2_i2, dtype=float))
        if m1.shape != m2.shape:
            raise DimensionMismatchError("Direct and reflected molecular variances differ in shape")
        if np.any(m1 < 0.0) or np.any(m2 < 0.0):
            raise InvalidInputError("Molecular noise variances must be non-negative")
        object.__setattr__(self, 'sigma_m1_i2', m1)
        object.__setattr__(self, 'sigma_m2_i2', m2)

    @property
    def sigma_m1_2(self) -> float:
        return float(np.sum(self.sigma_m1_i2))

    @property
    def sigma_m2_2(self) -> float:
        return float(np.sum(self.sigma_m2_i2))

    @property
    def sigma_m_i2(self) -> np.ndarray:
        """Total molecular variance contributed by each transmitter"""
        return self.sigma_m1_i2 + self.N * self.sigma_m2_i2

    @property
    def sigma_m2(self) -> float:
        return float(np.sum(self.sigma_m_i2))

    @property
    def molecular_term(self) -> float:
        """zeta * sigma_m^2, the molecular contribution to the SINR denominator"""
        return self.zeta * self.sigma_m2

    def with_zeta(self, zeta: int) -> 'NoiseBudget':
        return replace(self, zeta=zeta)


def molecular_noise(geometry, powers: np.ndarray, visibility: np.ndarray, frequency_hz: float,
                    zeta: int, sigma_w2: float, atm: AtmosphereConfig = DEFAULT_ATMOSPHERE,
                    model: AbsorptionModel = DEFAULT_ABSORPTION) -> NoiseBudget:
    """
    Re-radiation noise of every transmitter, modeled as additive Gaussian noise

    Args:
        geometry (ScenarioGeometry): Link distances d_i, d_gamma_i and d_alpha
        powers (np.ndarray): Transmit power per transmitter in W
        visibility (np.ndarray): Direct-link indicator per transmitter
        frequency_hz (float): Carrier frequency
        zeta (int): Re-radiation switch stored with the budget
        sigma_w2 (float): Thermal noise variance in W

    Returns:
        NoiseBudget: Per-transmitter and aggregate variances
    """
    powers = np.asarray(powers, dtype=float)
    visibility = np.asarray(visibility, dtype=int)
    count = geometry.transmitter_count
    if powers.shape != (count,) or visibility.shape != (count,):
        raise DimensionMismatchError(f"Expected powers and visibility for {count} transmitters")

    d_alpha = geometry.ris_to_rx.distance
    tau_alpha = transmittance(frequency_hz, d_alpha, atm, model)
    m1 = np.zeros(count)
    m2 = np.zeros(count)
    for i in range(count):
        d_i = geometry.direct_links[i].distance
        d_gamma = geometry.incident_links[i].distance
        if min(d_i, d_gamma, d_alpha) <= 0.0:
            raise InvalidInputError("Link distances must be positive")
        direct_gain = free_space_amplitude(frequency_hz, d_i) ** 2
        m1[i] = visibility[i] * direct_gain * powers[i] * (1.0 - transmittance(frequency_hz, d_i, atm, model))
        cascade_gain = (free_space_amplitude(frequency_hz, d_alpha) * free_space_amplitude(frequency_hz, d_gamma)) ** 2
        m2[i] = cascade_gain * powers[i] * (1.0 - tau_alpha * transmittance(frequency_hz, d_gamma, atm, model))

    budget = NoiseBudget(sigma_w2, m1, m2, zeta, geometry.ris_layout.count)
    logger.debug(f"Molecular noise sigma_m^2={budget.sigma_m2:.3e} W, thermal {sigma_w2:.3e} W")
    return budget


def error_covariance_scale(err: CsiErrorParams, N: int, visibility: np.ndarray) -> np.ndarray:
    """Scalar of each error covariance C_e_i = (N rho_i^2 + I_i rho'_i^2) Identity"""
    visibility = np.asarray(visibility, dtype=float)
    if visibility.shape != err.rho.shape:
        raise DimensionMismatchError("Visibility and CSI error parameters differ in length")
    return N * err.rho ** 2 + visibility * err.rho_prime ** 2


@dataclass(frozen=True, eq=False)
class RisPhases:
    """RIS phase shifts phi (radians); theta = exp(j phi)"""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float).ravel()
        if not np.all(np.isfinite(phi)):
            raise InvalidInputError("RIS phases must be finite")
        phi.setflags(write=False)
        object.__setattr__(self, 'phi', phi)

    @property
    def N(self) -> int:
        return self.phi.size

    @property
    def theta(self) -> np.ndarray:
        return np.exp(1j * self.phi)

    @property
    def theta0(self) -> np.ndarray:
        return np.append(self.theta, 1.0 + 0.0j)

    @classmethod
    def from_theta(cls, theta: np.ndarray) -> 'RisPhases':
        """Keep only the phase of each entry; zero entries map to phase 0"""
        theta = np.asarray(theta, dtype=complex)
        return cls(np.where(np.abs(theta) > 0.0, np.angle(theta), 0.0))

    @classmethod
    def random(cls, N: int, rng: np.random.Generator) -> 'RisPhases':
        return cls(rng.uniform(-math.pi, math.pi, size=N))


@dataclass(frozen=True, eq=False)
class SinrContext:
    """
    Everything the solvers need to evaluate the SINR of (u, theta).

    Beamformer-side form B_i exists once phases are fixed; RIS-side forms
    (G_i, M, alpha for SDR and R_i, K, c_i, z for GD) exist once u is fixed.
    """

    H: np.ndarray                 # (K, N_R, N+1) estimated stacked channels
    powers: np.ndarray            # (K,)
    error_scale: np.ndarray       # (K,) N rho_i^2 + I_i rho'_i^2
    noise: NoiseBudget
    u: Optional[np.ndarray] = None
    phases: Optional[RisPhases] = None
    B: Optional[np.ndarray] = None        # (K, N_R, N_R)
    G: Optional[np.ndarray] = None        # (K, N+1, N+1)
    M: Optional[np.ndarray] = None
    alpha: Optional[float] = None
    R: Optional[np.ndarray] = None        # (K, N, N)
    K: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None        # (K, N)
    z: Optional[np.ndarray] = None

    @property
    def N(self) -> int:
        return self.H.shape[2] - 1

    @property
    def N_R(self) -> int:
        return self.H.shape[1]

    @property
    def rho_total(self) -> float:
        return float(np.dot(self.powers, self.error_scale))

    @property
    def noise_floor(self) -> float:
        """rho_total + sigma_w^2 + zeta sigma_m^2, the u-independent part of the denominator"""
        return self.rho_total + self.noise.sigma_w2 + self.noise.molecular_term

    def with_phases(self, phases: RisPhases) -> 'SinrContext':
        if phases.N != self.N:
            raise DimensionMismatchError(f"Expected {self.N} RIS phases, got {phases.N}")
        e = self.H @ phases.theta0
        B = e[:, :, None] * np.conj(e)[:, None, :]
        return replace(self, phases=phases, B=B)

    def with_beamformer(self, u: np.ndarray) -> 'SinrContext':
        u = np.asarray(u, dtype=complex).ravel()
        if u.size != self.N_R:
            raise DimensionMismatchError(f"Beamformer has {u.size} entries, expected {self.N_R}")

        N = self.N
        identity = np.eye(N + 1)
        rho_total = self.rho_total
        noise = self.noise
        zeta = noise.zeta

        V = np.einsum('r,krn->kn', np.conj(u), self.H)
        G = self.powers[:, None, None] * (np.conj(V)[:, :, None] * V[:, None, :])
        M = G[1:].sum(axis=0) + (rho_total / N + zeta * noise.sigma_m2_2) * identity
        alpha = noise.sigma_w2 + zeta * (noise.sigma_m1_2 - noise.sigma_m2_2) - rho_total / N

        w = V[:, :N]
        v = V[:, N]
        R = self.powers[:, None, None] * (
            np.conj(w)[:, :, None] * w[:, None, :] + (np.abs(v) ** 2 / N)[:, None, None] * np.eye(N)
        )
        c = self.powers[:, None] * np.conj(v)[:, None] * w
        K = R[1:].sum(axis=0) + (self.noise_floor / N) * np.eye(N)
        z = c[1:].sum(axis=0)
        return replace(self, u=u, G=G, M=M, alpha=float(alpha), R=R, K=K, c=c, z=z)


def build_context(channels: ChannelSet, powers: np.ndarray, noise: NoiseBudget, error_scale: np.ndarray,
                  u: Optional[np.ndarray] = None, phases: Optional[RisPhases] = None) -> SinrContext:
    """
    Assemble the SINR context of an (estimated) channel set

    Args:
        channels (ChannelSet): Channels the optimizer works with
        powers (np.ndarray): Transmit powers in W
        noise (NoiseBudget): Noise variances and the assumed zeta
        error_scale (np.ndarray): Output of error_covariance_scale (zeros for non-robust)
        u: Beamformer fixing the RIS-side forms
        phases: RIS phases fixing the beamformer-side forms

    Returns:
        SinrContext: Immutable context
    """
    powers = np.asarray(powers, dtype=float)
    error_scale = np.asarray(error_scale, dtype=float)
    count = channels.transmitter_count
    if powers.shape != (count,) or error_scale.shape != (count,):
        raise DimensionMismatchError(f"Expected powers and error scales for {count} transmitters")
    if noise.N != channels.N:
        raise DimensionMismatchError(f"Noise budget is for N={noise.N}, channels have N={channels.N}")

    ctx = SinrContext(H=channels.stacked, powers=powers, error_scale=error_scale, noise=noise)
    if phases is not None:
        ctx = ctx.with_phases(phases)
    if u is not None:
        ctx = ctx.with_beamformer(u)
    return ctx


def sinr(u: np.ndarray, phases: RisPhases, ctx: SinrContext) -> float:
    """Direct evaluation of the SINR for unit-norm u"""
    gains = np.abs(np.conj(u) @ (ctx.H @ phases.theta0).T) ** 2 * ctx.powers
    return float(gains[0] / (gains[1:].sum() + ctx.noise_floor))


def sinr_batch(u: np.ndarray, thetas: np.ndarray, ctx: SinrContext) -> np.ndarray:
    """SINR of many unit-modulus theta rows (T, N) for one beamformer"""
    thetas = np.atleast_2d(thetas)
    theta0s = np.column_stack([thetas, np.ones(thetas.shape[0])])
    V = np.einsum('r,krn->kn', np.conj(np.asarray(u)), ctx.H)
    gains = np.abs(V @ theta0s.T) ** 2 * ctx.powers[:, None]
    return gains[0] / (gains[1:].sum(axis=0) + ctx.noise_floor)


def sinr_trace_form(phases: RisPhases, ctx: SinrContext) -> float:
    """theta0^H G_0 theta0 / (theta0^H M theta0 + alpha)"""
    if ctx.G is None:
        raise InvalidInputError("Context has no beamformer; call with_beamformer first")
    theta0 = phases.theta0
    numerator = np.real(np.conj(theta0) @ ctx.G[0] @ theta0)
    denominator = np.real(np.conj(theta0) @ ctx.M @ theta0) + ctx.alpha
    return float(numerator / denominator)


def fractional_terms(theta: np.ndarray, ctx: SinrContext):
    """Numerator and denominator of the GD fractional form at theta"""
    numerator = np.real(np.conj(theta) @ ctx.R[0] @ theta) + 2.0 * np.real(ctx.c[0] @ theta)
    denominator = np.real(np.conj(theta) @ ctx.K @ theta) + 2.0 * np.real(ctx.z @ theta)
    return float(numerator), float(denominator)


def sinr_fractional_form(phases: RisPhases, ctx: SinrContext) -> float:
    """(theta^H R_0 theta + 2Re(c_0 theta)) / (theta^H K theta + 2Re(z theta))"""
    if ctx.R is None:
        raise InvalidInputError("Context has no beamformer; call with_beamformer first")
    numerator, denominator = fractional_terms(phases.theta, ctx)
    return numerator / denominator


def true_sinr(u: np.ndarray, phases: RisPhases, channels: ChannelSet, powers: np.ndarray,
              noise: NoiseBudget) -> float:
    """SINR an optimized (u, theta) achieves on the true channels, where no estimation error remains"""
    ctx = build_context(channels, powers, noise, np.zeros(channels.transmitter_count))
    return sinr(u, phases, ctx)
