import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.constants import speed_of_light

from utils.atmosphere import (DEFAULT_ABSORPTION, DEFAULT_ATMOSPHERE, AbsorptionModel,
                              AtmosphereConfig, rician_factor)
from utils.errors import DegenerateInputError, DimensionMismatchError, InvalidInputError

logger = logging.getLogger(__name__)

VISIBILITY_MODES = ('nd', 'd', 'bernoulli')


def free_space_amplitude(frequency_hz: float, distance_m: float) -> float:
    """Amplitude path loss c / (4 pi f d)"""
    if frequency_hz <= 0.0 or distance_m <= 0.0:
        raise InvalidInputError("Frequency and distance must be positive")
    return speed_of_light / (4.0 * math.pi * frequency_hz * distance_m)


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly symmetric complex Gaussian entries with the given variance"""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True, eq=False)
class UnifiedChannelParams:
    """
    One link of the unified re-radiation channel model.

    zeta=1 treats re-radiated energy as noise (LOS weight sqrt(tau), no NLOS part);
    zeta=0 treats it as a scattered NLOS component with Rician factor K_d.
    """

    zeta: int
    frequency_hz: float
    distance_m: float
    rician_k: float
    los_response: np.ndarray
    pathloss_amp: float

    def __post_init__(self):
        if self.zeta not in (0, 1):
            raise InvalidInputError(f"zeta must be 0 or 1, got {self.zeta}")
        if not self.pathloss_amp > 0.0:
            raise InvalidInputError(f"Path loss amplitude must be positive, got {self.pathloss_amp}")
        if self.rician_k < 0.0:
            raise InvalidInputError(f"Rician factor must be non-negative, got {self.rician_k}")

    @classmethod
    def from_link(cls, zeta: int, frequency_hz: float, distance_m: float, los_response: np.ndarray,
                  atm: AtmosphereConfig = DEFAULT_ATMOSPHERE,
                  model: AbsorptionModel = DEFAULT_ABSORPTION) -> 'UnifiedChannelParams':
        """Derive K_d and the path loss of a link from its geometry and the atmosphere"""
        try:
            k_d = rician_factor(frequency_hz, distance_m, atm, model)
        except DegenerateInputError:
            logger.warning(f"Unit transmittance over {distance_m} m; link reduces to pure LOS")
            k_d = math.inf
        return cls(zeta, frequency_hz, distance_m, k_d, np.asarray(los_response),
                   free_space_amplitude(frequency_hz, distance_m))

    @property
    def los_weight(self) -> float:
        if math.isinf(self.rician_k):
            return 1.0
        return math.sqrt(self.rician_k / (self.rician_k + 1.0))

    @property
    def nlos_weight(self) -> float:
        if math.isinf(self.rician_k):
            return 0.0
        return math.sqrt((1 - self.zeta) / (self.rician_k + 1.0))


def draw_channel(params: UnifiedChannelParams, rng: np.random.Generator) -> np.ndarray:
    """
    Draw one realization of a unified Rician channel

    Args:
        params (UnifiedChannelParams): Link description
        rng (np.random.Generator): Random stream

    Returns:
        np.ndarray: Channel with the shape of ``params.los_response``
    """
    los = np.asarray(params.los_response, dtype=complex)
    phase = rng.uniform(-math.pi, math.pi)
    # NLOS entries are drawn even when unused so paired zeta runs share a stream
    scattered = complex_normal(rng, los.shape)
    channel = params.los_weight * np.exp(1j * phase) * los + params.nlos_weight * scattered
    return params.pathloss_amp * channel


def assemble_stacked(H_SR: np.ndarray, h_st: np.ndarray, h_rt: np.ndarray, visibility: int) -> np.ndarray:
    """H_i = [H_SR diag(h_ST_i)  I_i h_RT_i], shape N_R x (N+1)"""
    H_SR = np.asarray(H_SR)
    h_st = np.asarray(h_st).ravel()
    if H_SR.ndim != 2 or H_SR.shape[1] != h_st.size:
        raise DimensionMismatchError(
            f"RIS-Rx channel {H_SR.shape} does not match Tx-RIS channel of length {h_st.size}"
        )
    return stack_reflected(H_SR * h_st[None, :], h_rt, visibility)


def stack_reflected(reflected: np.ndarray, h_rt: np.ndarray, visibility: int) -> np.ndarray:
    reflected = np.asarray(reflected)
    h_rt = np.asarray(h_rt).ravel()
    if reflected.shape[0] != h_rt.size:
        raise DimensionMismatchError(
            f"Reflected channel has {reflected.shape[0]} rows but direct channel has {h_rt.size} entries"
        )
    return np.column_stack([reflected, visibility * h_rt])


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """
    Channels of the signal transmitter (index 0) and every interferer.

    ``reflected[i]`` is Z_i = H_SR diag(h_ST_i). Estimated sets carry only the
    reflected and direct channels; ``H_SR`` and ``h_st`` are then None.
    """

    reflected: np.ndarray          # (K, N_R, N)
    h_rt: np.ndarray               # (K, N_R)
    visibility: np.ndarray         # (K,)
    H_SR: Optional[np.ndarray] = None
    h_st: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.reflected.ndim != 3:
            raise DimensionMismatchError(f"Reflected channels must be 3-D, got shape {self.reflected.shape}")
        count, n_rx, _ = self.reflected.shape
        if self.h_rt.shape != (count, n_rx):
            raise DimensionMismatchError(
                f"Direct channels {self.h_rt.shape} do not match reflected channels {self.reflected.shape}"
            )
        if np.shape(self.visibility) != (count,):
            raise DimensionMismatchError(f"Expected {count} visibility flags, got {np.shape(self.visibility)}")

    @property
    def transmitter_count(self) -> int:
        return self.reflected.shape[0]

    @property
    def N_R(self) -> int:
        return self.reflected.shape[1]

    @property
    def N(self) -> int:
        return self.reflected.shape[2]

    @cached_property
    def stacked(self) -> np.ndarray:
        """All H_i, shape (K, N_R, N+1)"""
        return np.stack([
            stack_reflected(self.reflected[i], self.h_rt[i], int(self.visibility[i]))
            for i in range(self.transmitter_count)
        ])


def draw_channel_set(geometry, visibility: np.ndarray, zeta: int, frequency_hz: float,
                     rng: np.random.Generator, atm: AtmosphereConfig = DEFAULT_ATMOSPHERE,
                     model: AbsorptionModel = DEFAULT_ABSORPTION) -> ChannelSet:
    """
    Draw the true channels of every transmitter for one trial

    Args:
        geometry (ScenarioGeometry): Placement with LOS responses
        visibility (np.ndarray): Direct-link indicator per transmitter
        zeta (int): Re-radiation switch
        frequency_hz (float): Carrier frequency
        rng (np.random.Generator): Random stream of this trial

    Returns:
        ChannelSet: True channels
    """
    visibility = np.asarray(visibility, dtype=int)
    count = geometry.transmitter_count
    if visibility.shape != (count,):
        raise DimensionMismatchError(f"Expected {count} visibility flags, got {visibility.shape}")

    H_SR = draw_channel(UnifiedChannelParams.from_link(
        zeta, frequency_hz, geometry.ris_to_rx.distance, geometry.ris_rx_response(), atm, model), rng)

    h_st = np.stack([
        draw_channel(UnifiedChannelParams.from_link(
            zeta, frequency_hz, geometry.incident_links[i].distance, geometry.incident_response(i), atm, model), rng)
        for i in range(count)
    ])
    h_rt = np.stack([
        draw_channel(UnifiedChannelParams.from_link(
            zeta, frequency_hz, geometry.direct_links[i].distance, geometry.direct_response(i), atm, model), rng)
        for i in range(count)
    ])
    stacked = np.stack([assemble_stacked(H_SR, h_st[i], h_rt[i], int(visibility[i])) for i in range(count)])
    return ChannelSet(reflected=stacked[:, :, :-1], h_rt=h_rt, visibility=visibility, H_SR=H_SR, h_st=h_st)


@dataclass(frozen=True, eq=False)
class CsiErrorParams:
    """Per-transmitter error standard deviations of the reflected (rho) and direct (rho') channels"""

    rho: np.ndarray
    rho_prime: np.ndarray

    def __post_init__(self):
        rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        rho_prime = np.atleast_1d(np.asarray(self.rho_prime, dtype=float))
        if rho.shape != rho_prime.shape:
            raise DimensionMismatchError(f"rho {rho.shape} and rho' {rho_prime.shape} differ in shape")
        if np.any(rho < 0.0) or np.any(rho_prime < 0.0):
            raise InvalidInputError("CSI error standard deviations must be non-negative")
        object.__setattr__(self, 'rho', rho)
        object.__setattr__(self, 'rho_prime', rho_prime)

    @classmethod
    def perfect(cls, count: int) -> 'CsiErrorParams':
        return cls(np.zeros(count), np.zeros(count))

    @classmethod
    def from_variances(cls, eta1_sq: float, eta2_sq: float, count: int) -> 'CsiErrorParams':
        """eta1^2 applies to the signal transmitter, eta2^2 to every interferer (both channels)"""
        if eta1_sq < 0.0 or eta2_sq < 0.0:
            raise InvalidInputError("CSI error variances must be non-negative")
        variances = np.full(count, eta2_sq, dtype=float)
        variances[0] = eta1_sq
        std = np.sqrt(variances)
        return cls(std, std.copy())

    @property
    def is_perfect(self) -> bool:
        return not (np.any(self.rho) or np.any(self.rho_prime))


def corrupt_csi(true_channels: ChannelSet, err: CsiErrorParams, rng: np.random.Generator) -> ChannelSet:
    """
    Estimated channels under the additive error model Z = Z_hat + Delta

    Args:
        true_channels (ChannelSet): Channels the link actually sees
        err (CsiErrorParams): Error standard deviations per transmitter
        rng (np.random.Generator): Random stream

    Returns:
        ChannelSet: Estimates with H_SR / h_st left unset
    """
    count = true_channels.transmitter_count
    if err.rho.shape != (count,):
        raise DimensionMismatchError(f"Expected CSI errors for {count} transmitters, got {err.rho.shape}")

    delta = complex_normal(rng, true_channels.reflected.shape) * err.rho[:, None, None]
    delta_direct = complex_normal(rng, true_channels.h_rt.shape) * err.rho_prime[:, None]
    return ChannelSet(
        reflected=true_channels.reflected - delta,
        h_rt=true_channels.h_rt - delta_direct,
        visibility=true_channels.visibility.copy(),
    )


def sample_visibility(mode: str, count: int, rng: np.random.Generator, los_probability: float = 0.5,
                      signal_los_probability: float = 0.0) -> np.ndarray:
    """
    Direct-link indicators for one trial.

    Interferers follow ``mode``: 'nd' blocks every direct link, 'd' keeps every
    one, 'bernoulli' draws each with ``los_probability``. The signal direct link
    is drawn with ``signal_los_probability`` (0 means always blocked).
    """
    if mode not in VISIBILITY_MODES:
        raise InvalidInputError(f"Unknown visibility mode {mode!r}; expected one of {VISIBILITY_MODES}")
    if not 0.0 <= los_probability <= 1.0 or not 0.0 <= signal_los_probability <= 1.0:
        raise InvalidInputError("LOS probabilities must lie in [0, 1]")

    draws = rng.random(count)
    visibility = np.zeros(count, dtype=int)
    visibility[0] = int(draws[0] < signal_los_probability)
    if mode == 'd':
        visibility[1:] = 1
    elif mode == 'bernoulli':
        visibility[1:] = (draws[1:] < los_probability).astype(int)
    return visibility
