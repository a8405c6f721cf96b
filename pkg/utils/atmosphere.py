import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.constants import speed_of_light

from utils.errors import DegenerateInputError, InvalidInputError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Pole of the Buck equation in Celsius
BUCK_POLE_C = -240.97

# Per-line coefficients (a, b, c, d, e): numerator a*mu*(b*mu + c), width (d*mu + e)**2.
# Lines 1..4 use the A/B, C/D, E/F and G/H pairs respectively.
LINE_COEFFICIENTS = (
    (0.2251, 0.1314, 0.0297, 0.4127, 0.0932),
    (2.053, 0.1717, 0.0306, 0.5394, 0.0961),
    (0.177, 0.0832, 0.0213, 0.2615, 0.0668),
    (2.146, 0.1206, 0.0277, 0.3789, 0.0871),
)


@dataclass(frozen=True)
class AtmosphereConfig:
    """Atmospheric state that drives the molecular absorption coefficient"""

    relative_humidity_percent: float = 50.0
    pressure_hpa: float = 1013.25
    temperature_c: float = 27.0

    def __post_init__(self):
        if not 0.0 <= self.relative_humidity_percent <= 100.0:
            raise InvalidInputError(
                f"Relative humidity must lie in [0, 100] %, got {self.relative_humidity_percent}"
            )
        if self.pressure_hpa <= 0.0:
            raise InvalidInputError(f"Pressure must be positive, got {self.pressure_hpa} hPa")
        if self.temperature_c <= BUCK_POLE_C:
            raise InvalidInputError(
                f"Temperature must exceed {BUCK_POLE_C} C, got {self.temperature_c}"
            )


@dataclass(frozen=True)
class AbsorptionModel:
    """
    Simple water-vapour absorption model valid between 200 and 450 GHz.

    Four absorption lines (centres in cm^-1) plus a fourth-order polynomial
    equalization term. With ``squared_deviation`` the distance to a line centre
    enters squared; with it disabled the deviation enters linearly.
    """

    line_centers_cm_inv: Tuple[float, float, float, float] = (10.84, 12.68, 14.65, 14.94)
    poly_coeffs: Tuple[float, float, float, float, float] = (
        8.495e-48, -9.932e-36, 4.336e-24, -8.33e-13, 5.953e-2,
    )
    validity_band_hz: Tuple[float, float] = (200e9, 450e9)
    squared_deviation: bool = True


DEFAULT_ATMOSPHERE = AtmosphereConfig()
DEFAULT_ABSORPTION = AbsorptionModel()


def water_vapor_pressure(temperature_c, pressure_hpa):
    """
    Saturation water vapour pressure from the Buck equation

    Args:
        temperature_c (float): Temperature in Celsius
        pressure_hpa (float): Ambient pressure in hectopascals

    Returns:
        float: Saturation vapour pressure in hectopascals
    """
    if pressure_hpa <= 0.0:
        raise InvalidInputError(f"Pressure must be positive, got {pressure_hpa} hPa")
    if temperature_c <= BUCK_POLE_C:
        raise InvalidInputError(f"Temperature must exceed {BUCK_POLE_C} C, got {temperature_c}")

    enhancement = 1.0007 + 3.46e-6 * pressure_hpa
    return 6.1121 * enhancement * np.exp(17.502 * temperature_c / (240.97 + temperature_c))


def volume_mixing_ratio(atm: AtmosphereConfig) -> float:
    """Volume mixing ratio of water vapour for the given atmosphere"""
    if atm.pressure_hpa == 0.0:
        raise InvalidInputError("Pressure must be non-zero")
    p_w = water_vapor_pressure(atm.temperature_c, atm.pressure_hpa)
    return (atm.relative_humidity_percent / 100.0) * p_w / atm.pressure_hpa


def _line_terms(wavenumber, mu, model: AbsorptionModel):
    total = np.zeros_like(wavenumber)
    for (a, b, c, d, e), center in zip(LINE_COEFFICIENTS, model.line_centers_cm_inv):
        strength = a * mu * (b * mu + c)
        width = (d * mu + e) ** 2
        deviation = wavenumber - center
        if model.squared_deviation:
            deviation = deviation ** 2
        total = total + strength / (width + deviation)
    return total


def _equalization_term(frequency_hz, mu, model: AbsorptionModel):
    q1, q2, q3, q4, q5 = model.poly_coeffs
    poly = q1 * frequency_hz ** 4 + q2 * frequency_hz ** 3 + q3 * frequency_hz ** 2 + q4 * frequency_hz + q5
    return mu / 0.0157 * poly


def absorption_coefficient(frequency_hz: ArrayLike, atm: AtmosphereConfig = DEFAULT_ATMOSPHERE,
                           model: AbsorptionModel = DEFAULT_ABSORPTION) -> ArrayLike:
    """
    Molecular absorption coefficient k(f) in 1/m

    Args:
        frequency_hz: Carrier frequency (scalar or array) in Hz
        atm (AtmosphereConfig): Atmospheric state
        model (AbsorptionModel): Line constants and deviation form

    Returns:
        Absorption coefficient with the same shape as ``frequency_hz``
    """
    f = np.asarray(frequency_hz, dtype=float)
    if np.any(f <= 0.0):
        raise InvalidInputError("Frequency must be positive")

    low, high = model.validity_band_hz
    if np.any((f < low) | (f > high)):
        logger.warning(
            f"Frequency outside the {low / 1e9:.0f}-{high / 1e9:.0f} GHz validity band; "
            f"absorption values are extrapolated"
        )

    mu = volume_mixing_ratio(atm)
    wavenumber = f / (100.0 * speed_of_light)
    k = _line_terms(wavenumber, mu, model) + _equalization_term(f, mu, model)

    if k.ndim == 0:
        return float(k)
    return k


def transmittance(frequency_hz: ArrayLike, distance_m: ArrayLike,
                  atm: AtmosphereConfig = DEFAULT_ATMOSPHERE,
                  model: AbsorptionModel = DEFAULT_ABSORPTION) -> ArrayLike:
    """Fraction of power surviving molecular absorption over a distance"""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d < 0.0):
        raise InvalidInputError("Distance must be non-negative")

    tau = np.exp(-np.asarray(absorption_coefficient(frequency_hz, atm, model)) * d)
    if tau.ndim == 0:
        return float(tau)
    return tau


def rician_factor_from_transmittance(tau: float) -> float:
    """K_d = tau / (1 - tau); raises DegenerateInputError when tau is 1"""
    if 1.0 - tau <= np.finfo(float).eps:
        raise DegenerateInputError(
            f"Transmittance {tau!r} leaves no re-radiated power; the Rician factor is unbounded"
        )
    return tau / (1.0 - tau)


def rician_factor(frequency_hz: float, distance_m: float,
                  atm: AtmosphereConfig = DEFAULT_ATMOSPHERE,
                  model: AbsorptionModel = DEFAULT_ABSORPTION) -> float:
    """
    LOS-to-NLOS power ratio of the scattering manifestation of re-radiation

    Args:
        frequency_hz (float): Carrier frequency in Hz
        distance_m (float): Link distance in meters
        atm (AtmosphereConfig): Atmospheric state
        model (AbsorptionModel): Absorption model

    Returns:
        float: Rician factor K_d
    """
    if distance_m <= 0.0:
        raise DegenerateInputError("Zero distance gives unit transmittance and an unbounded Rician factor")
    return rician_factor_from_transmittance(transmittance(frequency_hz, distance_m, atm, model))
