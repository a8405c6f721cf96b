"""Closed-form stationary points of the one-element RIS SINR and grid-search checks."""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from utils.errors import DimensionMismatchError, InvalidInputError
from utils.link_metrics import SinrContext

logger = logging.getLogger(__name__)

GRID_POINTS = 100_000


@dataclass(frozen=True)
class OneElementParams:
    """gamma(x) = (L' + M' cos(s + x)) / (N' + P' cos(t + x))"""

    Lp: float
    Mp: float
    Np: float
    Pp: float
    s: float
    t: float
    c: float = 0.0

    def __post_init__(self):
        if self.Mp < 0.0 or self.Pp < 0.0 or self.c < 0.0:
            raise InvalidInputError("M', P' and c must be non-negative")
        if self.Np <= self.Pp:
            raise InvalidInputError(f"N' must exceed P' for a positive denominator, got N'={self.Np}, P'={self.Pp}")

    @classmethod
    def from_first_form(cls, P0: float, a: complex, h: complex, P1: float, b: complex, g: complex,
                        c: float) -> 'OneElementParams':
        """From P0|a e^{jx} + h|^2 / (P1|b e^{jx} + g|^2 + c)"""
        return cls(
            Lp=P0 * (abs(a) ** 2 + abs(h) ** 2),
            Mp=2.0 * P0 * abs(a) * abs(h),
            Np=P1 * (abs(b) ** 2 + abs(g) ** 2) + c,
            Pp=2.0 * P1 * abs(b) * abs(g),
            s=float(np.angle(a) - np.angle(h)),
            t=float(np.angle(b) - np.angle(g)),
            c=c,
        )

    @classmethod
    def from_context(cls, u: np.ndarray, ctx: SinrContext) -> 'OneElementParams':
        """One-element RIS with at most one interferer, for a fixed beamformer"""
        if ctx.N != 1 or ctx.H.shape[0] > 2:
            raise DimensionMismatchError("One-element form needs N=1 and at most one interferer")
        V = np.conj(u) @ ctx.H
        if ctx.H.shape[0] == 1:
            return cls.from_first_form(ctx.powers[0], V[0, 0], V[0, 1], 0.0, 0.0, 0.0, ctx.noise_floor)
        return cls.from_first_form(ctx.powers[0], V[0, 0], V[0, 1], ctx.powers[1], V[1, 0], V[1, 1],
                                   ctx.noise_floor)


class StationaryValues(NamedTuple):
    high: float
    low: float
    analytic: bool


def one_element_sinr(params: OneElementParams, x):
    return (params.Lp + params.Mp * np.cos(params.s + x)) / (params.Np + params.Pp * np.cos(params.t + x))


def first_form_sinr(P0: float, a: complex, h: complex, P1: float, b: complex, g: complex, c: float, x):
    theta = np.exp(1j * np.asarray(x))
    return P0 * np.abs(a * theta + h) ** 2 / (P1 * np.abs(b * theta + g) ** 2 + c)


def grid_extrema(params: OneElementParams, points: int = GRID_POINTS) -> Tuple[float, float, float, float]:
    """(max, min, argmax, argmin) of the one-element SINR over a uniform grid of x"""
    x = np.linspace(-math.pi, math.pi, points, endpoint=False)
    values = one_element_sinr(params, x)
    hi, lo = int(np.argmax(values)), int(np.argmin(values))
    return float(values[hi]), float(values[lo]), float(x[hi]), float(x[lo])


def stationary_values(params: OneElementParams) -> StationaryValues:
    """
    Both stationary SINR values of the one-element RIS in closed form

    Args:
        params (OneElementParams): Coefficients of the one-element SINR

    Returns:
        StationaryValues: Larger and smaller value; ``analytic`` is False when
        the closed form broke down and the grid supplied the values
    """
    L, M, N, P = params.Lp, params.Mp, params.Np, params.Pp
    if M == 0.0 and P == 0.0:
        constant = L / N
        return StationaryValues(constant, constant, True)

    cos_d = math.cos(params.s - params.t)
    sin_d = math.sin(params.s - params.t)
    C = (L * P) ** 2 + (M * N) ** 2 - 2.0 * L * M * N * P * cos_d
    radicand = C - (M * P * sin_d) ** 2
    scale = max(C, (M * P) ** 2, 1e-300)

    if radicand < -1e-12 * scale:
        logger.warning(f"Closed-form radicand {radicand:.3e} is negative; using grid search")
        hi, lo, _, _ = grid_extrema(params)
        return StationaryValues(hi, lo, False)

    root = N * math.sqrt(max(radicand, 0.0))
    base = P * (L * P - M * N * cos_d)
    candidates = []
    for denominator in (base + root, base - root):
        if abs(denominator) <= 1e-14 * max(abs(base), root, 1e-300):
            continue
        candidates.append(L / N - C / (N * denominator))

    if not candidates:
        logger.warning("Closed-form denominators vanish; using grid search")
        hi, lo, _, _ = grid_extrema(params)
        return StationaryValues(hi, lo, False)
    return StationaryValues(max(candidates), min(candidates), True)


def locate_stationary_points(params: OneElementParams, points: int = 4096) -> Tuple[float, float]:
    """x locations of the SINR maximum and minimum: coarse grid, then bounded refinement"""
    _, _, x_hi, x_lo = grid_extrema(params, points)
    half_width = 2.0 * math.pi / points
    best = minimize_scalar(lambda x: -one_element_sinr(params, x),
                           bounds=(x_hi - half_width, x_hi + half_width), method='bounded',
                           options={'xatol': 1e-12})
    worst = minimize_scalar(lambda x: one_element_sinr(params, x),
                            bounds=(x_lo - half_width, x_lo + half_width), method='bounded',
                            options={'xatol': 1e-12})
    return float(best.x), float(worst.x)


def sa_sinr(k: float, delta: float, c: float) -> float:
    """SA value of the unit-magnitude one-element SINR with interferer direct gain k"""
    return 4.0 / (k ** 2 + 2.0 * k * math.cos(delta) + 1.0 + c)


def sa_gap(k: float, delta: float, c: float) -> Tuple[float, float]:
    """
    Distance of the SA value to the two stationary values (unit-magnitude setting)

    Returns:
        Tuple[float, float]: (g1, g2) with g1 = gamma_max - gamma_SA and g2 = gamma_SA - gamma_min
    """
    if c <= 0.0:
        raise InvalidInputError(f"Noise term must be positive, got {c}")
    g1 = 16.0 * k ** 2 * math.sin(delta) ** 2 / (
        (k ** 2 + 2.0 * k * math.cos(delta) + 1.0 + c) * ((k + 1.0) ** 2 + c) * ((k - 1.0) ** 2 + c)
    )
    return g1, sa_sinr(k, delta, c)


def unit_magnitude_params(k: float, delta: float, c: float) -> OneElementParams:
    """|a|=|b|=|h|=P0=P1=1, |g|=k and s - t = delta"""
    return OneElementParams(Lp=2.0, Mp=2.0, Np=1.0 + k ** 2 + c, Pp=2.0 * k, s=delta, t=0.0, c=c)
