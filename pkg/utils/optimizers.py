import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy import linalg

from utils.channel import ChannelSet, CsiErrorParams
from utils.errors import DegenerateInputError, InvalidInputError, SingularMatrixError
from utils.link_metrics import (NoiseBudget, RisPhases, SinrContext, build_context, error_covariance_scale,
                                fractional_terms, sinr)
from utils.sdr import SdrParams, sdr_phases

logger = logging.getLogger(__name__)

SUB_SOLVERS = ('sdr', 'sa', 'gd', 'rand')


@dataclass(frozen=True)
class GdParams:
    epsilon_armijo: float = 5e-5
    shrink: float = 0.5
    beta0: float = 1.0
    tol: float = 1e-6
    max_iters: int = 1000
    max_shrinks: int = 60

    def __post_init__(self):
        if not 0.0 < self.epsilon_armijo < 1.0:
            raise InvalidInputError(f"Armijo constant must lie in (0, 1), got {self.epsilon_armijo}")
        if not 0.0 < self.shrink < 1.0:
            raise InvalidInputError(f"Shrink factor must lie in (0, 1), got {self.shrink}")
        if self.beta0 <= 0.0 or self.tol <= 0.0:
            raise InvalidInputError("Initial step and stopping threshold must be positive")
        if self.max_iters < 1 or self.max_shrinks < 1:
            raise InvalidInputError("Iteration limits must be positive")


@dataclass(frozen=True)
class BcdParams:
    rel_tol: float = 1e-6
    max_outer_iters: int = 200
    sub_solver: str = 'gd'
    gd: GdParams = field(default_factory=GdParams)
    sdr: SdrParams = field(default_factory=SdrParams)

    def __post_init__(self):
        if self.rel_tol <= 0.0:
            raise InvalidInputError(f"Relative tolerance must be positive, got {self.rel_tol}")
        if self.max_outer_iters < 1:
            raise InvalidInputError("max_outer_iters must be positive")
        if self.sub_solver not in SUB_SOLVERS:
            raise InvalidInputError(f"Unknown sub-solver {self.sub_solver!r}; expected one of {SUB_SOLVERS}")


@dataclass
class GdResult:
    phases: RisPhases
    iterations: int
    converged: bool
    shrink_cap_hits: int
    objective_trace: List[float] = field(default_factory=list)


@dataclass
class OptimizationResult:
    u_star: np.ndarray
    phases_star: RisPhases
    gamma_trace: List[float]
    outer_iters: int
    wall_time: float
    iteration_times: List[float]
    converged: bool

    @property
    def gamma(self) -> float:
        return self.gamma_trace[-1]


def _with_beamformer(u: np.ndarray, ctx: SinrContext) -> SinrContext:
    if ctx.u is not None and np.array_equal(ctx.u, u):
        return ctx
    return ctx.with_beamformer(u)


def optimal_beamformer(ctx: SinrContext, phases: RisPhases) -> np.ndarray:
    """
    Receive beamformer maximizing the SINR for fixed RIS phases

    Args:
        ctx (SinrContext): SINR context (its B forms are rebuilt for ``phases`` if needed)
        phases (RisPhases): Current RIS phases

    Returns:
        np.ndarray: Unit-norm u = A^-1 e_0 / ||A^-1 e_0||
    """
    if ctx.phases is not phases:
        ctx = ctx.with_phases(phases)
    e0 = ctx.H[0] @ phases.theta0
    A = np.tensordot(ctx.powers[1:], ctx.B[1:], axes=1) + ctx.noise_floor * np.eye(ctx.N_R)
    try:
        direction = linalg.solve(A, e0, assume_a='pos')
    except linalg.LinAlgError as e:
        raise SingularMatrixError(f"Interference-plus-noise matrix is not positive definite: {e}") from e

    norm = linalg.norm(direction)
    if norm == 0.0 or not np.isfinite(norm):
        raise DegenerateInputError("Signal channel vanishes; no beamformer direction exists")
    return direction / norm


def sa_phases(u: np.ndarray, ctx: SinrContext) -> RisPhases:
    """Co-phase every reflected contribution with the direct path (reference 0 when it is blocked)"""
    V0 = np.conj(u) @ ctx.H[0]
    reflected, direct = V0[:-1], V0[-1]
    reference = np.angle(direct) if abs(direct) > 0.0 else 0.0
    zero = np.abs(reflected) == 0.0
    if np.any(zero):
        logger.debug(f"{int(zero.sum())} reflected entries vanish; their phase is set to 0")
    phi = np.where(zero, 0.0, reference - np.angle(reflected))
    return RisPhases(phi)


def gd_gradient(phi: np.ndarray, u: np.ndarray, ctx: SinrContext) -> np.ndarray:
    """Gradient of -gamma with respect to the RIS phases phi"""
    return _gradient(phi, _with_beamformer(u, ctx))


def _gradient(phi: np.ndarray, ctx: SinrContext) -> np.ndarray:
    theta = np.exp(1j * np.asarray(phi, dtype=float))
    numerator, denominator = fractional_terms(theta, ctx)
    rotation = 1j * theta
    d_num = 2.0 * np.real((np.conj(ctx.R[0]) @ np.conj(theta) + ctx.c[0]) * rotation)
    d_den = 2.0 * np.real((np.conj(ctx.K) @ np.conj(theta) + ctx.z) * rotation)
    return -d_num / denominator + numerator * d_den / denominator ** 2


def _negative_sinr(phi: np.ndarray, ctx: SinrContext) -> float:
    numerator, denominator = fractional_terms(np.exp(1j * phi), ctx)
    return -numerator / denominator


def gradient_descent(u: np.ndarray, ctx: SinrContext, params: GdParams = GdParams(),
                     initial: Optional[RisPhases] = None) -> GdResult:
    """
    Armijo-Goldstein backtracking descent on -gamma over the RIS phases

    Args:
        u (np.ndarray): Fixed beamformer
        ctx (SinrContext): SINR context
        params (GdParams): Line-search and stopping parameters
        initial (RisPhases): Starting point; the SA phases when omitted

    Returns:
        GdResult: Final phases and iteration metadata
    """
    ctx = _with_beamformer(u, ctx)
    phi = np.array((initial or sa_phases(u, ctx)).phi)
    objective = _negative_sinr(phi, ctx)
    trace = [objective]
    cap_hits = 0
    converged = False
    iteration = 0

    for iteration in range(1, params.max_iters + 1):
        grad = _gradient(phi, ctx)
        grad_sq = float(grad @ grad)
        if params.beta0 * grad_sq <= params.tol:
            converged = True
            break

        beta = params.beta0
        for _ in range(params.max_shrinks):
            candidate = _negative_sinr(phi - beta * grad, ctx)
            if candidate <= objective - params.epsilon_armijo * beta * grad_sq:
                break
            beta *= params.shrink
        else:
            cap_hits += 1
            candidate = _negative_sinr(phi - beta * grad, ctx)
            logger.debug(f"Armijo shrink cap hit at iteration {iteration}; accepting beta={beta:.3e}")
            if candidate > objective:
                converged = True
                break

        phi = phi - beta * grad
        objective = candidate
        trace.append(objective)
        if beta * grad_sq <= params.tol:
            converged = True
            break
    else:
        logger.warning(f"Gradient descent reached max_iters={params.max_iters} without meeting the stopping rule")

    if cap_hits:
        logger.warning(f"Armijo shrink cap hit {cap_hits} time(s)")
    phi = (phi + np.pi) % (2.0 * np.pi) - np.pi
    return GdResult(RisPhases(phi), iteration, converged, cap_hits, trace)


def gd_phases(u: np.ndarray, ctx: SinrContext, params: GdParams = GdParams()) -> RisPhases:
    return gradient_descent(u, ctx, params).phases


def _ris_step(solver: str, u: np.ndarray, ctx: SinrContext, phases: RisPhases, params: BcdParams,
              rng: np.random.Generator) -> RisPhases:
    if solver == 'sa':
        return sa_phases(u, ctx)
    if solver == 'gd':
        return gd_phases(u, ctx, params.gd)
    if solver == 'sdr':
        return sdr_phases(u, ctx, params.sdr, rng)
    return phases


def bcd(channels: ChannelSet, powers: np.ndarray, noise: NoiseBudget, err: CsiErrorParams,
        params: BcdParams, rng: np.random.Generator) -> OptimizationResult:
    """
    Alternate the optimal beamformer and the selected RIS sub-solver

    Args:
        channels (ChannelSet): Estimated channels
        powers (np.ndarray): Transmit powers in W
        noise (NoiseBudget): Noise variances with the assumed zeta
        err (CsiErrorParams): Error levels folded into the objective (perfect for non-robust)
        params (BcdParams): Outer-loop settings and sub-solver choice
        rng (np.random.Generator): Stream for the random start and SDR randomization

    Returns:
        OptimizationResult: Best (u, theta) and the non-decreasing SINR trace
    """
    start = time.perf_counter()
    base = build_context(channels, powers, noise, error_covariance_scale(err, channels.N, channels.visibility))
    phases = RisPhases.random(channels.N, rng)
    u = None
    gamma_prev = 0.0
    trace: List[float] = []
    iteration_times: List[float] = []
    converged = False

    for iteration in range(1, params.max_outer_iters + 1):
        tick = time.perf_counter()
        u_new = optimal_beamformer(base, phases)
        ctx = base.with_beamformer(u_new)
        candidate = _ris_step(params.sub_solver, u_new, ctx, phases, params, rng)
        gamma_candidate = sinr(u_new, candidate, ctx)

        if gamma_candidate <= gamma_prev:
            # rejected: keep the previous phases
            gamma = sinr(u_new, phases, ctx)
            if u is not None and gamma < gamma_prev:
                gamma = gamma_prev
            else:
                u = u_new
        else:
            u, phases, gamma = u_new, candidate, gamma_candidate

        trace.append(gamma)
        iteration_times.append(time.perf_counter() - tick)
        logger.debug(f"BCD-{params.sub_solver} iteration {iteration}: SINR {gamma:.6g}")

        improvement = abs(gamma - gamma_prev)
        if iteration > 1 and gamma_prev > 0.0:
            improvement /= gamma_prev
        gamma_prev = gamma
        if params.sub_solver == 'rand' or improvement <= params.rel_tol:
            converged = True
            break
    else:
        logger.warning(f"BCD-{params.sub_solver} hit max_outer_iters={params.max_outer_iters}")

    return OptimizationResult(
        u_star=u,
        phases_star=phases,
        gamma_trace=trace,
        outer_iters=len(trace),
        wall_time=time.perf_counter() - start,
        iteration_times=iteration_times,
        converged=converged,
    )
