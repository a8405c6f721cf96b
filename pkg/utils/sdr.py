import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg

from utils.channel import complex_normal
from utils.errors import ConvergenceError, InvalidInputError, UpperBoundTooLowError
from utils.link_metrics import RisPhases, SinrContext, sinr_batch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SdrParams:
    bisection_hi: float = 20.0
    bisection_tol: float = 1e-6
    randomization_count: int = 1000
    sdp_tol: float = 1e-7
    sdp_max_iters: int = 5000
    check_every: int = 10

    def __post_init__(self):
        if not self.bisection_hi > self.bisection_tol > 0.0:
            raise InvalidInputError("SDR bisection needs bisection_hi > bisection_tol > 0")
        if self.randomization_count < 1:
            raise InvalidInputError("Gaussian randomization needs at least one candidate")
        if self.sdp_tol <= 0.0 or self.sdp_max_iters < 1 or self.check_every < 1:
            raise InvalidInputError("SDP tolerance and iteration limits must be positive")

    @property
    def bisection_iterations(self) -> int:
        return math.ceil(math.log2(self.bisection_hi / self.bisection_tol))


@dataclass(frozen=True, eq=False)
class SdpSolution:
    """
    Result of max Tr(C Psi) s.t. diag(Psi) = 1, Psi PSD.

    ``value`` is attained by the feasible ``psi``; ``upper_bound`` comes from a
    dual-feasible certificate, so the optimum lies in [value, upper_bound].
    """

    psi: np.ndarray
    value: float
    upper_bound: float
    iterations: int
    converged: bool
    state: Tuple[np.ndarray, np.ndarray, float]


def _project_psd(matrix: np.ndarray) -> np.ndarray:
    eigvals, eigvecs = linalg.eigh(matrix)
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * eigvals) @ np.conj(eigvecs).T


def _unit_diagonal(matrix: np.ndarray) -> np.ndarray:
    """Congruence D^-1/2 X D^-1/2; keeps PSD and makes the diagonal exactly one"""
    d = np.sqrt(np.clip(np.real(np.diag(matrix)), 1e-300, None))
    psi = matrix / np.outer(d, d)
    psi = (psi + np.conj(psi).T) / 2.0
    np.fill_diagonal(psi, 1.0)
    return psi


def _dual_bound(C: np.ndarray, y: np.ndarray) -> float:
    """Sum of a dual-feasible y: shift y until Diag(y) - C is PSD"""
    top = linalg.eigvalsh(C - np.diag(y))[-1]
    return float(np.sum(y) + C.shape[0] * max(top, 0.0))


def solve_diag_sdp(C: np.ndarray, params: SdrParams = SdrParams(),
                   warm_start: Optional[Tuple[np.ndarray, np.ndarray, float]] = None,
                   strict: bool = False) -> SdpSolution:
    """
    Maximize Tr(C Psi) over unit-diagonal PSD matrices with a two-block ADMM

    Args:
        C (np.ndarray): Hermitian cost matrix
        params (SdrParams): Tolerance and iteration cap
        warm_start: (Y, dual diagonal, rho) state of a previous solve of the same size
        strict (bool): Raise ConvergenceError instead of returning the best iterate

    Returns:
        SdpSolution: Feasible Psi, its value and a certified upper bound
    """
    C = np.asarray(C, dtype=complex)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InvalidInputError(f"Cost matrix must be square, got shape {C.shape}")
    n = C.shape[0]
    scale = float(linalg.norm(C))
    if scale == 0.0:
        identity = np.eye(n, dtype=complex)
        return SdpSolution(identity, 0.0, 0.0, 0, True, (identity, np.zeros(n), 1.0))
    if linalg.norm(C - np.conj(C).T) > 1e-10 * scale:
        raise InvalidInputError("Cost matrix must be Hermitian")

    Cs = (C + np.conj(C).T) / (2.0 * scale)
    if warm_start is not None and warm_start[0].shape == (n, n):
        Y, dual, rho = warm_start[0].copy(), warm_start[1].copy(), warm_start[2]
    else:
        Y, dual, rho = np.eye(n, dtype=complex), np.zeros(n), 1.0

    psi, value, upper = np.eye(n, dtype=complex), -math.inf, math.inf
    converged = False
    iteration = 0
    for iteration in range(1, params.sdp_max_iters + 1):
        X = _project_psd(Y - np.diag(dual) + Cs / rho)
        Y_prev = Y
        Y = X + np.diag(dual)
        np.fill_diagonal(Y, 1.0)
        # the scaled dual stays diagonal: off-diagonal entries of X + U - Y vanish
        dual = dual + np.real(np.diag(X)) - 1.0

        if iteration % params.check_every and iteration != params.sdp_max_iters:
            continue

        candidate = _unit_diagonal(X)
        candidate_value = float(np.real(np.vdot(Cs, candidate)))
        if candidate_value > value:
            psi, value = candidate, candidate_value
        upper = min(upper, _dual_bound(Cs, rho * dual))
        if upper - value <= params.sdp_tol:
            converged = True
            break

        primal = linalg.norm(X - Y)
        dual_change = rho * linalg.norm(Y - Y_prev)
        if primal > 10.0 * dual_change:
            rho, dual = 2.0 * rho, dual / 2.0
        elif dual_change > 10.0 * primal:
            rho, dual = rho / 2.0, dual * 2.0

    if not converged:
        message = (f"Diagonal SDP stopped after {iteration} iterations with gap "
                   f"{(upper - value) * scale:.3e} (n={n})")
        if strict:
            raise ConvergenceError(message)
        logger.warning(message)

    return SdpSolution(psi, value * scale, upper * scale, iteration, converged, (Y, dual, rho))


def sdr_feasibility(G0: np.ndarray, M: np.ndarray, alpha: float, b: float, params: SdrParams = SdrParams(),
                    warm_start=None) -> Tuple[bool, SdpSolution]:
    """
    Decide whether some unit-diagonal PSD Psi reaches Tr(Psi(G0 - bM)) >= b alpha.

    Feasible needs a primal witness; a gap that straddles the threshold is
    reported infeasible.
    """
    if b < 0.0:
        raise InvalidInputError(f"Bisection level must be non-negative, got {b}")
    solution = solve_diag_sdp(G0 - b * M, params, warm_start)
    threshold = b * alpha
    if solution.value >= threshold:
        return True, solution
    if solution.upper_bound >= threshold:
        logger.debug(f"Feasibility at b={b:.6g} undecided within solver tolerance; treated infeasible")
    return False, solution


@dataclass
class BisectionResult:
    psi: np.ndarray
    feasible_level: float
    upper_bound: float
    iterations: int
    trace: List[Tuple[float, bool]] = field(default_factory=list)


def bisection_sdr(G0: np.ndarray, M: np.ndarray, alpha: float, params: SdrParams = SdrParams()) -> BisectionResult:
    """
    Bisection over the SINR level of the relaxed RIS problem

    Args:
        G0 (np.ndarray): Signal form of the current beamformer
        M (np.ndarray): Interference-plus-noise form
        alpha (float): Constant part of the denominator
        params (SdrParams): Bisection bounds and SDP settings

    Returns:
        BisectionResult: Psi at the highest feasible level and the final bracket
    """
    lo, hi = 0.0, params.bisection_hi
    feasible, solution = sdr_feasibility(G0, M, alpha, hi, params)
    if feasible:
        raise UpperBoundTooLowError(
            f"SINR level {hi} is already feasible; increase bisection_hi"
        )

    state = solution.state
    best_psi = None
    trace = []
    for _ in range(params.bisection_iterations):
        mid = 0.5 * (lo + hi)
        feasible, solution = sdr_feasibility(G0, M, alpha, mid, params, warm_start=state)
        state = solution.state
        trace.append((mid, feasible))
        logger.debug(f"SDR bisection b={mid:.6g} feasible={feasible}")
        if feasible:
            lo, best_psi = mid, solution.psi
        else:
            hi = mid

    if best_psi is None:
        best_psi = solve_diag_sdp(G0, params, warm_start=state).psi

    return BisectionResult(best_psi, lo, hi, len(trace), trace)


def gaussian_randomization(psi: np.ndarray, count: int, u: np.ndarray, ctx: SinrContext,
                           rng: np.random.Generator) -> Tuple[RisPhases, float]:
    """
    Recover unit-modulus RIS phases from a relaxed solution

    Args:
        psi (np.ndarray): (N+1) x (N+1) relaxed solution
        count (int): Number of Gaussian candidates
        u (np.ndarray): Current beamformer
        ctx (SinrContext): Context used to score candidates
        rng (np.random.Generator): Random stream

    Returns:
        Tuple[RisPhases, float]: Best candidate and its SINR
    """
    eigvals, eigvecs = linalg.eigh((psi + np.conj(psi).T) / 2.0)
    factor = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
    samples = factor @ complex_normal(rng, (psi.shape[0], count))

    # Entrywise unit-circle projection, referenced to the direct-path entry
    reference = samples[-1]
    reference = np.where(np.abs(reference) > 0.0, reference / np.abs(reference), 1.0)
    relative = samples[:-1] * np.conj(reference)
    magnitude = np.abs(relative)
    thetas = np.where(magnitude > 0.0, relative / np.where(magnitude > 0.0, magnitude, 1.0), 1.0).T

    gammas = sinr_batch(u, thetas, ctx)
    best = int(np.argmax(gammas))
    return RisPhases.from_theta(thetas[best]), float(gammas[best])


def sdr_phases(u: np.ndarray, ctx: SinrContext, params: SdrParams, rng: np.random.Generator) -> RisPhases:
    """SDR sub-solver: bisection on the relaxed problem followed by Gaussian randomization"""
    if ctx.G is None:
        ctx = ctx.with_beamformer(u)
    result = bisection_sdr(ctx.G[0], ctx.M, ctx.alpha, params)
    phases, gamma = gaussian_randomization(result.psi, params.randomization_count, u, ctx, rng)
    logger.debug(f"SDR bound {result.upper_bound:.6g}, randomized SINR {gamma:.6g}")
    return phases
