"""GEE maximization by sequential convex approximation.

The fractional objective is handled in epigraph form: maximize alpha with
sum(delta) >= sqrt(alpha beta), sqrt(beta) >= beta_b >= P_total and
zeta_i >= 2**delta_i, so that sqrt(alpha) is the energy efficiency. Every
non-convex piece is replaced by a tangent taken at the previous iterate.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import conic
from .conic import ConicProgram, vstack
from .core import PerformanceReport, PowerModel, as_beams, total_power, validate_solution
from .relax import (AbsSqTangent, SqrtTangent, add_min_rate, add_quad_bound, add_sic_chain,
                    add_sinr_slacks, linearize_abs_sq, linearize_sqrt_product, quad_scale,
                    sinr_profile, unstack, user_pairs)
from .scenario import ChannelSet, SystemConfig

log = logging.getLogger(__name__)

__all__ = [
    "AbsSqTangent", "InfeasibleError", "ScaState", "Solution", "SqrtTangent",
    "build_subproblem", "converged", "initialize_state", "linearize_abs_sq",
    "linearize_sqrt_product", "run_sca", "state_from_beams",
]

class InfeasibleError(RuntimeError):
    """Minimum-rate and SIC constraints cannot be met within the budget."""


@dataclass
class ScaState:
    beams: np.ndarray
    alpha: float
    beta: float
    beta_b: float
    theta: np.ndarray  # per (k, i) pair, see relax.user_pairs
    zeta: np.ndarray
    delta: np.ndarray
    iteration: int = 0

    @property
    def num_scalars(self) -> int:
        K, N = self.beams.shape
        return 2 * K * N + 3 + len(self.theta) + 2 * K


@dataclass
class Solution:
    beams: np.ndarray
    report: PerformanceReport | None
    status: str  # converged | iteration_limit | infeasible | numerical_failure
    objective_trace: list[float] = field(default_factory=list)
    iterations_used: int = 0
    trace: list[dict] = field(default_factory=list)
    algorithm: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "converged"


def converged(previous: float, current: float, tol: float) -> bool:
    """Stopping rule shared by all iterative solvers.

    ``tol`` is a percentage of the tracked objective's magnitude, so the rule
    does not depend on the bandwidth or power units.
    """
    scale = max(abs(current), abs(previous), 1e-300)
    return abs(current - previous) < tol / 100.0 * scale


def state_from_beams(channels, beams, config: SystemConfig, iteration: int = 0) -> ScaState:
    """Slack values that make every constraint of the subproblem tight at ``beams``."""
    h = channels.h if isinstance(channels, ChannelSet) else np.asarray(channels)
    w = as_beams(beams, h.shape[1])
    prof = sinr_profile(h, w, config.noise_var)
    delta = np.log2(prof.zeta)
    _, p_total = total_power(w, PowerModel.from_config(config))
    alpha = (delta.sum() / p_total) ** 2
    return ScaState(w, alpha, p_total ** 2, p_total, prof.theta, prof.zeta, delta, iteration)


def initialize_state(channels: ChannelSet, config: SystemConfig, backend=None,
                     pmin: Solution | None = None) -> ScaState:
    """Start from the P-Min beams for the configured SINR floors."""
    from .baselines import solve_pmin

    if pmin is None:
        pmin = solve_pmin(channels, config.min_sinr, config, backend=backend)
    if pmin.status != "converged" or pmin.report.p_tr > config.p_ava * (1 + 1e-9):
        raise InfeasibleError("minimum-rate targets are not reachable within the power budget")
    return state_from_beams(channels, pmin.beams, config)


def build_subproblem(state: ScaState, channels: ChannelSet, config: SystemConfig) -> ConicProgram:
    h = channels.h
    K, N = h.shape
    prog = ConicProgram("gee_sca")
    w = [prog.add_variable(f"w_{i}", 2 * N) for i in range(K)]
    alpha = prog.add_variable("alpha")
    beta = prog.add_variable("beta")
    beta_b = prog.add_variable("beta_b")
    theta = prog.add_variable("theta", len(user_pairs(K)))
    zeta = prog.add_variable("zeta", K)
    delta = prog.add_variable("delta", K)
    prog.maximize(alpha)

    # sum(delta) >= sqrt(alpha beta), linearized
    tangent = linearize_sqrt_product(max(state.alpha, 1e-12), state.beta)
    prog.add_ge(delta.sum(), tangent(alpha, beta), "rate_epigraph")
    for i in range(K):
        prog.add_exp_bound(zeta[i], delta[i], f"exp_{i}")
    prog.add_ge(zeta, 1.0, "zeta_floor")
    prog.add_ge(delta, 0.0, "delta_floor")
    add_sinr_slacks(prog, w, h, zeta, theta, state.zeta, state.theta, config.noise_var,
                    state.beams)
    # beta >= beta_b^2 and beta_b >= P_tr / eps0 + P_loss
    add_quad_bound(prog, beta, beta_b, "beta", quad_scale(state.beta))
    add_quad_bound(prog, beta_b - config.p_loss, vstack(w) / np.sqrt(config.amp_efficiency),
                   "power", quad_scale(state.beta_b - config.p_loss))
    add_min_rate(prog, w, h, config.min_sinr, config.noise_var, state.beams)
    add_sic_chain(prog, w, h, state.beams)
    prog.add_soc(np.sqrt(config.p_ava), vstack(w), "budget")
    return prog


def _beams_from(result, K: int) -> np.ndarray:
    return np.array([unstack(result[f"w_{i}"]) for i in range(K)])


def _trace_row(n: int, state: ScaState, channels, config) -> dict:
    report = validate_solution(channels, state.beams, config)
    return {"n": n, "alpha": state.alpha, "sqrt_alpha": float(np.sqrt(state.alpha)),
            "p_tr": report.p_tr, "sum_rate": report.sum_rate}


def run_sca(channels: ChannelSet, config: SystemConfig, backend=None,
            pmin: Solution | None = None) -> Solution:
    """Iterate the convexified GEE-Max problem until alpha stabilizes."""
    K, N = channels.h.shape
    try:
        state = initialize_state(channels, config, backend=backend, pmin=pmin)
    except InfeasibleError:
        return Solution(np.zeros((K, N), complex), None, "infeasible", algorithm="sca")
    backend = conic.get_backend(backend) if not hasattr(backend, "solve") else backend
    alphas = [state.alpha]
    rows = [_trace_row(0, state, channels, config)]
    status = "iteration_limit"
    for n in range(1, config.max_iterations + 1):
        result = backend.solve(build_subproblem(state, channels, config))
        if not result.optimal:
            log.warning("SCA subproblem %d ended with status %s", n, result.status)
            status = "numerical_failure"
            break
        state = state_from_beams(channels, _beams_from(result, K), config, n)
        alphas.append(state.alpha)
        rows.append(_trace_row(n, state, channels, config))
        if n >= 2 and converged(alphas[-2], alphas[-1], config.sca_tolerance):
            status = "converged"
            break
    report = validate_solution(channels, state.beams, config)
    return Solution(state.beams, report, status, alphas, len(alphas) - 1, rows, "sca")
