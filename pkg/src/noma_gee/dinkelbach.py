"""GEE maximization with Dinkelbach's parametric method.

For a fixed ratio estimate chi the inner problem maximizes
``sum_rate - chi * P_total`` by SCA (same surrogates as :mod:`noma_gee.sca`);
chi is then reset to the efficiency of the new beams.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import conic
from .conic import ConicProgram, vstack
from .core import PowerModel, as_beams, gee, total_power, validate_solution
from .relax import (add_min_rate, add_quad_bound, add_sic_chain, add_sinr_slacks, quad_scale,
                    sinr_profile, unstack, user_pairs)
from .sca import InfeasibleError, Solution, converged, initialize_state
from .scenario import ChannelSet, SystemConfig

log = logging.getLogger(__name__)

OUTER_CAP = 30
INNER_CAP = 50


@dataclass
class InnerState:
    beams: np.ndarray
    nu: float
    z: np.ndarray
    q: np.ndarray
    rho: np.ndarray
    powers: np.ndarray

    def objective(self, chi: float, config: SystemConfig) -> float:
        return self.nu - chi * (self.powers.sum() / config.amp_efficiency + config.p_loss)


@dataclass
class DinkelbachState:
    outer: int
    chi: float
    inner: InnerState


def inner_state_from_beams(channels, beams, config: SystemConfig) -> InnerState:
    h = channels.h if isinstance(channels, ChannelSet) else np.asarray(channels)
    w = as_beams(beams, h.shape[1])
    prof = sinr_profile(h, w, config.noise_var)
    q = np.log2(prof.zeta)
    return InnerState(w, float(q.sum()), prof.zeta, q, prof.theta, np.sum(np.abs(w) ** 2, axis=1))


def chi_update(beams, channels, power_model: PowerModel, noise_var: float,
               bandwidth: float = 1.0) -> float:
    """Ratio f1 / f2 evaluated at the given beams."""
    return gee(channels, beams, power_model, noise_var, bandwidth)


def build_inner_subproblem(state: InnerState, chi: float, channels: ChannelSet,
                           config: SystemConfig, min_rate: bool = True) -> ConicProgram:
    h = channels.h
    K, N = h.shape
    prog = ConicProgram("gee_dinkelbach_inner")
    w = [prog.add_variable(f"w_{i}", 2 * N) for i in range(K)]
    nu = prog.add_variable("nu")
    z = prog.add_variable("z", K)
    q = prog.add_variable("q", K)
    rho = prog.add_variable("rho", len(user_pairs(K)))
    t = prog.add_variable("t", K)
    prog.maximize(nu - chi * (t.sum() / config.amp_efficiency + config.p_loss))

    add_sinr_slacks(prog, w, h, z, rho, state.z, state.rho, config.noise_var, state.beams)
    for i in range(K):
        prog.add_exp_bound(z[i], q[i], f"exp_{i}")
        add_quad_bound(prog, t[i], w[i], f"power_{i}", quad_scale(state.powers[i]))
    prog.add_ge(z, 1.0, "z_floor")
    prog.add_ge(q, 0.0, "q_floor")
    prog.add_ge(q.sum(), nu, "rate_sum")
    if min_rate:
        add_min_rate(prog, w, h, config.min_sinr, config.noise_var, state.beams)
    add_sic_chain(prog, w, h, state.beams)
    prog.add_le(t.sum(), config.p_ava, "budget")
    return prog


def run_parametric_sca(channels: ChannelSet, config: SystemConfig, beams, chi: float,
                       min_rate: bool = True, backend=None,
                       max_iterations: int = INNER_CAP) -> Solution:
    """SCA on ``sum_rate - chi * P_total`` starting from ``beams``."""
    K = channels.num_users
    backend = backend if hasattr(backend, "solve") else conic.get_backend(backend)
    state = inner_state_from_beams(channels, beams, config)
    values = [state.objective(chi, config)]
    rows = []
    status = "iteration_limit"
    for n in range(1, max_iterations + 1):
        res = backend.solve(build_inner_subproblem(state, chi, channels, config, min_rate))
        if not res.optimal:
            log.warning("inner subproblem %d (chi=%g) ended with status %s", n, chi, res.status)
            status = "numerical_failure"
            break
        w = np.array([unstack(res[f"w_{i}"]) for i in range(K)])
        state = inner_state_from_beams(channels, w, config)
        values.append(state.objective(chi, config))
        p_tr = float(state.powers.sum())
        rows.append({"n": n, "chi": chi, "nu": state.nu, "p_tr": p_tr, "F": values[-1]})
        # F itself tends to 0, so its change is measured against the rate scale
        if n >= 2 and abs(values[-1] - values[-2]) < config.sca_tolerance / 100.0 * max(state.nu, 1e-12):
            status = "converged"
            break
    cfg = config if min_rate else config.replace(min_sinr=(0.0,) * K)
    report = validate_solution(channels, state.beams, cfg)
    return Solution(state.beams, report, status, values, len(values) - 1, rows, "parametric")


def run_dinkelbach(channels: ChannelSet, config: SystemConfig, backend=None,
                   pmin: Solution | None = None, max_outer: int = OUTER_CAP) -> Solution:
    K, N = channels.h.shape
    try:
        init = initialize_state(channels, config, backend=backend, pmin=pmin)
    except InfeasibleError:
        return Solution(np.zeros((K, N), complex), None, "infeasible", algorithm="dinkelbach")
    backend = backend if hasattr(backend, "solve") else conic.get_backend(backend)
    model = PowerModel.from_config(config)
    beams = init.beams
    chi = 0.0
    chis = [chi]
    rows = []
    status = "iteration_limit"
    for m in range(1, max_outer + 1):
        inner = run_parametric_sca(channels, config, beams, chi, backend=backend,
                                   max_iterations=INNER_CAP)
        if inner.status == "numerical_failure" and inner.iterations_used == 0:
            status = "numerical_failure"
            break
        beams = inner.beams
        rows += [{"m": m, **r} for r in inner.trace]
        new_chi = chi_update(beams, channels, model, config.noise_var)
        chis.append(new_chi)
        if inner.status == "numerical_failure":
            status = "numerical_failure"
            break
        if converged(chi, new_chi, config.dinkelbach_tolerance):
            status = "converged"
            break
        chi = new_chi
    report = validate_solution(channels, beams, config)
    return Solution(beams, report, status, chis, len(chis) - 1, rows, "dinkelbach")


def f_gap(beams, chi: float, channels, config: SystemConfig) -> float:
    """F(w, chi) = f1(w) - chi f2(w)."""
    report = validate_solution(channels, beams, config)
    _, p_total = total_power(beams, PowerModel.from_config(config))
    return report.sum_rate / config.bandwidth - chi * p_total
