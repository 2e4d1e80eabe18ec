"""Reference designs: P-Min (SCA and SDP), SRM, zero-forcing OMA, feasibility gate."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import conic
from .conic import ConicProgram, vstack
from .core import as_beams, validate_solution
from .relax import add_min_rate, add_quad_bound, add_sic_chain, quad_scale, unstack
from .sca import Solution, converged
from .scenario import ChannelSet, SystemConfig

log = logging.getLogger(__name__)

RANK_ONE_RATIO = 1e-4
PMIN_TOL = 1e-5  # percent, see sca.converged


def _backend(backend):
    return backend if hasattr(backend, "solve") else conic.get_backend(backend)


def aligned_direction(h: np.ndarray, backend=None) -> tuple[np.ndarray, float]:
    """Unit vector v maximizing min_k Re(h_k^H v)."""
    K, N = h.shape
    prog = ConicProgram("aligned_direction")
    v = prog.add_variable("v", 2 * N)
    t = prog.add_variable("t")
    prog.maximize(t)
    for k in range(K):
        prog.add_ge(np.concatenate([h[k].real, h[k].imag]) @ v, t)
    prog.add_soc(1.0, v)
    res = _backend(backend).solve(prog)
    if not res.optimal:
        return np.zeros(N, complex), 0.0
    return unstack(res["v"]), res.scalar(t)


def common_direction_beams(h: np.ndarray, targets, noise_var: float, backend=None):
    """Beams c_i v sharing one direction that meet the SINR targets.

    Powers grow with the user index, so the SIC ordering holds; returns None
    when no direction has a positive real projection on every channel.
    """
    K, N = h.shape
    targets = np.asarray(targets, dtype=float)
    v, t = aligned_direction(h, backend)
    if t <= 1e-9:
        return None
    proj = h.conj() @ v
    re2, g = proj.real ** 2, np.abs(proj) ** 2
    c2 = np.zeros(K)
    for i in range(K):
        need = max((targets[i] * (g[k] * c2[:i].sum() + noise_var) / re2[k] for k in range(i + 1)),
                   default=0.0)
        c2[i] = max(need, c2[i - 1] if i else 0.0)
    return np.sqrt(c2)[:, None] * v[None, :]


def solve_pmin(channels: ChannelSet, sinr_targets, config: SystemConfig, backend=None,
               max_iterations: int = 100, tol: float = PMIN_TOL) -> Solution:
    """Minimize transmit power subject to SINR targets and the SIC ordering.

    The budget is not imposed; compare ``report.p_tr`` against it.
    """
    h = channels.h
    K, N = h.shape
    targets = np.broadcast_to(np.asarray(sinr_targets, dtype=float), (K,))
    if np.any(targets < 0):
        raise ValueError("SINR targets must be nonnegative")
    cfg = config.replace(min_sinr=tuple(targets))
    backend = _backend(backend)
    w0 = common_direction_beams(h, targets, config.noise_var, backend)
    if w0 is None:
        return Solution(np.zeros((K, N), complex), None, "infeasible", algorithm="pmin")
    powers = [float(np.sum(np.abs(w0) ** 2))]
    status = "iteration_limit"
    for n in range(1, max_iterations + 1):
        prog = ConicProgram("pmin")
        w = [prog.add_variable(f"w_{i}", 2 * N) for i in range(K)]
        p = prog.add_variable("p")
        prog.minimize(p)
        add_quad_bound(prog, p, vstack(w), "power", quad_scale(powers[-1]))
        add_min_rate(prog, w, h, targets, config.noise_var, w0)
        add_sic_chain(prog, w, h, w0)
        res = backend.solve(prog)
        if not res.optimal:
            log.warning("P-Min subproblem %d ended with status %s", n, res.status)
            status = "infeasible" if res.status == "infeasible" else "numerical_failure"
            break
        w0 = np.array([unstack(res[f"w_{i}"]) for i in range(K)])
        powers.append(float(np.sum(np.abs(w0) ** 2)))
        if powers[-1] <= 1e-15 or converged(powers[-2], powers[-1], tol):
            status = "converged"
            break
    report = validate_solution(channels, w0, cfg)
    return Solution(w0, report, status, powers, len(powers) - 1, algorithm="pmin")


@dataclass
class FeasibilityVerdict:
    feasible: bool
    p_star: float
    fallback: Solution | None = None
    pmin: Solution | None = None


def feasibility_gate(channels: ChannelSet, config: SystemConfig, backend=None) -> FeasibilityVerdict:
    """Compare the minimum power for the SINR floors with the budget.

    An infeasible instance gets an SRM solution as fallback.
    """
    pmin = solve_pmin(channels, config.min_sinr, config, backend=backend)
    p_star = pmin.report.p_tr if pmin.status == "converged" else float("inf")
    feasible = p_star <= config.p_ava
    fallback = None if feasible else solve_srm(channels, config, backend=backend)
    return FeasibilityVerdict(feasible, p_star, fallback, pmin)


# --- SDP relaxation -----------------------------------------------------------

@dataclass
class SdpSolution:
    status: str
    matrices: list[np.ndarray]
    powers: np.ndarray
    rank_ratios: np.ndarray
    beams: np.ndarray

    @property
    def p_star(self) -> float:
        return float(self.powers.sum())

    @property
    def rank_one(self) -> bool:
        return bool(np.all(self.rank_ratios < RANK_ONE_RATIO))


def _hermitian_basis(N: int) -> list[np.ndarray]:
    """Real-coefficient basis of N x N Hermitian matrices."""
    basis = []
    for j in range(N):
        for i in range(j + 1):
            E = np.zeros((N, N), complex)
            E[i, j] = E[j, i] = 1.0
            basis.append(E)
    for j in range(N):
        for i in range(j):
            E = np.zeros((N, N), complex)
            E[i, j], E[j, i] = 1j, -1j
            basis.append(E)
    return basis


def extract_beam(W: np.ndarray) -> tuple[np.ndarray, float]:
    """sqrt(lambda_1) times the principal eigenvector, and lambda_2 / lambda_1."""
    vals, vecs = np.linalg.eigh(W)
    lam1 = max(vals[-1], 0.0)
    ratio = max(vals[-2], 0.0) / lam1 if len(vals) > 1 and lam1 > 0 else 0.0
    return np.sqrt(lam1) * vecs[:, -1], float(ratio)


def solve_pmin_sdp(channels, sinr_targets, noise_var: float, backend=None) -> SdpSolution:
    """Semidefinite relaxation of P-Min with W_i = w_i w_i^H lifted."""
    h = channels.h if isinstance(channels, ChannelSet) else np.atleast_2d(channels)
    K, N = h.shape
    targets = np.broadcast_to(np.asarray(sinr_targets, dtype=float), (K,))
    backend = _backend(backend)
    if "psd" not in backend.capabilities:
        raise conic.CapabilityError(f"{backend.name} backend has no PSD cone")
    basis = _hermitian_basis(N)
    trace_row = np.array([np.trace(E).real for E in basis])
    gain_rows = np.array([[np.real(h[k].conj() @ E @ h[k]) for E in basis] for k in range(K)])

    prog = ConicProgram("pmin_sdp")
    params = [prog.add_variable(f"W_{i}", N * N) for i in range(K)]
    prog.minimize(sum((trace_row @ x for x in params[1:]), trace_row @ params[0]))
    for i, x in enumerate(params):
        # [[Re W, -Im W], [Im W, Re W]] >= 0
        re = [[None] * N for _ in range(N)]
        im = [[None] * N for _ in range(N)]
        for r in range(N):
            for c in range(N):
                re[r][c] = np.array([E[r, c].real for E in basis]) @ x
                im[r][c] = np.array([E[r, c].imag for E in basis]) @ x
        block = [[re[r][c] for c in range(N)] + [-im[r][c] for c in range(N)] for r in range(N)]
        block += [[im[r][c] for c in range(N)] + [re[r][c] for c in range(N)] for r in range(N)]
        prog.add_psd(block, f"psd_{i}")
    for i in range(K):
        for k in range(i + 1):
            lhs = gain_rows[k] @ params[i]
            for j in range(i):
                lhs = lhs - targets[i] * (gain_rows[k] @ params[j])
            prog.add_ge(lhs, targets[i] * noise_var, f"sinr_{k}_{i}")
    for r in range(K):
        for j in range(K - 1):
            prog.add_ge(gain_rows[r] @ params[j + 1], gain_rows[r] @ params[j], f"sic_{r}_{j}")
    res = backend.solve(prog)
    if not res.optimal:
        empty = np.zeros((K, N), complex)
        return SdpSolution(res.status, [], np.full(K, np.nan), np.full(K, np.nan), empty)
    mats, beams, ratios = [], [], []
    for i in range(K):
        W = sum(c * E for c, E in zip(res[f"W_{i}"], basis))
        W = 0.5 * (W + W.conj().T)
        mats.append(W)
        b, ratio = extract_beam(W)
        beams.append(b)
        ratios.append(ratio)
    powers = np.array([np.trace(W).real for W in mats])
    return SdpSolution("optimal", mats, powers, np.array(ratios), np.array(beams))


# --- zero-forcing OMA -----------------------------------------------------------

def water_filling(gains, total_power: float) -> np.ndarray:
    """Powers maximizing sum log2(1 + g p) subject to sum p = total_power."""
    gains = np.asarray(gains, dtype=float)
    p = np.zeros_like(gains)
    active = np.argsort(-gains)
    active = active[gains[active] > 0]
    while len(active):
        level = (total_power + np.sum(1.0 / gains[active])) / len(active)
        alloc = level - 1.0 / gains[active]
        if alloc.min() >= 0:
            p[active] = alloc
            break
        active = active[:-1]
    return p


def zf_directions(h: np.ndarray) -> np.ndarray:
    """Unit beams with h_k^H u_j = 0 for j != k (rows are users)."""
    K, N = h.shape
    if K > N:
        raise ValueError("zero-forcing needs at least as many antennas as users")
    F = np.linalg.pinv(h.conj())  # N x K, h^* F = I
    U = F.T
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def solve_zf_oma(channels: ChannelSet, config: SystemConfig, equal_power: bool = False) -> Solution:
    h = channels.h
    U = zf_directions(h)
    gains = np.abs(np.sum(h.conj() * U, axis=1)) ** 2 / config.noise_var
    if equal_power:
        p = np.full(len(gains), config.p_ava / len(gains))
    else:
        p = water_filling(gains, config.p_ava)
    beams = np.sqrt(p)[:, None] * U
    report = validate_solution(channels, beams, config, multiple_access="oma")
    return Solution(beams, report, "converged", [report.sum_rate], 0, algorithm="zf")


# --- sum-rate maximization ------------------------------------------------------

def srm_initial_beams(h: np.ndarray, config: SystemConfig, backend=None) -> np.ndarray:
    """Common-direction beams rescaled to spend the whole budget."""
    K, N = h.shape
    targets = np.maximum(np.asarray(config.min_sinr), 1e-2)
    w = common_direction_beams(h, targets, config.noise_var, backend)
    if w is None or not np.any(w):
        w = np.zeros((K, N), complex)
        w[-1] = h[-1] / np.linalg.norm(h[-1])
    return w * np.sqrt(config.p_ava / np.sum(np.abs(w) ** 2))


def solve_srm(channels: ChannelSet, config: SystemConfig, backend=None,
              initial_beams=None) -> Solution:
    """Sum-rate maximization under the budget and SIC ordering (no rate floors)."""
    from .dinkelbach import run_parametric_sca

    h = channels.h
    w0 = srm_initial_beams(h, config, backend) if initial_beams is None else as_beams(initial_beams)
    sol = run_parametric_sca(channels, config, w0, chi=0.0, min_rate=False, backend=backend)
    sol.algorithm = "srm"
    return sol
