"""Ground-truth evaluation of beamformer sets.

Beams are complex arrays of shape (K, N); row ``i`` is the beam of user ``i``
(0-based, strongest channel first). ``cross_gains(h, w)[k, i]`` is
``|h_k^H w_i|^2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import ChannelSet, SystemConfig

FEAS_RTOL = 1e-6


def _channel_matrix(channels) -> np.ndarray:
    if isinstance(channels, ChannelSet):
        return channels.h
    return np.atleast_2d(np.asarray(channels, dtype=complex))


def _check_dims(h: np.ndarray, w: np.ndarray) -> None:
    if h.shape != w.shape:
        raise ValueError(f"channels {h.shape} and beams {w.shape} do not match")


def as_beams(beams, num_antennas: int | None = None) -> np.ndarray:
    w = np.atleast_2d(np.asarray(beams, dtype=complex))
    if num_antennas is not None and w.shape[1] != num_antennas:
        raise ValueError("beam length must equal the number of antennas")
    if not np.all(np.isfinite(w)):
        raise ValueError("beam entries must be finite")
    return w


def cross_products(channels, beams) -> np.ndarray:
    """Matrix of h_k^H w_i indexed [k, i]."""
    h = _channel_matrix(channels)
    w = as_beams(beams)
    _check_dims(h, w)
    return h.conj() @ w.T


def cross_gains(channels, beams) -> np.ndarray:
    return np.abs(cross_products(channels, beams)) ** 2


def pair_sinr(channels, beams, i: int, k: int, noise_var: float) -> float:
    """SINR at user ``k`` when decoding the message of user ``i`` (k <= i).

    Only the stronger users' messages j < i remain as interference after SIC.
    """
    g = cross_gains(channels, beams)
    K = g.shape[0]
    if not (0 <= k <= i < K):
        raise IndexError(f"need 0 <= k <= i < {K}, got i={i}, k={k}")
    return float(g[k, i] / (g[k, :i].sum() + noise_var))


def pair_sinr_matrix(channels, beams, noise_var: float) -> np.ndarray:
    """All pair SINRs; entry [k, i] for k <= i, NaN above the diagonal."""
    g = cross_gains(channels, beams)
    K = g.shape[0]
    interference = np.concatenate([np.zeros((K, 1)), np.cumsum(g, axis=1)[:, :-1]], axis=1)
    out = g / (interference + noise_var)
    out[np.tril_indices(K, -1)] = np.nan
    return out


def effective_sinr(channels, beams, noise_var: float) -> np.ndarray:
    """gamma_i = min over k <= i of the pair SINRs."""
    return np.nanmin(pair_sinr_matrix(channels, beams, noise_var), axis=0)


def spatial_sinr(channels, beams, noise_var: float) -> np.ndarray:
    """Per-user SINR treating every other beam as interference (no SIC)."""
    g = cross_gains(channels, beams)
    own = np.diag(g)
    return own / (g.sum(axis=1) - own + noise_var)


def rates(effective_sinrs, bandwidth: float = 1.0) -> np.ndarray:
    """Achievable rates B log2(1 + gamma)."""
    gamma = np.asarray(effective_sinrs, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SINR must be nonnegative")
    return bandwidth * np.log2(1.0 + gamma)


@dataclass(frozen=True)
class PowerModel:
    amp_efficiency: float
    p_sta: float
    p_dyn: float
    num_antennas: int
    p_ava: float

    def __post_init__(self):
        if not 0 < self.amp_efficiency <= 1:
            raise ValueError("amp_efficiency must lie in (0, 1]")
        if self.p_loss < 0:
            raise ValueError("P_loss must be nonnegative")

    @property
    def p_loss(self) -> float:
        return self.p_sta + self.num_antennas * self.p_dyn

    @classmethod
    def from_config(cls, config: SystemConfig) -> "PowerModel":
        return cls(config.amp_efficiency, config.p_sta, config.p_dyn,
                   config.num_antennas, config.p_ava)


def total_power(beams, power_model: PowerModel) -> tuple[float, float]:
    """Return (P_tr, P_total) with P_total = P_tr / eps0 + P_loss."""
    w = as_beams(beams)
    p_tr = float(np.sum(np.abs(w) ** 2))
    return p_tr, p_tr / power_model.amp_efficiency + power_model.p_loss


def gee(channels, beams, power_model: PowerModel, noise_var: float,
        bandwidth: float = 1.0) -> float:
    """Global energy efficiency: sum rate over total consumed power."""
    _, p_total = total_power(beams, power_model)
    if p_total <= 0:
        raise ZeroDivisionError("total power is zero")
    return float(rates(effective_sinr(channels, beams, noise_var), bandwidth).sum() / p_total)


@dataclass(frozen=True)
class PerformanceReport:
    pair_sinrs: np.ndarray
    effective_sinrs: np.ndarray
    rates: np.ndarray
    sum_rate: float
    p_tr: float
    p_total: float
    gee: float
    sic_ok: bool
    min_rate_ok: bool
    budget_ok: bool
    user_powers: np.ndarray

    @property
    def feasible(self) -> bool:
        return self.sic_ok and self.min_rate_ok and self.budget_ok


def sic_chain_holds(channels, beams, rtol: float = FEAS_RTOL) -> bool:
    """|h_i^H w_K|^2 >= ... >= |h_i^H w_1|^2 for every receiver i."""
    g = cross_gains(channels, beams)
    upper, lower = g[:, 1:], g[:, :-1]
    slack = rtol * np.maximum(upper, lower) + 1e-14
    return bool(np.all(upper >= lower - slack))


def validate_solution(channels, beams, config: SystemConfig,
                      multiple_access: str = "noma") -> PerformanceReport:
    """Evaluate a beam set and check the min-rate, SIC and budget constraints.

    With ``multiple_access="oma"`` users decode treating all other beams as
    noise (zero-forcing baseline); the SIC chain then does not apply and
    ``sic_ok`` is reported as True.
    """
    h = _channel_matrix(channels)
    w = as_beams(beams)
    _check_dims(h, w)
    model = PowerModel.from_config(config)
    pairs = pair_sinr_matrix(h, w, config.noise_var)
    if multiple_access == "noma":
        eff = np.nanmin(pairs, axis=0)
        sic_ok = sic_chain_holds(h, w)
    elif multiple_access == "oma":
        eff = spatial_sinr(h, w, config.noise_var)
        sic_ok = True
    else:
        raise ValueError(f"unknown multiple access scheme {multiple_access!r}")
    r = rates(eff, config.bandwidth)
    p_tr, p_total = total_power(w, model)
    targets = np.asarray(config.min_sinr)
    return PerformanceReport(
        pair_sinrs=pairs,
        effective_sinrs=eff,
        rates=r,
        sum_rate=float(r.sum()),
        p_tr=p_tr,
        p_total=p_total,
        gee=float(r.sum() / p_total) if p_total > 0 else 0.0,
        sic_ok=sic_ok,
        min_rate_ok=bool(np.all(eff >= targets * (1 - FEAS_RTOL))),
        budget_ok=p_tr <= config.p_ava * (1 + FEAS_RTOL),
        user_powers=np.sum(np.abs(w) ** 2, axis=1),
    )
