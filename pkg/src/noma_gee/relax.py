"""Convex surrogates shared by the GEE-Max, P-Min and SRM solvers.

Beams enter conic programs as real vectors ``[Re w_i, Im w_i]`` of length 2N.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import ConicProgram, Expr, vstack

ZETA_FLOOR = 1e-8


@dataclass(frozen=True)
class SqrtTangent:
    """First-order expansion of sqrt(a b) around (a0, b0)."""

    a0: float
    b0: float
    value: float
    da: float
    db: float

    def __call__(self, a, b):
        return self.value + self.da * (a - self.a0) + self.db * (b - self.b0)


def linearize_sqrt_product(a0: float, b0: float) -> SqrtTangent:
    """Tangent plane of the concave map (a, b) -> sqrt(a b); it lies above it."""
    if a0 <= 0 or b0 <= 0:
        raise ValueError("expansion point must be positive")
    return SqrtTangent(a0, b0, float(np.sqrt(a0 * b0)),
                       0.5 * float(np.sqrt(b0 / a0)), 0.5 * float(np.sqrt(a0 / b0)))


def stacked_map(h: np.ndarray) -> np.ndarray:
    """2 x 2N real matrix taking [Re w, Im w] to (Re h^H w, Im h^H w)."""
    h = np.asarray(h, dtype=complex)
    return np.block([[h.real, h.imag], [-h.imag, h.real]])


def stack(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    return np.concatenate([w.real, w.imag], axis=-1)


def unstack(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1] // 2
    return x[..., :n] + 1j * x[..., n:]


@dataclass(frozen=True)
class AbsSqTangent:
    """Affine minorant ``coef @ [Re w, Im w] + offset`` of |h^H w|^2."""

    coef: np.ndarray
    offset: float
    psi0: np.ndarray

    def __call__(self, w) -> float:
        return float(self.coef @ stack(w) + self.offset)


def linearize_abs_sq(h, w0) -> AbsSqTangent:
    """Tangent of |h^H w|^2 at w0 in the stacked coordinates; always below it."""
    h = np.asarray(h, dtype=complex).ravel()
    w0 = np.asarray(w0, dtype=complex).ravel()
    if h.shape != w0.shape:
        raise ValueError("h and w0 must have the same length")
    M = stacked_map(h)
    psi0 = M @ stack(w0)
    return AbsSqTangent(coef=2.0 * psi0 @ M, offset=-float(psi0 @ psi0), psi0=psi0)


# --- slack back-fill ------------------------------------------------------

def user_pairs(K: int) -> list[tuple[int, int]]:
    """(k, i) with k <= i, in the order used for theta/rho vectors."""
    return [(k, i) for i in range(K) for k in range(i + 1)]


@dataclass(frozen=True)
class SinrProfile:
    """Interference levels and SINRs of a beam set."""

    theta: np.ndarray  # interference + noise per pair (k, i), user_pairs order
    zeta: np.ndarray  # 1 + effective SINR per user


def sinr_profile(h: np.ndarray, w: np.ndarray, noise_var: float) -> SinrProfile:
    """Slack values that make the SINR constraints tight at ``w``."""
    K = h.shape[0]
    gains = np.abs(h.conj() @ w.T) ** 2
    theta, zeta = [], np.empty(K)
    for i in range(K):
        worst = np.inf
        for k in range(i + 1):
            th = gains[k, :i].sum() + noise_var
            theta.append(th)
            worst = min(worst, gains[k, i] / th)
        zeta[i] = 1.0 + worst
    return SinrProfile(np.array(theta), zeta)


def signal_phases(h: np.ndarray, w0) -> np.ndarray:
    """Phase of h_k^H w0_i for every (k, i); zero where the product vanishes."""
    if w0 is None:
        return np.zeros((h.shape[0], h.shape[0]))
    G = h.conj() @ np.asarray(w0, dtype=complex).T
    return np.where(np.abs(G) > 0, np.angle(G), 0.0)


def aligned_signal(prod: Expr, phase: float) -> Expr:
    """Re(e^{-j phase} h^H w): a linear minorant of |h^H w|, exact when the
    product has the given phase."""
    return np.array([np.cos(phase), np.sin(phase)]) @ prod


# --- constraint builders ----------------------------------------------------

def quad_scale(x0: float) -> float:
    """Scale for :func:`add_quad_bound` given the expected size of x."""
    return float(np.sqrt(max(x0, 1.0)))


def add_quad_bound(prog: ConicProgram, x: Expr, v: Expr, label: str = "",
                   scale: float = 1.0) -> int:
    """x >= ||v||^2 as ((x/s + s)/2 >= ||(v, (x/s - s)/2)||).

    Taking s near sqrt(x) keeps every cone entry of order sqrt(x); with s = 1
    the two large entries nearly cancel once x is in the thousands.
    """
    y = x / scale
    return prog.add_soc((y + scale) * 0.5, vstack([v, (y - scale) * 0.5]), label)


def products(w_vars, h_k: np.ndarray) -> list[Expr]:
    """(Re, Im) pairs of h_k^H w_j for every user j."""
    M = stacked_map(h_k)
    return [M @ wj for wj in w_vars]


def add_sinr_slacks(prog, w_vars, h, zeta, theta, zeta0, theta0, noise_var, w0=None,
                    tag="") -> None:
    """|h_k^H w_i| >= tangent of sqrt((zeta_i - 1) theta_ki) and the interference
    SOC sum_{j<i} |h_k^H w_j|^2 + sigma^2 <= theta_ki.

    The signal magnitude is bounded below by its projection on the phase it
    has at ``w0``, so the constraint is tight at the expansion point.
    """
    K = h.shape[0]
    phase = signal_phases(h, w0)
    for p, (k, i) in enumerate(user_pairs(K)):
        prods = products(w_vars, h[k])
        tangent = linearize_sqrt_product(max(zeta0[i] - 1.0, ZETA_FLOOR), theta0[p])
        prog.add_ge(aligned_signal(prods[i], phase[k, i]), tangent(zeta[i] - 1.0, theta[p]),
                    f"{tag}sinr_{k}_{i}")
        interf = vstack(prods[:i]) if i else None
        if interf is None:
            prog.add_ge(theta[p], noise_var, f"{tag}interf_{k}_{i}")
        else:
            add_quad_bound(prog, theta[p] - noise_var, interf, f"{tag}interf_{k}_{i}",
                           quad_scale(theta0[p] - noise_var))


def add_min_rate(prog, w_vars, h, targets, noise_var, w0=None) -> None:
    """|h_k^H w_i| / sqrt(gamma_i) >= ||(h_k^H w_j)_{j<i}, sigma||, with the
    magnitude replaced by its projection on the phase at ``w0``."""
    K = h.shape[0]
    sigma = np.sqrt(noise_var)
    phase = signal_phases(h, w0)
    for i in range(K):
        if targets[i] <= 0:
            continue
        for k in range(i + 1):
            prods = products(w_vars, h[k])
            rhs = aligned_signal(prods[i], phase[k, i]) / np.sqrt(targets[i])
            prog.add_soc(rhs, vstack(prods[:i] + [np.array([sigma])]), f"minrate_{k}_{i}")


def add_sic_chain(prog, w_vars, h, w0) -> None:
    """|h_r^H w_{j+1}|^2 >= |h_r^H w_j|^2 with the larger side linearized at w0."""
    K = h.shape[0]
    for r in range(K):
        prods = products(w_vars, h[r])
        for j in range(K - 1):
            lin = linearize_abs_sq(h[r], w0[j + 1])
            lower = lin.coef @ w_vars[j + 1] + lin.offset
            add_quad_bound(prog, lower, prods[j], f"sic_{r}_{j}",
                           quad_scale(float(lin.psi0 @ lin.psi0)))
