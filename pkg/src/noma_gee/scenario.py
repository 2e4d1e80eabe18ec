"""Scenario generation: system parameters, Rayleigh channels and user ordering."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def txsnr_to_budget(txsnr_db: float, noise_var: float) -> float:
    """Transmit power budget (W) for a TX-SNR given in dB."""
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    return noise_var * 10.0 ** (txsnr_db / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Parameters of one MISO-NOMA downlink instance.

    Defaults follow the reference simulation setup (3 antennas, 3 users at
    1, 5.5 and 10 m, kappa = 1, noise variance 2, amplifier efficiency 0.65,
    SINR floor 1e-2). ``bandwidth`` is 1 so that rates are in bit/s/Hz; the
    1 MHz presentation bandwidth is applied only when reporting Mbit/J.
    """

    num_antennas: int = 3
    num_users: int = 3
    distances: tuple[float, ...] = (1.0, 5.5, 10.0)
    path_loss_exponent: float = 1.0
    noise_var: float = 2.0
    bandwidth: float = 1.0
    min_sinr: tuple[float, ...] = (1e-2, 1e-2, 1e-2)
    amp_efficiency: float = 0.65
    p_sta: float = 10.0
    p_dyn: float = 0.0
    p_ava: float = 200.0
    sca_tolerance: float = 1e-2
    dinkelbach_tolerance: float = 1e-2
    max_iterations: int = 50
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))
        sinr = self.min_sinr
        if np.ndim(sinr) == 0:
            sinr = (float(sinr),) * self.num_users
        object.__setattr__(self, "min_sinr", tuple(float(g) for g in sinr))
        if self.num_users < 1 or self.num_antennas < 1:
            raise ValueError("need at least one user and one antenna")
        if len(self.distances) != self.num_users:
            raise ValueError("distances must have one entry per user")
        if len(self.min_sinr) != self.num_users:
            raise ValueError("min_sinr must have one entry per user")
        if any(d <= 0 for d in self.distances):
            raise ValueError("distances must be positive")
        if self.path_loss_exponent < 0:
            raise ValueError("path_loss_exponent must be >= 0")
        if not 0 < self.amp_efficiency <= 1:
            raise ValueError("amp_efficiency must lie in (0, 1]")
        if self.noise_var <= 0 or self.p_ava <= 0 or self.bandwidth <= 0:
            raise ValueError("noise_var, p_ava and bandwidth must be positive")
        if any(g < 0 for g in self.min_sinr):
            raise ValueError("min_sinr entries must be >= 0")
        if self.p_sta < 0 or self.p_dyn < 0:
            raise ValueError("power losses must be >= 0")
        if self.sca_tolerance <= 0 or self.dinkelbach_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1 or self.seed < 0:
            raise ValueError("max_iterations must be >= 1 and seed >= 0")

    @property
    def p_loss(self) -> float:
        return self.p_sta + self.num_antennas * self.p_dyn

    def replace(self, **changes) -> "SystemConfig":
        """Copy with fields changed; ``txsnr_db`` is accepted and sets ``p_ava``."""
        if "txsnr_db" in changes:
            txsnr = changes.pop("txsnr_db")
            noise = changes.get("noise_var", self.noise_var)
            changes["p_ava"] = txsnr_to_budget(txsnr, noise)
        if "num_users" in changes and "min_sinr" not in changes:
            changes["min_sinr"] = (self.min_sinr[0],) * changes["num_users"]
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ChannelSet:
    """User channels ``h`` (K x N, row i is h_i), strongest user first.

    ``order[i]`` is the original index of the user now in slot i.
    """

    h: np.ndarray
    order: tuple[int, ...]
    distances: tuple[float, ...] = ()
    seed: int | None = None
    path_loss_exponent: float | None = None
    fading: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        h = np.array(self.h, dtype=complex)
        if h.ndim != 2 or h.shape[0] < 1:
            raise ValueError("channels must be a nonempty K x N array")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel entries must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @property
    def num_users(self) -> int:
        return self.h.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.h.shape[1]

    @property
    def gains(self) -> np.ndarray:
        return np.sum(np.abs(self.h) ** 2, axis=1)

    def __eq__(self, other):
        if not isinstance(other, ChannelSet):
            return NotImplemented
        return (np.array_equal(self.h, other.h) and self.order == other.order
                and self.distances == other.distances)

    __hash__ = None


def order_users(raw_channels: Sequence[Sequence[complex]],
                distances: Sequence[float] | None = None) -> ChannelSet:
    """Sort users by descending channel gain; ties keep the original order."""
    if len(raw_channels) == 0:
        raise ValueError("need at least one channel")
    lengths = {len(c) for c in raw_channels}
    if len(lengths) != 1:
        raise ValueError("all channels must have the same length")
    h = np.array([np.asarray(c, dtype=complex) for c in raw_channels])
    gains = np.sum(np.abs(h) ** 2, axis=1)
    perm = sorted(range(len(h)), key=lambda i: (-gains[i], i))
    dist = tuple(distances[i] for i in perm) if distances is not None else ()
    return ChannelSet(h=h[perm], order=tuple(perm), distances=dist)


def trial_rng(master_seed: int, trial: int = 0) -> np.random.Generator:
    """Independent stream per (master seed, trial) pair."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, trial]))


def rayleigh_fading(rng: np.random.Generator, num_users: int, num_antennas: int) -> np.ndarray:
    """Unit-variance circularly-symmetric complex Gaussian entries."""
    z = rng.standard_normal((num_users, num_antennas, 2))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


def channels_from_fading(g: np.ndarray, distances: Sequence[float], kappa: float,
                         seed: int | None = None) -> ChannelSet:
    scale = np.sqrt(np.asarray(distances, dtype=float) ** (-kappa))
    ordered = order_users(g * scale[:, None], distances)
    return dataclasses.replace(ordered, seed=seed, path_loss_exponent=kappa,
                               fading=np.asarray(g)[list(ordered.order)])


def generate_channels(config: SystemConfig, trial: int = 0) -> ChannelSet:
    """Draw h_i = sqrt(d_i^-kappa) g_i and order users by channel strength."""
    g = rayleigh_fading(trial_rng(config.seed, trial), config.num_users, config.num_antennas)
    return channels_from_fading(g, config.distances, config.path_loss_exponent, seed=config.seed)


# --- text dump/load -------------------------------------------------------

def _fmt_complex_row(values: np.ndarray) -> str:
    return " ".join(f"{z.real:.17g},{z.imag:.17g}" for z in values)


def _parse_complex_row(tokens: Sequence[str]) -> np.ndarray:
    out = []
    for tok in tokens:
        re, im = tok.split(",")
        out.append(complex(float(re), float(im)))
    return np.array(out, dtype=complex)


def dumps_channels(channels: ChannelSet) -> str:
    lines = [f"# channels K={channels.num_users} N={channels.num_antennas}"]
    if channels.seed is not None:
        lines.append(f"# seed={channels.seed}")
    if channels.path_loss_exponent is not None:
        lines.append(f"# kappa={channels.path_loss_exponent:.17g}")
    for i, row in enumerate(channels.h):
        d = channels.distances[i] if channels.distances else float("nan")
        lines.append(f"{channels.order[i]} {d:.17g} {_fmt_complex_row(row)}")
    return "\n".join(lines) + "\n"


def loads_channels(text: str) -> ChannelSet:
    """Inverse of :func:`dumps_channels`. Rows are kept in file order."""
    meta: dict[str, str] = {}
    order, dist, rows = [], [], []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    key, val = tok.split("=", 1)
                    meta[key] = val
            continue
        tokens = line.split()
        order.append(int(tokens[0]))
        dist.append(float(tokens[1]))
        rows.append(_parse_complex_row(tokens[2:]))
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("malformed channel file")
    distances = () if all(np.isnan(dist)) else tuple(dist)
    return ChannelSet(
        h=np.array(rows), order=tuple(order), distances=distances,
        seed=int(meta["seed"]) if "seed" in meta else None,
        path_loss_exponent=float(meta["kappa"]) if "kappa" in meta else None,
    )


def dump_channels(channels: ChannelSet, path: str | Path) -> None:
    Path(path).write_text(dumps_channels(channels))


def load_channels(path: str | Path) -> ChannelSet:
    return loads_channels(Path(path).read_text())


def dumps_beams(beams: np.ndarray) -> str:
    beams = np.atleast_2d(np.asarray(beams, dtype=complex))
    lines = [f"# beams K={beams.shape[0]} N={beams.shape[1]}"]
    lines += [f"{i} {_fmt_complex_row(row)}" for i, row in enumerate(beams)]
    return "\n".join(lines) + "\n"


def loads_beams(text: str) -> np.ndarray:
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            rows.append(_parse_complex_row(line.split()[1:]))
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("malformed beam file")
    return np.array(rows)
