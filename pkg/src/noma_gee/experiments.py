"""Monte-Carlo sweeps over paired channel draws, CSV output and summaries.

Every (trial, axis value) pair sees one channel realization shared by all
algorithms. The fading draw depends only on the master seed and the trial
index, so sweeping path loss or power loss changes nothing but that parameter.
"""
from __future__ import annotations

import csv
import dataclasses
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .baselines import solve_pmin, solve_srm, solve_zf_oma
from .dinkelbach import run_dinkelbach
from .sca import Solution, run_sca
from .scenario import SystemConfig, dbm_to_watts, generate_channels

AXES = ("txsnr_db", "p_loss", "num_antennas", "kappa")
ALGORITHMS = ("sca", "dinkelbach", "pmin", "srm", "zf")
PRESENTATION_BANDWIDTH = 1e6  # Hz, for the bits/J column
CSV_COLUMNS = ("trial", "axis", "algorithm", "gee_bits_per_joule", "gee_mbits_per_joule",
               "sum_rate_bits", "p_tr_w", "p_total_w", "iterations", "status", "wall_time_ms")
KNEE_GAIN = 0.01


def _sig9(x: float) -> float:
    return float(format(float(x), ".9g"))


@dataclass(frozen=True)
class SweepSpec:
    """One Monte-Carlo sweep.

    ``p_loss`` values are in dBm and replace the static loss (dynamic loss
    set to zero). ``txsnr_db`` fixes the budget for sweeps over other axes.
    """

    base: SystemConfig = field(default_factory=SystemConfig)
    axis: str = "txsnr_db"
    values: tuple[float, ...] = (-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    algorithms: tuple[str, ...] = ("sca", "srm", "zf")
    trials: int = 50
    seed: int = 0
    txsnr_db: float | None = None
    workers: int = 1
    record_timing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.values or any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("axis values must be nonempty and strictly increasing")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown or not self.algorithms:
            raise ValueError(f"unknown algorithms {sorted(unknown)}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def config_at(self, value: float) -> SystemConfig:
        cfg = self.base.replace(seed=self.seed)
        if self.txsnr_db is not None:
            cfg = cfg.replace(txsnr_db=self.txsnr_db)
        if self.axis == "txsnr_db":
            return cfg.replace(txsnr_db=value)
        if self.axis == "p_loss":
            return cfg.replace(p_sta=dbm_to_watts(value), p_dyn=0.0)
        if self.axis == "kappa":
            return cfg.replace(path_loss_exponent=value)
        return cfg.replace(num_antennas=int(round(value)))


@dataclass(frozen=True)
class ResultRow:
    trial: int
    axis: float
    algorithm: str
    gee_bits_per_joule: float
    gee_mbits_per_joule: float
    sum_rate_bits: float
    p_tr_w: float
    p_total_w: float
    iterations: int
    status: str
    wall_time_ms: float = 0.0

    def __post_init__(self):
        # stored at CSV precision so that emit/read is an identity
        for f in ("axis", "gee_bits_per_joule", "gee_mbits_per_joule", "sum_rate_bits",
                  "p_tr_w", "p_total_w", "wall_time_ms"):
            object.__setattr__(self, f, _sig9(getattr(self, f)))
        object.__setattr__(self, "trial", int(self.trial))
        object.__setattr__(self, "iterations", int(self.iterations))

    @property
    def ok(self) -> bool:
        return self.status == "converged"

    def sort_key(self):
        order = ALGORITHMS.index(self.algorithm) if self.algorithm in ALGORITHMS else len(ALGORITHMS)
        return (self.axis, self.trial, order, self.algorithm)


def row_from_solution(sol: Solution, trial: int, axis: float, config: SystemConfig,
                      status: str | None = None, wall_time_ms: float = 0.0) -> ResultRow:
    rep = sol.report
    if rep is None:
        nan = float("nan")
        return ResultRow(trial, axis, sol.algorithm, nan, nan, nan, nan, nan,
                         sol.iterations_used, status or sol.status, wall_time_ms)
    per_hz = rep.gee / config.bandwidth
    return ResultRow(trial, axis, sol.algorithm, per_hz * PRESENTATION_BANDWIDTH, per_hz,
                     rep.sum_rate / config.bandwidth, rep.p_tr, rep.p_total,
                     sol.iterations_used, status or sol.status, wall_time_ms)


def run_trial(spec: SweepSpec, value: float, trial: int, backend=None) -> list[ResultRow]:
    """All requested algorithms on one channel draw."""
    cfg = spec.config_at(value)
    channels = generate_channels(cfg, trial)
    rows = []
    pmin = None
    if {"sca", "dinkelbach", "pmin"} & set(spec.algorithms):
        start = time.perf_counter()
        pmin = solve_pmin(channels, cfg.min_sinr, cfg, backend=backend)
        pmin_ms = 1e3 * (time.perf_counter() - start)
    for algo in spec.algorithms:
        start = time.perf_counter()
        if algo == "pmin":
            over = pmin.report is not None and pmin.report.p_tr > cfg.p_ava
            status = "infeasible" if over else None
            sol, elapsed = pmin, pmin_ms
        else:
            status = None
            if algo == "sca":
                sol = run_sca(channels, cfg, backend=backend, pmin=pmin)
            elif algo == "dinkelbach":
                sol = run_dinkelbach(channels, cfg, backend=backend, pmin=pmin)
            elif algo == "srm":
                sol = solve_srm(channels, cfg, backend=backend)
            else:
                sol = solve_zf_oma(channels, cfg)
            elapsed = 1e3 * (time.perf_counter() - start)
        wall = elapsed if spec.record_timing else 0.0
        rows.append(row_from_solution(sol, trial, value, cfg, status, wall))
    return rows


def run_sweep(spec: SweepSpec, backend=None) -> list[ResultRow]:
    """Rows for every (trial, axis value, algorithm), sorted."""
    tasks = [(v, t) for v in spec.values for t in range(spec.trials)]
    if spec.workers == 1:
        chunks = [run_trial(spec, v, t, backend) for v, t in tasks]
    else:
        with ThreadPoolExecutor(spec.workers) as pool:
            chunks = list(pool.map(lambda vt: run_trial(spec, vt[0], vt[1], backend), tasks))
    return sorted((r for chunk in chunks for r in chunk), key=ResultRow.sort_key)


# --- CSV ------------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def emit_csv(rows: Iterable[ResultRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])


def read_csv(path: str | Path) -> list[ResultRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        rows = []
        for rec in reader:
            kwargs = {}
            for f in dataclasses.fields(ResultRow):
                raw = rec[f.name]
                if f.name in ("trial", "iterations"):
                    kwargs[f.name] = int(raw)
                elif f.name in ("algorithm", "status"):
                    kwargs[f.name] = raw
                else:
                    kwargs[f.name] = float(raw)
            rows.append(ResultRow(**kwargs))
    return rows


# --- summaries ------------------------------------------------------------------

@dataclass(frozen=True)
class Summary:
    mean: float
    median: float
    stddev: float
    count: int


def summarize(rows: Sequence[ResultRow], metric: str = "gee_mbits_per_joule",
              statuses: Iterable[str] | None = None) -> dict[tuple[float, str], Summary]:
    """Mean, median and sample standard deviation per (axis value, algorithm).

    NaN values (infeasible trials) are left out; ``statuses`` optionally
    restricts the rows that count.
    """
    if not rows:
        raise ValueError("nothing to summarize")
    keep = None if statuses is None else set(statuses)
    groups: dict[tuple[float, str], list[float]] = {}
    for r in rows:
        if keep is not None and r.status not in keep:
            continue
        v = getattr(r, metric)
        if isinstance(v, float) and math.isnan(v):
            continue
        groups.setdefault((r.axis, r.algorithm), []).append(float(v))
    out = {}
    for key, vals in sorted(groups.items()):
        sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out[key] = Summary(statistics.fmean(vals), statistics.median(vals), sd, len(vals))
    return out


def curve(summary: dict[tuple[float, str], Summary], algorithm: str,
          stat: str = "median") -> tuple[np.ndarray, np.ndarray]:
    """(axis values, statistic) for one algorithm, in axis order."""
    pts = sorted((a, getattr(s, stat)) for (a, alg), s in summary.items() if alg == algorithm)
    return np.array([p[0] for p in pts]), np.array([p[1] for p in pts])


def find_knee(axis_values, ee_values, gain: float = KNEE_GAIN):
    """Smallest axis value after which the relative EE gain stays below ``gain``.

    Returns None when the curve is still rising at the last point.
    """
    x = np.asarray(axis_values, dtype=float)
    y = np.asarray(ee_values, dtype=float)
    if len(x) != len(y):
        raise ValueError("axis and EE arrays differ in length")
    rel = np.diff(y) / np.abs(y[:-1])
    for j in range(len(rel)):
        if np.all(rel[j:] < gain):
            return float(x[j])
    return None


# --- plot data -------------------------------------------------------------------

GNUPLOT_TEMPLATE = """\
set datafile separator whitespace
set key left top
set xlabel "{xlabel}"
set ylabel "{ylabel}"
set grid
plot {plots}
"""


def write_dat(summary: dict[tuple[float, str], Summary], path: str | Path,
              stat: str = "median") -> list[str]:
    """Whitespace table: axis column, then one column per algorithm."""
    algos = sorted({alg for _, alg in summary}, key=lambda a: (a not in ALGORITHMS, a))
    axis = sorted({a for a, _ in summary})
    with open(path, "w") as fh:
        fh.write("# axis " + " ".join(algos) + "\n")
        for a in axis:
            cells = [_fmt(getattr(summary[(a, alg)], stat)) if (a, alg) in summary else "NaN"
                     for alg in algos]
            fh.write(" ".join([_fmt(a)] + cells) + "\n")
    return algos


def gnuplot_script(dat_path: str, algorithms: Sequence[str], xlabel: str = "TX-SNR (dB)",
                   ylabel: str = "EE (Mbit/J)") -> str:
    plots = ", ".join(f'"{dat_path}" using 1:{j + 2} with linespoints title "{alg}"'
                      for j, alg in enumerate(algorithms))
    return GNUPLOT_TEMPLATE.format(xlabel=xlabel, ylabel=ylabel, plots=plots)
