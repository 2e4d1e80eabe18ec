"""Command-line entry point: ``noma-gee solve | sweep | validate``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

from .baselines import feasibility_gate, solve_pmin, solve_srm, solve_zf_oma
from .core import validate_solution
from .dinkelbach import run_dinkelbach
from .experiments import AXES, SweepSpec, emit_csv, run_sweep
from .sca import run_sca
from .scenario import (SystemConfig, dump_channels, dumps_beams, generate_channels, load_channels,
                       loads_beams)

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

_TUPLE_FIELDS = {"distances", "min_sinr"}
_SPEC_KEYS = {"axis", "values", "algorithms", "trials", "seed", "txsnr_db", "workers"}


def parse_key_values(text: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def config_from_pairs(pairs: dict[str, str], base: SystemConfig | None = None) -> SystemConfig:
    """SystemConfig with fields overridden by string values.

    ``txsnr_db`` is accepted as a shortcut for the power budget.
    """
    base = base or SystemConfig()
    fields = {f.name: f for f in dataclasses.fields(SystemConfig)}
    changes = {}
    for key, raw in pairs.items():
        if key == "txsnr_db":
            changes[key] = float(raw)
        elif key not in fields:
            raise ValueError(f"unknown configuration key {key!r}")
        elif key in _TUPLE_FIELDS:
            vals = _floats(raw)
            changes[key] = vals[0] if len(vals) == 1 and key == "min_sinr" else vals
        elif key in ("num_antennas", "num_users", "max_iterations", "seed"):
            changes[key] = int(raw)
        else:
            changes[key] = float(raw)
    return base.replace(**changes)


def load_config(path: str | Path | None) -> SystemConfig:
    if path is None:
        return SystemConfig()
    return config_from_pairs(parse_key_values(Path(path).read_text()))


def load_spec(path: str | Path) -> SweepSpec:
    """Sweep spec file: spec keys plus any SystemConfig field for the base."""
    pairs = parse_key_values(Path(path).read_text())
    spec_pairs = {k: pairs.pop(k) for k in list(pairs) if k in _SPEC_KEYS}
    base = config_from_pairs(pairs)
    kwargs = {"base": base}
    if "axis" in spec_pairs:
        kwargs["axis"] = spec_pairs["axis"]
    if "values" in spec_pairs:
        kwargs["values"] = _floats(spec_pairs["values"])
    if "algorithms" in spec_pairs:
        kwargs["algorithms"] = tuple(spec_pairs["algorithms"].replace(",", " ").split())
    for key in ("trials", "seed", "workers"):
        if key in spec_pairs:
            kwargs[key] = int(spec_pairs[key])
    if "txsnr_db" in spec_pairs:
        kwargs["txsnr_db"] = float(spec_pairs["txsnr_db"])
    return SweepSpec(**kwargs)


def _print_report(report, out) -> None:
    print(f"gee={report.gee:.9g}", file=out)
    print(f"sum_rate={report.sum_rate:.9g}", file=out)
    print(f"p_tr={report.p_tr:.9g}", file=out)
    print(f"p_total={report.p_total:.9g}", file=out)
    print("sinr=" + ",".join(f"{g:.9g}" for g in report.effective_sinrs), file=out)
    print("powers=" + ",".join(f"{p:.9g}" for p in report.user_powers), file=out)
    print(f"sic_ok={report.sic_ok} min_rate_ok={report.min_rate_ok} "
          f"budget_ok={report.budget_ok}", file=out)


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.txsnr_db is not None:
        cfg = cfg.replace(txsnr_db=args.txsnr_db)
    channels = generate_channels(cfg, args.trial)
    if args.algo == "sca":
        sol = run_sca(channels, cfg)
    elif args.algo == "dinkelbach":
        sol = run_dinkelbach(channels, cfg)
    elif args.algo == "pmin":
        sol = solve_pmin(channels, cfg.min_sinr, cfg)
    elif args.algo == "srm":
        sol = solve_srm(channels, cfg)
    else:
        sol = solve_zf_oma(channels, cfg)
    infeasible = sol.status == "infeasible"
    if args.algo == "pmin" and sol.report is not None and sol.report.p_tr > cfg.p_ava:
        infeasible = True
    if infeasible and args.algo in ("sca", "dinkelbach"):
        verdict = feasibility_gate(channels, cfg)
        print("status=infeasible")
        print(f"p_star={verdict.p_star:.9g} p_ava={cfg.p_ava:.9g}")
        return EXIT_INFEASIBLE
    if args.trace and sol.trace:
        writer = csv.DictWriter(sys.stdout, fieldnames=list(sol.trace[0]))
        writer.writeheader()
        for row in sol.trace:
            writer.writerow({k: format(v, ".9g") if isinstance(v, float) else v
                             for k, v in row.items()})
    print(f"status={'infeasible' if infeasible else sol.status}")
    print(f"iterations={sol.iterations_used}")
    if sol.report is not None:
        _print_report(sol.report, sys.stdout)
    if args.beams_out:
        Path(args.beams_out).write_text(dumps_beams(sol.beams))
    if args.channels_out:
        dump_channels(channels, args.channels_out)
    if infeasible:
        return EXIT_INFEASIBLE
    return EXIT_OK if sol.status in ("converged", "iteration_limit") else EXIT_ERROR


def cmd_sweep(args) -> int:
    spec = load_spec(args.spec)
    if args.workers is not None:
        spec = dataclasses.replace(spec, workers=args.workers)
    if args.no_timing:
        spec = dataclasses.replace(spec, record_timing=False)
    rows = run_sweep(spec)
    emit_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    channels = load_channels(args.channels)
    beams = loads_beams(Path(args.beams).read_text())
    if beams.shape != channels.h.shape:
        raise ValueError(f"beams shape {beams.shape} does not match channels {channels.h.shape}")
    if cfg.num_users != channels.num_users or cfg.num_antennas != channels.num_antennas:
        cfg = cfg.replace(num_users=channels.num_users, num_antennas=channels.num_antennas,
                          distances=channels.distances)
    report = validate_solution(channels, beams, cfg, multiple_access=args.access)
    _print_report(report, sys.stdout)
    print(f"feasible={report.feasible}")
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="noma-gee",
                                description="Energy-efficient MISO-NOMA beamforming")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver warnings")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one channel realization")
    s.add_argument("--algo", choices=["sca", "dinkelbach", "pmin", "srm", "zf"], default="sca")
    s.add_argument("--config", help="key=value file with SystemConfig fields")
    s.add_argument("--seed", type=int, help="master seed (overrides the config)")
    s.add_argument("--trial", type=int, default=0, help="trial index for the channel draw")
    s.add_argument("--txsnr-db", type=float, help="TX-SNR in dB (sets the power budget)")
    s.add_argument("--trace", action="store_true", help="print the iteration trace as CSV")
    s.add_argument("--beams-out", help="write the beams to this file")
    s.add_argument("--channels-out", help="write the channel draw to this file")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="run a Monte-Carlo sweep")
    w.add_argument("--spec", required=True, help=f"sweep spec file (axis one of {AXES})")
    w.add_argument("--out", required=True, help="CSV output path")
    w.add_argument("--workers", type=int, help="worker threads")
    w.add_argument("--no-timing", action="store_true", help="write zero wall times")
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="check a beam set against the constraints")
    v.add_argument("--channels", required=True)
    v.add_argument("--beams", required=True)
    v.add_argument("--config", help="key=value file with SystemConfig fields")
    v.add_argument("--access", choices=["noma", "oma"], default="noma")
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
