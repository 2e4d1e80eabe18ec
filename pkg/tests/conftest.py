"""Shared Monte-Carlo fixtures for the acceptance suite.

Every sweep is run once per session; the acceptance tests only read them.
"""
import pytest

from noma_gee.baselines import solve_pmin
from noma_gee.dinkelbach import run_dinkelbach
from noma_gee.experiments import SweepSpec, run_sweep
from noma_gee.sca import run_sca
from noma_gee.scenario import SystemConfig, dbm_to_watts, generate_channels

MASTER_SEED = 2024
TRIALS = 50
TXSNR_GRID = (-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)

_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line, then assert the outcome."""

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"acceptance {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        request.config.stash[_VERDICTS].append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


def table_config(**kw) -> SystemConfig:
    return SystemConfig(seed=MASTER_SEED, **kw)


@pytest.fixture(scope="session")
def base_sweep():
    """TX-SNR sweep with every design, P_loss = 40 dBm."""
    spec = SweepSpec(base=table_config(), values=TXSNR_GRID, trials=TRIALS, seed=MASTER_SEED,
                     algorithms=("sca", "pmin", "srm", "zf"))
    return run_sweep(spec)


@pytest.fixture(scope="session")
def ploss_sweeps(base_sweep):
    """GEE-Max TX-SNR sweeps keyed by P_loss in dBm."""
    out = {40.0: [r for r in base_sweep if r.algorithm == "sca"]}
    for dbm in (30.0, 50.0):
        spec = SweepSpec(base=table_config(p_sta=dbm_to_watts(dbm)), values=TXSNR_GRID,
                         trials=TRIALS, seed=MASTER_SEED, algorithms=("sca",))
        out[dbm] = run_sweep(spec)
    return out


@pytest.fixture(scope="session")
def kappa_sweep():
    spec = SweepSpec(base=table_config(), axis="kappa", values=(1.0, 2.0, 3.0, 4.0),
                     txsnr_db=25.0, trials=TRIALS, seed=MASTER_SEED, algorithms=("sca",))
    return run_sweep(spec)


@pytest.fixture(scope="session")
def antenna_sweep():
    base = table_config(p_sta=dbm_to_watts(10.0), p_dyn=dbm_to_watts(5.0))
    spec = SweepSpec(base=base, axis="num_antennas", values=tuple(range(2, 9)), txsnr_db=10.0,
                     trials=TRIALS, seed=MASTER_SEED, algorithms=("sca", "srm"))
    return run_sweep(spec)


@pytest.fixture(scope="session")
def paired_runs():
    """(channels, config, SCA solution, Dinkelbach solution) per TX-SNR point."""
    out = {}
    for txsnr in (0.0, 10.0, 20.0):
        cfg = table_config().replace(txsnr_db=txsnr)
        runs = []
        for trial in range(TRIALS):
            ch = generate_channels(cfg, trial)
            pmin = solve_pmin(ch, cfg.min_sinr, cfg)
            runs.append((ch, cfg, run_sca(ch, cfg, pmin=pmin),
                         run_dinkelbach(ch, cfg, pmin=pmin)))
        out[txsnr] = runs
    return out


@pytest.fixture(scope="session")
def low_snr_runs():
    """GEE-Max at TX-SNR 2 dB, where the budget binds."""
    cfg = table_config().replace(txsnr_db=2.0)
    return [(generate_channels(cfg, t), cfg, run_sca(generate_channels(cfg, t), cfg))
            for t in range(TRIALS)]

