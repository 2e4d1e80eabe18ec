import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noma_gee.experiments import (CSV_COLUMNS, ResultRow, SweepSpec, curve, emit_csv, find_knee,
                                  gnuplot_script, read_csv, run_sweep, run_trial, summarize,
                                  write_dat)
from noma_gee.scenario import SystemConfig, dbm_to_watts, generate_channels


def row(value, alg="sca", trial=0, axis=0.0, status="converged"):
    return ResultRow(trial, axis, alg, value * 1e6, value, 1.0, 1.0, 2.0, 3, status, 0.0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec(axis="bandwidth")
    with pytest.raises(ValueError):
        SweepSpec(trials=0)
    with pytest.raises(ValueError):
        SweepSpec(values=(1.0, 1.0))
    with pytest.raises(ValueError):
        SweepSpec(algorithms=("sca", "magic"))


def test_spec_axis_mapping():
    spec = SweepSpec(axis="p_loss", values=(30.0, 40.0), txsnr_db=10.0, seed=7)
    cfg = spec.config_at(30.0)
    assert cfg.p_sta == pytest.approx(1.0) and cfg.p_dyn == 0.0 and cfg.seed == 7
    assert cfg.p_ava == pytest.approx(SystemConfig().replace(txsnr_db=10.0).p_ava)
    assert SweepSpec(axis="num_antennas", values=(2, 4)).config_at(4).num_antennas == 4
    assert SweepSpec(axis="kappa", values=(1, 2)).config_at(2).path_loss_exponent == 2.0
    assert dbm_to_watts(40.0) == pytest.approx(10.0)


def test_sweep_cardinality_and_pairing():
    spec = SweepSpec(values=tuple(range(-5, 31, 5)), trials=20, algorithms=("sca", "srm", "zf"),
                     seed=11)
    rows = run_sweep(spec)
    assert len(rows) == 20 * 8 * 3
    keys = {(r.trial, r.axis, r.algorithm) for r in rows}
    assert len(keys) == len(rows)


def test_paired_channels_across_axis_values():
    spec = SweepSpec(axis="p_loss", values=(30.0, 50.0), seed=3)
    a = generate_channels(spec.config_at(30.0), 4)
    b = generate_channels(spec.config_at(50.0), 4)
    assert a == b
    k1 = generate_channels(SweepSpec(axis="kappa", values=(1, 2), seed=3).config_at(1), 4)
    k2 = generate_channels(SweepSpec(axis="kappa", values=(1, 2), seed=3).config_at(2), 4)
    assert np.array_equal(k1.fading, k2.fading)


def test_sweep_deterministic_across_workers(tmp_path):
    spec = SweepSpec(values=(0.0, 20.0), trials=3, algorithms=("sca", "pmin", "zf"), seed=5,
                     record_timing=False)
    paths = []
    for workers in (1, 3):
        path = tmp_path / f"w{workers}.csv"
        emit_csv(run_sweep(SweepSpec(**{**spec.__dict__, "workers": workers})), path)
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_infeasible_trials_are_marked():
    spec = SweepSpec(base=SystemConfig(min_sinr=1e6), values=(10.0,), trials=1,
                     algorithms=("sca", "pmin", "zf"))
    rows = {r.algorithm: r for r in run_trial(spec, 10.0, 0)}
    assert rows["sca"].status == "infeasible" and math.isnan(rows["sca"].gee_mbits_per_joule)
    assert rows["pmin"].status == "infeasible"
    assert rows["zf"].status == "converged"


# --- CSV ----------------------------------------------------------------------------

def test_empty_csv_is_header_only(tmp_path):
    path = tmp_path / "out.csv"
    emit_csv([], path)
    assert path.read_bytes() == (",".join(CSV_COLUMNS) + "\r\n").encode()


def test_single_row_csv_has_two_lines(tmp_path):
    path = tmp_path / "out.csv"
    emit_csv([row(0.1)], path)
    assert len(path.read_text().splitlines()) == 2


def test_csv_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(path)


finite = st.floats(-1e12, 1e12, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 99), finite, st.sampled_from(["sca", "srm", "a,b\"c"]),
                          finite, finite, st.integers(0, 50),
                          st.sampled_from(["converged", "infeasible"])), max_size=5))
def test_csv_round_trip(tmp_path_factory, recs):
    rows = [ResultRow(t, a, alg, g * 1e6, g, g, g, g, n, s, 1.5) for t, a, alg, g, _, n, s in recs]
    path = tmp_path_factory.mktemp("csv") / "rt.csv"
    emit_csv(rows, path)
    assert read_csv(path) == rows


def test_csv_round_trip_keeps_nan(tmp_path):
    nan = float("nan")
    r = ResultRow(0, 1.0, "sca", nan, nan, nan, nan, nan, 0, "infeasible")
    emit_csv([r], tmp_path / "n.csv")
    back = read_csv(tmp_path / "n.csv")[0]
    assert math.isnan(back.gee_bits_per_joule) and back.status == "infeasible"


# --- summaries ------------------------------------------------------------------------

def test_summary_single_row():
    s = summarize([row(0.25)])[(0.0, "sca")]
    assert (s.mean, s.median, s.stddev, s.count) == (0.25, 0.25, 0.0, 1)


def test_summary_two_rows():
    s = summarize([row(1.0), row(3.0, trial=1)])[(0.0, "sca")]
    assert s.mean == 2.0 and s.median == 2.0
    assert s.stddev == pytest.approx(math.sqrt(((1 - 2) ** 2 + (3 - 2) ** 2) / 1))


def test_summary_skips_nan_and_filters_status():
    rows = [row(1.0), row(float("nan"), trial=1, status="infeasible"), row(5.0, trial=2,
                                                                           status="iteration_limit")]
    assert summarize(rows)[(0.0, "sca")].count == 2
    assert summarize(rows, statuses=["converged"])[(0.0, "sca")].count == 1
    with pytest.raises(ValueError):
        summarize([])


def test_curve_is_axis_ordered():
    rows = [row(2.0, axis=5.0), row(1.0, axis=0.0), row(9.0, alg="zf", axis=0.0)]
    x, y = curve(summarize(rows), "sca")
    assert x.tolist() == [0.0, 5.0] and y.tolist() == [1.0, 2.0]


def test_knee_detection():
    x = [0, 5, 10, 15, 20]
    assert find_knee(x, [1.0, 2.0, 3.0, 3.01, 3.015]) == 10
    assert find_knee(x, [1.0, 2.0, 3.0, 4.0, 5.0]) is None
    assert find_knee(x, [5.0, 4.0, 3.0, 2.0, 1.0]) == 0
    with pytest.raises(ValueError):
        find_knee([0, 1], [1.0])


def test_plot_data(tmp_path):
    rows = [row(1.0), row(2.0, alg="zf"), row(3.0, axis=5.0)]
    algos = write_dat(summarize(rows), tmp_path / "ee.dat")
    lines = (tmp_path / "ee.dat").read_text().splitlines()
    assert algos == ["sca", "zf"]
    assert lines == ["# axis sca zf", "0 1 2", "5 3 NaN"]
    script = gnuplot_script("ee.dat", algos)
    assert 'using 1:3 with linespoints title "zf"' in script
