import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noma_gee.scenario import (ChannelSet, SystemConfig, channels_from_fading, dbm_to_watts,
                               dumps_beams, dumps_channels, generate_channels, loads_beams,
                               loads_channels, order_users, trial_rng, txsnr_to_budget)


def test_default_config_matches_reference_setup():
    cfg = SystemConfig()
    assert (cfg.num_antennas, cfg.num_users) == (3, 3)
    assert cfg.distances == (1.0, 5.5, 10.0)
    assert cfg.path_loss_exponent == 1.0
    assert cfg.noise_var == 2.0
    assert cfg.amp_efficiency == 0.65
    assert cfg.min_sinr == (0.01, 0.01, 0.01)
    assert cfg.sca_tolerance == cfg.dinkelbach_tolerance == 0.01


@pytest.mark.parametrize("changes", [
    {"num_users": 0}, {"num_antennas": 0}, {"amp_efficiency": 0.0}, {"amp_efficiency": 1.5},
    {"noise_var": 0.0}, {"p_ava": -1.0}, {"min_sinr": (-1.0, 0.0, 0.0)},
    {"distances": (1.0, 2.0)}, {"sca_tolerance": 0.0}, {"seed": -1},
])
def test_config_rejects_invalid_fields(changes):
    with pytest.raises(ValueError):
        SystemConfig(**changes)


def test_config_scalar_sinr_broadcasts():
    assert SystemConfig(min_sinr=0.5).min_sinr == (0.5, 0.5, 0.5)


def test_config_replace_with_txsnr_sets_budget():
    cfg = SystemConfig().replace(txsnr_db=2)
    assert cfg.p_ava == pytest.approx(3.1698, abs=1e-4)


def test_n_equal_one_is_allowed():
    assert SystemConfig(num_antennas=1).num_antennas == 1


@pytest.mark.parametrize("txsnr, noise, expected, tol", [
    (0.0, 1.0, 1.0, 1e-12),
    (2.0, 2.0, 3.1698, 1e-4),
    (25.0, 2.0, 632.456, 1e-3),
])
def test_txsnr_to_budget(txsnr, noise, expected, tol):
    assert txsnr_to_budget(txsnr, noise) == pytest.approx(expected, abs=tol)


def test_txsnr_to_budget_rejects_bad_noise():
    with pytest.raises(ValueError):
        txsnr_to_budget(0.0, 0.0)


def test_dbm_to_watts():
    assert dbm_to_watts(40) == pytest.approx(10.0)
    assert dbm_to_watts(10) == pytest.approx(0.01)
    assert dbm_to_watts(5) == pytest.approx(0.0031623, rel=1e-4)


def test_generate_channels_shape():
    ch = generate_channels(SystemConfig())
    assert ch.h.shape == (3, 3)
    assert np.all(np.isfinite(ch.h))


def test_generate_channels_deterministic():
    cfg = SystemConfig(seed=42)
    a, b = generate_channels(cfg), generate_channels(cfg)
    assert np.array_equal(a.h, b.h) and a == b


def test_trials_give_independent_streams():
    cfg = SystemConfig(seed=42)
    assert not np.array_equal(generate_channels(cfg, 0).h, generate_channels(cfg, 1).h)
    assert np.array_equal(trial_rng(7, 3).standard_normal(4), trial_rng(7, 3).standard_normal(4))


def test_path_loss_scaling_with_identical_fading():
    g = np.array([[1.0 + 0j], [1.0 + 0j]])
    ch = channels_from_fading(g, (1.0, 4.0), kappa=2.0)
    assert np.allclose(ch.h[:, 0], [1.0, 0.25])


def test_path_loss_monotone_in_distance():
    g = np.ones((3, 2), complex)
    ch = channels_from_fading(g, (1.0, 2.0, 3.0), kappa=1.5)
    assert np.all(np.diff(ch.gains) < 0)
    assert ch.order == (0, 1, 2)


def test_rayleigh_entries_unit_variance():
    cfg = SystemConfig(num_users=1, distances=(1.0,), min_sinr=0.0, num_antennas=4000, seed=3)
    h = generate_channels(cfg).h.ravel()
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.08
    assert abs(np.mean(h)) < 0.05


def test_order_users_sorts_by_norm():
    ch = order_users([[1.0], [np.sqrt(3)], [np.sqrt(2)]])
    assert ch.order == (1, 2, 0)


def test_order_users_identity_and_ties():
    assert order_users([[3.0], [2.0], [1.0]]).order == (0, 1, 2)
    assert order_users([[np.sqrt(2)], [1j * np.sqrt(2)]]).order == (0, 1)


@pytest.mark.parametrize("bad", [[], [[1.0, 2.0], [1.0]]])
def test_order_users_errors(bad):
    with pytest.raises(ValueError):
        order_users(bad)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False,
                                            allow_infinity=False), min_size=2, max_size=2),
                min_size=1, max_size=5))
def test_ordering_idempotent_and_sorted(raw):
    once = order_users(raw)
    twice = order_users(once.h)
    assert np.array_equal(once.h, twice.h)
    assert twice.order == tuple(range(len(raw)))
    assert np.all(np.diff(once.gains) <= 0)


def test_channel_set_is_read_only():
    ch = generate_channels(SystemConfig())
    with pytest.raises(ValueError):
        ch.h[0, 0] = 0


def test_channel_dump_round_trip():
    ch = generate_channels(SystemConfig(seed=5), trial=2)
    back = loads_channels(dumps_channels(ch))
    assert np.array_equal(back.h, ch.h)
    assert back == ch
    assert back.seed == 5 and back.path_loss_exponent == 1.0


def test_channel_dump_has_one_record_per_user():
    text = dumps_channels(generate_channels(SystemConfig()))
    records = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert len(records) == 3
    assert all(len(r.split()) == 2 + 3 for r in records)


def test_beam_dump_round_trip():
    w = np.array([[1 + 2j, -0.5j], [1e-300, np.pi]])
    assert np.array_equal(loads_beams(dumps_beams(w)), w)


def test_malformed_files_raise():
    with pytest.raises(ValueError):
        loads_channels("# nothing\n")
    with pytest.raises(ValueError):
        loads_beams("0 1,0\n1 1,0 2,0\n")
    with pytest.raises(ValueError):
        ChannelSet(h=np.array([[np.inf]]), order=(0,))
