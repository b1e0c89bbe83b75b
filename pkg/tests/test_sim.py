import math
from dataclasses import replace

import numpy as np
import pytest

from majorcom.core import Codebook, SystemConfig
from majorcom.sim import (BerRecord, ExperimentSpec, ber_csv, builtin_config_path,
                          distance_scatter, load_spec, rate_csv, read_ber_csv, run_ber,
                          run_codebook_study, run_rate, spec_from_mapping)


@pytest.fixture
def small_spec():
    return replace(load_spec("ber"), trials=1500, block_size=500, snr_db=(-12.0, -6.0))


def test_packaged_configs_load():
    rate = load_spec("rate")
    assert rate.system.n_carriers == 10 and rate.channel_model == "spatial_decay"
    assert rate.system.steer_angle == pytest.approx(math.pi / 4)
    assert rate.system.spacing == pytest.approx(10 * 299_792_458.0 / 1.9e9)
    ber = load_spec("ber")
    assert ber.system.n_samples == 70 and ber.trials == 100_000
    study = load_spec("codebook")
    assert study.n_b == (2, 8, 32) and study.known_frequency
    assert builtin_config_path("ber").exists()


def test_config_errors(tmp_path):
    with pytest.raises(ValueError):
        spec_from_mapping({"system": {"n_tx": 6, "bogus": 1}})
    with pytest.raises(ValueError):
        spec_from_mapping({"experiment": {"decoders": ["sphere"]}})
    with pytest.raises(ValueError):
        spec_from_mapping({"experiment": {"trials": 0}})
    with pytest.raises(ValueError):
        spec_from_mapping({"experiment": {"snr_db": []}})
    with pytest.raises(ValueError):
        spec_from_mapping({"channel": {"model": "explicit"}})
    with pytest.raises(ValueError):
        spec_from_mapping({"system": {"steer_angle": 0.1, "steer_angle_deg": 3.0}})


def test_explicit_channel_file(tmp_path):
    from majorcom.channel import write_channel_csv
    write_channel_csv(tmp_path / "h.csv", np.ones((4, 6)))
    (tmp_path / "exp.toml").write_text(
        '[system]\nn_samples = 70\n[channel]\nmodel = "explicit"\nfile = "h.csv"\n')
    spec = load_spec(tmp_path / "exp.toml")
    np.testing.assert_array_equal(spec.channel().h, np.ones((4, 6)))


def test_bit_accounting_and_determinism(small_spec):
    a = run_ber(small_spec)
    b = run_ber(small_spec)
    assert [r.bits_total for r in a] == [1500 * 8] * len(a)
    assert ber_csv(a) == ber_csv(b)
    for r in a:
        assert r.ber == r.bit_errors / r.bits_total
        assert 0 <= r.ber <= 1


def test_worker_count_does_not_change_results(small_spec):
    assert ber_csv(run_ber(small_spec, threads=1)) == ber_csv(run_ber(small_spec, threads=2))


def test_high_snr_is_error_free():
    spec = replace(load_spec("ber"), trials=10_000, snr_db=(60.0,))
    assert all(r.bit_errors == 0 for r in run_ber(spec))


def test_ber_decreases_with_snr(small_spec):
    spec = replace(small_spec, snr_db=(-14.0, -12.0, -10.0))
    records = run_ber(spec)
    for name in spec.decoders:
        values = [r.bit_errors for r in records if r.decoder == name]
        assert values == sorted(values, reverse=True)


def test_fixed_channel_mode(small_spec):
    spec = replace(small_spec, channel_redraw="fixed", decoders=("ml",))
    assert len(run_ber(spec)) == 2


def test_known_frequency_requires_noniter(small_spec):
    with pytest.raises(ValueError):
        run_ber(replace(small_spec, known_frequency=True, decoders=("ml",)))


def test_codebook_study_columns():
    spec = replace(load_spec("codebook"), trials=1000, snr_db=(-16.0,), n_b=(2, 8))
    records = run_codebook_study(spec)
    assert [(r.n_b, r.bits_per_symbol) for r in records] == [(2, 5), (8, 7)]
    assert all(r.bits_total == 1000 * r.bits_per_symbol for r in records)


def test_distance_scatter_rows():
    pairs = distance_scatter(load_spec("codebook"))
    assert len(pairs) == 69
    assert all(p.dist > 0 and p.h_dist > 0 for p in pairs)


def test_rate_run(tmp_path):
    spec = replace(load_spec("rate"), snr_db=(0.0, 30.0))
    rows = run_rate(spec)
    assert rows[0].upper_bound == pytest.approx(math.log2(270))
    assert rows[0].baselines[0] < rows[0].baselines[1]
    text = rate_csv(rows, spec.baselines, tmp_path / "r.csv")
    assert text.splitlines()[0] == "# majorcom rate v1"
    assert (tmp_path / "r.csv").read_text() == text


def test_csv_round_trip(tmp_path, small_spec):
    records = run_ber(replace(small_spec, decoders=("ml",)))
    ber_csv(records, tmp_path / "b.csv")
    rows = read_ber_csv(tmp_path / "b.csv")
    assert [int(r["bit_errors"]) for r in rows] == [r.bit_errors for r in records]
    assert "wall_time" not in rows[0]
    assert "wall_time" in ber_csv(records, include_timing=True)


def test_record_validation():
    with pytest.raises(ValueError):
        BerRecord(0.0, "ml", 5, 4, 0, 1)
