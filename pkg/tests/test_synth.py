import datetime as dt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pvnne import synth
from pvnne.errors import ConfigError, GenerationError
from pvnne.sky import DayKind, SiteGeometry


def test_cell_temperature_values():
    assert synth.cell_temperature(25.0, 1000.0, 45.0) == 56.25
    assert synth.cell_temperature(10.0, 800.0, 45.0) == 35.0


def test_pv_power_values():
    single = synth.PlantParams(300.0, 0.004, 45.0, 1, 1)
    assert synth.pv_power(800.0, 56.25, single) == pytest.approx(210.0, abs=1e-12)
    assert synth.pv_power(0.0, 25.0, single) == 0.0
    assert synth.pv_power(1000.0, 25.0, synth.PlantParams()) == pytest.approx(1.2e6)
    assert synth.PlantParams().rated_kw == 1200.0


@given(g=st.floats(0, 1400), t=st.floats(-10, 45))
def test_pv_power_non_negative_and_scaled(g, t):
    one = synth.PlantParams(n_series=1, n_parallel=1)
    many = synth.PlantParams(n_series=4, n_parallel=3)
    a = synth.pv_power(g, t, one)
    assert a >= 0
    assert synth.pv_power(g, t, many) == pytest.approx(12 * a)


def test_day_of_year_clamps_leap_day():
    assert synth.day_of_year(dt.date(2016, 12, 31)) == 365
    assert synth.day_of_year(dt.date(2014, 2, 1)) == 32


@given(a=st.integers(0, 100), b=st.integers(0, 100), seed=st.integers(0, 1000))
def test_window_kinds_counts(a, b, seed):
    if a + b > 100:
        return
    targets = (a, b, 100 - a - b)
    kinds = synth.window_kinds(targets, 30, np.random.default_rng(seed))
    assert len(kinds) == 30
    counts = [kinds.count(k) for k in DayKind]
    for c, p in zip(counts, targets):
        assert abs(c - p * 30 / 100) < 1


def test_year_shape(year):
    assert len(year) == 360 * 96
    assert year.resolution_minutes == 15
    assert str(year.timestamps[0]) == "2014-01-01T00:00"
    assert set(year.values) == set(synth.FIELDS)
    assert all(np.all(np.isfinite(v)) for v in year.values.values())


def test_every_day_classifies_as_planned(year):
    plan = synth.day_plan(synth.SynthConfig(seed=1))
    got = synth.classify_dataset(year, SiteGeometry())
    assert [c.kind for _, c in got] == [k for _, k in plan]
    assert [d for d, _ in got] == [d for d, _ in plan]


def test_window_composition_matches_targets(year):
    got = [c.kind for _, c in synth.classify_dataset(year, SiteGeometry())]
    for w, targets in enumerate(synth.REFERENCE_COMPOSITION):
        chunk = got[30 * w:30 * (w + 1)]
        for kind, pct in zip(DayKind, targets):
            assert abs(chunk.count(kind) - pct * 30 / 100) <= 1


def test_physical_bounds(year):
    pv = year.values["pv_power"]
    ghi = year.values["irradiance"]
    hours = year.minute_of_day() / 60.0
    assert np.all(pv >= 0) and np.all(ghi >= 0)
    assert np.all(pv[(hours < 7) | (hours >= 17)] == 0)
    assert pv.max() < 1.1 * synth.PlantParams().rated_kw
    assert np.all(ghi < 1400)
    assert np.all((year.values["humidity"] >= 5) & (year.values["humidity"] <= 100))
    assert np.all(year.values["wind_speed"] >= 0)


def test_cloudy_days_are_dim(year):
    cfg = synth.SynthConfig(seed=1)
    plan = synth.day_plan(cfg)
    _, m = year.day_matrix("irradiance")
    _, pv = year.day_matrix("pv_power")
    clear_peak = np.median([m[i].max() for i, (_, k) in enumerate(plan) if k is DayKind.CLEAR])
    cloudy = [i for i, (_, k) in enumerate(plan) if k is DayKind.CLOUDY]
    assert cloudy and all(m[i].max() < 0.6 * clear_peak for i in cloudy)


def test_deterministic_and_seed_sensitive(year):
    again = synth.generate_year(synth.SynthConfig(seed=1))
    assert again == year
    other = synth.generate_year(synth.SynthConfig(seed=2, n_days=30))
    assert not np.array_equal(other.values["pv_power"], year.values["pv_power"][:30 * 96])


def test_resolution_consistency():
    coarse = synth.generate_year(synth.SynthConfig(seed=3, n_days=30, resolution_minutes=60))
    assert len(coarse) == 30 * 24
    fine = synth.generate_year(synth.SynthConfig(seed=3, n_days=30, resolution_minutes=1))
    assert len(fine) == 30 * 1440


def test_generate_day_records():
    recs = synth.generate_day("2014-06-01", DayKind.CLOUDY, synth.SynthConfig(), day_index=7)
    assert len(recs) == 96
    assert recs[0].timestamp == dt.datetime(2014, 6, 1)
    assert recs[1].timestamp - recs[0].timestamp == dt.timedelta(minutes=15)


def test_generation_error_when_band_unreachable():
    cfg = synth.SynthConfig(cloud_model={"cloudy_kt": (0.6, 0.7)})
    with pytest.raises(GenerationError):
        synth.generate_day("2014-03-01", DayKind.CLOUDY, cfg)


def test_config_validation():
    with pytest.raises(ConfigError):
        synth.SynthConfig(composition_targets=((50, 40, 5),))
    with pytest.raises(ConfigError):
        synth.SynthConfig(resolution_minutes=7)
    with pytest.raises(ConfigError):
        synth.SynthConfig(cloud_model={"fog": 1})
    with pytest.raises(ConfigError):
        synth.PlantParams(gamma=0.5)
    with pytest.raises(ConfigError):
        synth.day_plan(synth.SynthConfig(n_days=400))


@given(t=st.floats(-20, 50))
def test_dark_module(t):
    plant = synth.PlantParams(n_series=1, n_parallel=1)
    assert synth.cell_temperature(t, 0.0) == t
    assert synth.pv_power(0.0, synth.cell_temperature(t, 0.0), plant) == 0.0


def test_standard_test_conditions():
    plant = synth.PlantParams(n_series=1, n_parallel=1)
    assert synth.pv_power(1000.0, 25.0, plant) == 300.0


def test_all_clear_targets():
    cfg = synth.SynthConfig(seed=4, n_days=60, composition_targets=((100, 0, 0),) * 2)
    ds = synth.generate_year(cfg)
    assert all(c.kind is DayKind.CLEAR for _, c in synth.classify_dataset(ds, cfg.site))


def test_seeds_change_weather_not_counts():
    a_cfg, b_cfg = synth.SynthConfig(seed=5, n_days=30), synth.SynthConfig(seed=6, n_days=30)
    a, b = synth.generate_year(a_cfg), synth.generate_year(b_cfg)
    assert not np.array_equal(a.values["temperature"], b.values["temperature"])
    count = lambda ds, cfg: sorted(c.kind.value for _, c in synth.classify_dataset(ds, cfg.site))
    assert count(a, a_cfg) == count(b, b_cfg)
