"""Synthetic PV plant and weather generator.

Irradiance follows a bell between sunrise and sunset, shaped per day class
(mild ripple, deep passing dips, or heavy persistent attenuation), then scaled
so the day's clearness index hits a target drawn inside the class band.
Weather curves and PV power are derived from it. Every curve is evaluated in
continuous time, so a seed yields the same weather at any resolution.
"""

import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np

from . import sky
from .dataio import FIELDS, Dataset, SampleRecord
from .errors import ConfigError, GenerationError
from .sky import DayKind, SiteGeometry

# Seasonal composition targets per 30-day window (clear, partial, cloudy).
REFERENCE_COMPOSITION = (
    (81, 16, 3), (71, 26, 3), (87, 6, 7), (80, 16, 4),
    (77, 12, 11), (60, 26, 14), (77, 11, 12), (67, 22, 11),
    (77, 20, 3), (87, 13, 0), (87, 10, 3), (90, 6, 4),
)

DEFAULT_CLOUD_MODEL = {
    "clear_kt": (0.52, 0.72),
    "partial_kt": (0.30, 0.42),
    "cloudy_kt": (0.10, 0.21),
    "clear_ripple": 0.03,
    "partial_dips": (4, 10),
    "partial_depth": (0.5, 0.9),
    "cloudy_level": (0.25, 0.4),
    "reference_kt": 0.70,
    "sensor_noise": 0.005,
}

MAX_ATTEMPTS = 5


@dataclass(frozen=True)
class PlantParams:
    p_stc: float = 300.0
    gamma: float = 0.004
    noct: float = 45.0
    n_series: int = 20
    n_parallel: int = 200

    def __post_init__(self):
        if self.p_stc <= 0:
            raise ConfigError("p_stc must be positive")
        if not 0.0 < self.gamma < 0.01:
            raise ConfigError("gamma must be in (0, 0.01)")
        if self.n_series < 1 or self.n_parallel < 1:
            raise ConfigError("array counts must be >= 1")

    @property
    def rated_kw(self):
        return self.p_stc * self.n_series * self.n_parallel / 1000.0


@dataclass(frozen=True)
class SynthConfig:
    site: SiteGeometry = field(default_factory=SiteGeometry)
    plant: PlantParams = field(default_factory=PlantParams)
    composition_targets: tuple = REFERENCE_COMPOSITION
    resolution_minutes: int = 15
    seed: int = 0
    start_date: str = "2014-01-01"
    n_days: int = 360
    window_days: int = 30
    daylight_window: tuple = (7, 17)
    cloud_model: dict = field(default_factory=lambda: dict(DEFAULT_CLOUD_MODEL))

    def __post_init__(self):
        for row in self.composition_targets:
            if len(row) != 3 or abs(sum(row) - 100.0) > 1e-9 or min(row) < 0:
                raise ConfigError(f"composition {row} must be three shares summing to 100")
        if 1440 % self.resolution_minutes:
            raise ConfigError("resolution must divide a day")
        unknown = set(self.cloud_model) - set(DEFAULT_CLOUD_MODEL)
        if unknown:
            raise ConfigError(f"unknown cloud model keys {sorted(unknown)}")
        object.__setattr__(self, "cloud_model", {**DEFAULT_CLOUD_MODEL, **self.cloud_model})


def cell_temperature(t_amb, irradiance, noct=45.0):
    """NOCT cell temperature model, degC."""
    t = np.asarray(t_amb) + (np.asarray(irradiance) / 800.0) * (noct - 20.0)
    return float(t) if np.ndim(t) == 0 else t


def pv_power(irradiance, cell_temp, plant):
    """Array output in W, floored at zero."""
    p = (plant.p_stc * (np.asarray(irradiance) / 1000.0)
         * (1.0 - plant.gamma * (np.asarray(cell_temp) - 25.0))
         * plant.n_series * plant.n_parallel)
    p = np.maximum(p, 0.0)
    return float(p) if np.ndim(p) == 0 else p


def day_of_year(date):
    return min(date.timetuple().tm_yday, 365)


def _smooth_noise(rng, hours, n_terms=4, min_period=1.0, max_period=6.0):
    """Zero-mean, unit-ish random smooth curve built from a few sinusoids."""
    periods = rng.uniform(min_period, max_period, n_terms)
    phases = rng.uniform(0.0, 2.0 * math.pi, n_terms)
    amps = rng.normal(0.0, 1.0, n_terms) / math.sqrt(n_terms)
    return sum(a * np.sin(2.0 * math.pi * hours / p + ph)
               for a, p, ph in zip(amps, periods, phases))


def _bell(hours, sunrise, sunset):
    x = (hours - sunrise) / (sunset - sunrise)
    inside = (x > 0.0) & (x < 1.0)
    return np.where(inside, np.sin(np.pi * np.clip(x, 0.0, 1.0)) ** 1.3, 0.0)


def _attenuation(kind, rng, hours, sunrise, sunset, cm):
    if kind is DayKind.CLEAR:
        return 1.0 + cm["clear_ripple"] * _smooth_noise(rng, hours)
    if kind is DayKind.PARTIAL:
        att = np.ones_like(hours)
        n = rng.integers(cm["partial_dips"][0], cm["partial_dips"][1] + 1)
        centres = rng.uniform(sunrise + 0.5, sunset - 0.5, n)
        depths = rng.uniform(*cm["partial_depth"], n)
        widths = rng.uniform(0.15, 0.6, n)
        for c, d, w in zip(centres, depths, widths):
            att *= 1.0 - d * np.exp(-0.5 * ((hours - c) / w) ** 2)
        return att * (1.0 + 0.03 * _smooth_noise(rng, hours))
    level = rng.uniform(*cm["cloudy_level"])
    return level * (1.0 + 0.3 * _smooth_noise(rng, hours, min_period=0.5, max_period=3.0))


def _kt_band(kind, cm):
    return {DayKind.CLEAR: cm["clear_kt"], DayKind.PARTIAL: cm["partial_kt"],
            DayKind.CLOUDY: cm["cloudy_kt"]}[kind]


def _day_arrays(date, kind, config, rng):
    cm = config.cloud_model
    res = config.resolution_minutes
    n = 1440 // res
    hours = np.arange(n) * (res / 60.0)
    N = day_of_year(date)
    dec = sky.declination(N)
    half = math.degrees(sky.sunrise_hour_angle(config.site.latitude_deg, dec)) / 15.0
    sunrise, sunset = 12.0 - half, 12.0 + half
    h0 = sky.extraterrestrial_insolation(N, config.site)

    bell = _bell(hours, sunrise, sunset)
    shape = bell * np.clip(_attenuation(kind, rng, hours, sunrise, sunset, cm), 0.02, None)
    target_kt = rng.uniform(*_kt_band(kind, cm))
    unit = sky.daily_insolation(shape, res)
    ghi = shape * (target_kt * h0 / unit)
    clear_ref = bell * (cm["reference_kt"] * h0 / sky.daily_insolation(bell, res))

    season = math.cos(2.0 * math.pi * (N - 15) / 365.0)  # +1 mid-summer (south)
    diurnal = np.sin(2.0 * math.pi * (hours - 8.0) / 24.0)
    swing = {DayKind.CLEAR: 5.0, DayKind.PARTIAL: 4.0, DayKind.CLOUDY: 2.5}[kind]
    temp = 21.0 + 4.5 * season + swing * diurnal + 0.8 * _smooth_noise(rng, hours)
    wind = np.maximum(0.0, 2.5 + 1.2 * diurnal + 0.6 * _smooth_noise(rng, hours))
    wet = {DayKind.CLEAR: 0.0, DayKind.PARTIAL: 8.0, DayKind.CLOUDY: 18.0}[kind]
    hum = np.clip(65.0 + wet - 15.0 * diurnal + 4.0 * _smooth_noise(rng, hours), 5.0, 100.0)

    tcell = cell_temperature(temp, ghi, config.plant.noct)
    pv = pv_power(ghi, tcell, config.plant) / 1000.0
    pv = pv * (1.0 + cm["sensor_noise"] * rng.standard_normal(n))
    start, end = config.daylight_window
    night = (hours < start) | (hours >= end)
    pv = np.where(night | (ghi <= 0.0), 0.0, np.maximum(pv, 0.0))
    return {"hours": hours, "irradiance": ghi, "temperature": temp, "wind_speed": wind,
            "humidity": hum, "pv_power": pv, "h0": h0, "clear_ref": clear_ref}


def _check_day(arrays, kind, config):
    kt = sky.classify_day(sky.daily_insolation(arrays["irradiance"], config.resolution_minutes),
                          arrays["h0"])
    if kt.kind is not kind:
        return False
    if kind is DayKind.CLOUDY and arrays["irradiance"].max() >= 0.5 * arrays["clear_ref"].max():
        return False
    return True


def _day_rng(config, day_index, attempt):
    return np.random.default_rng(np.random.SeedSequence([config.seed, 1, day_index, attempt]))


def _generate(date, kind, config, day_index):
    for attempt in range(MAX_ATTEMPTS):
        arrays = _day_arrays(date, kind, config, _day_rng(config, day_index, attempt))
        if _check_day(arrays, kind, config):
            return arrays
    raise GenerationError(f"could not realize a {kind.value} day on {date} "
                          f"in {MAX_ATTEMPTS} attempts")


def generate_day(date, day_kind, config, day_index=0):
    """One day of records at the configured resolution."""
    if isinstance(date, str):
        date = dt.date.fromisoformat(date)
    kind = DayKind(day_kind)
    arrays = _generate(date, kind, config, day_index)
    base = dt.datetime(date.year, date.month, date.day)
    step = dt.timedelta(minutes=config.resolution_minutes)
    return [SampleRecord(base + i * step, **{f: float(arrays[f][i]) for f in FIELDS})
            for i in range(len(arrays["hours"]))]


def window_kinds(targets, window_days, rng):
    """Day kinds for one window: largest-remainder counts, seeded order."""
    quotas = [p * window_days / 100.0 for p in targets]
    counts = [int(math.floor(q)) for q in quotas]
    short = window_days - sum(counts)
    order = sorted(range(3), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    kinds = ([DayKind.CLEAR] * counts[0] + [DayKind.PARTIAL] * counts[1]
             + [DayKind.CLOUDY] * counts[2])
    return [kinds[i] for i in rng.permutation(window_days)]


def day_plan(config):
    """(date, kind) for every generated day."""
    start = dt.date.fromisoformat(config.start_date)
    n_windows = math.ceil(config.n_days / config.window_days)
    if len(config.composition_targets) < n_windows:
        raise ConfigError(f"need {n_windows} composition windows, "
                          f"got {len(config.composition_targets)}")
    kinds = []
    for w in range(n_windows):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2, w]))
        kinds.extend(window_kinds(config.composition_targets[w], config.window_days, rng))
    return [(start + dt.timedelta(days=i), kinds[i]) for i in range(config.n_days)]


def generate_year(config=None):
    """Full synthetic dataset following the composition targets window by window."""
    config = config or SynthConfig()
    plan = day_plan(config)
    cols = {f: [] for f in FIELDS}
    for i, (date, kind) in enumerate(plan):
        arrays = _generate(date, kind, config, i)
        for f in FIELDS:
            cols[f].append(arrays[f])
    start = np.datetime64(plan[0][0].isoformat(), "m")
    n = config.n_days * (1440 // config.resolution_minutes)
    ts = start + np.arange(n) * np.timedelta64(config.resolution_minutes, "m")
    return Dataset(ts, {f: np.concatenate(cols[f]) for f in FIELDS},
                   config.resolution_minutes, config.daylight_window)


def classify_dataset(dataset, site):
    """[(date, DayClass)] from each day's integrated irradiance."""
    dates, m = dataset.day_matrix("irradiance")
    out = []
    for d, row in zip(dates, m):
        date = d.astype(dt.date)
        h0 = sky.extraterrestrial_insolation(day_of_year(date), site)
        out.append((date, sky.classify_day(
            sky.daily_insolation(row, dataset.resolution_minutes), h0)))
    return out
