"""Forecast accuracy metrics and the six-model seasonal benchmark.

Models: M1 previous-day persistence, M2 single BP network, M3 single PSO
network, M4 wavelet + BP network, M5 wavelet + PSO network, M6 the full
wavelet ensemble with trimmed aggregation. Errors are normalized by the
plant's rated peak and evaluated over daylight steps.
"""

import csv
import io
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import dataio, ensemble as ens, wavelet
from .errors import (DegenerateVarianceError, GapError, NormalizationError, PvnneError,
                     ShapeError)
from .sky import DayKind, SiteGeometry
from .synth import classify_dataset

logger = logging.getLogger(__name__)

MODELS = ("M1", "M2", "M3", "M4", "M5", "M6")
MODEL_NAMES = {
    "M1": "Persistence", "M2": "BPNN", "M3": "FNN+PSO",
    "M4": "WT+BPNN", "M5": "WT+FNN+PSO", "M6": "WT+NNE",
}
SEASONS = ("Su", "Au", "W", "Sp")
KIND_ORDER = (DayKind.CLEAR, DayKind.PARTIAL, DayKind.CLOUDY)


# --- metrics ---------------------------------------------------------------------

def _pair(actual, forecast, peak, horizon=None):
    a = np.asarray(actual, dtype=np.float64).ravel()
    f = np.asarray(forecast, dtype=np.float64).ravel()
    if a.shape != f.shape:
        raise ShapeError(f"actual has {a.size} steps, forecast {f.size}")
    if horizon is not None and a.size != horizon:
        raise ShapeError(f"series length {a.size} != horizon {horizon}")
    if a.size == 0:
        raise ShapeError("empty series")
    if peak is not None and not peak > 0:
        raise NormalizationError(f"peak power must be positive, got {peak}")
    return a, f


def mape(actual, forecast, peak, horizon=None):
    """Peak-normalized mean absolute error in percent."""
    a, f = _pair(actual, forecast, peak, horizon)
    return 100.0 * math.fsum(np.abs(a - f) / peak) / a.size


def error_variance(actual, forecast, peak, horizon=None):
    """Population variance of the peak-normalized errors (fractions)."""
    a, f = _pair(actual, forecast, peak, horizon)
    e = (a - f) / peak
    m = math.fsum(e) / e.size
    return math.fsum((e - m) ** 2) / e.size


def r_squared(actual, forecast):
    a, f = _pair(actual, forecast, None)
    if a.size < 2:
        raise ShapeError("need at least two samples")
    m = math.fsum(a) / a.size
    ss_tot = math.fsum((a - m) ** 2)
    if ss_tot == 0.0:
        raise DegenerateVarianceError("actual series is constant")
    return 1.0 - math.fsum((a - f) ** 2) / ss_tot


@dataclass
class MetricReport:
    mape_pct: float
    error_variance: float
    r_squared: float
    horizon: int
    peak_power: float


def evaluate(actual, forecast, peak):
    a, f = _pair(actual, forecast, peak)
    try:
        r2 = r_squared(a, f)
    except DegenerateVarianceError:
        r2 = float("nan")
    return MetricReport(mape(a, f, peak), error_variance(a, f, peak), r2, a.size, peak)


def persistence_forecast(history, target_day):
    """Yesterday's daylight profile as the forecast for ``target_day``."""
    prev = np.datetime64(target_day, "D") - np.timedelta64(1, "D")
    prof = dataio.daylight_profiles(history, "pv_power").get(prev)
    if prof is None or np.isnan(prof).any():
        raise GapError(f"previous day {prev} missing or incomplete", day=str(prev))
    return prof.copy()


# --- benchmark ---------------------------------------------------------------------

def season_of(doy):
    """Southern-hemisphere season tag for a day of year."""
    if doy <= 59 or doy >= 335:
        return "Su"
    if doy <= 151:
        return "Au"
    if doy <= 243:
        return "W"
    return "Sp"


@dataclass(frozen=True)
class BenchmarkConfig:
    train_days: int = 30
    validation_days: int = 5
    lags: tuple = (1, 2)
    wavelet_spec: wavelet.WaveletSpec = field(default_factory=wavelet.WaveletSpec)
    extension: str = "symmetric"
    ensemble: ens.EnsembleConfig = field(default_factory=ens.EnsembleConfig)
    trainers: ens.TrainerConfig = field(default_factory=ens.TrainerConfig)
    baseline_hidden: int = 20
    peak_power: float = 1200.0
    site: SiteGeometry = field(default_factory=SiteGeometry)
    seed: int = 0
    jobs: int = 1
    models: tuple = MODELS


@dataclass
class TestDay:
    season: str
    kind: DayKind
    day: str


@dataclass
class BenchmarkRow:
    season: str
    day_kind: DayKind
    day: str
    mape: dict = field(default_factory=dict)
    variance: dict = field(default_factory=dict)
    r2: dict = field(default_factory=dict)
    member_mape: float = float("nan")
    failures: dict = field(default_factory=dict)


@dataclass
class BenchmarkResult:
    rows: list
    seed: int = 0
    alphas: dict = field(default_factory=dict)

    def averages(self):
        out = {}
        for m in MODELS:
            vals = [r.mape[m] for r in self.rows if r.mape.get(m) is not None]
            out[m] = float(np.mean(vals)) if vals else None
        return out

    def member_average(self):
        vals = [r.member_mape for r in self.rows if not math.isnan(r.member_mape)]
        return float(np.mean(vals)) if vals else None

    def variances(self):
        return {f"{r.season}-{r.day_kind.short}": dict(r.variance) for r in self.rows}

    def table_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["season", "day"] + list(MODELS))
        for r in self.rows:
            w.writerow([r.season, r.day_kind.short]
                       + [_fmt(r.mape.get(m)) if m not in r.failures else "failed"
                          for m in MODELS])
        avg = self.averages()
        w.writerow(["Average", ""] + [_fmt(avg[m]) for m in MODELS])
        return buf.getvalue()

    def long_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", "season", "kind", "date", "model", "metric", "value"])
        for r in self.rows:
            for m in MODELS:
                for name, table in (("mape_pct", r.mape), ("error_variance", r.variance),
                                    ("r_squared", r.r2)):
                    if table.get(m) is not None:
                        w.writerow([self.seed, r.season, r.day_kind.short, r.day, m, name,
                                    _fmt(table[m])])
        return buf.getvalue()

    def summary(self):
        return {
            "seed": self.seed,
            "models": MODEL_NAMES,
            "average_mape": self.averages(),
            "m6_member_average_mape": self.member_average(),
            "alpha": self.alphas,
            "rows": [{
                "season": r.season, "kind": r.day_kind.short, "date": r.day,
                "mape": r.mape, "error_variance": r.variance, "r_squared": r.r2,
                "m6_member_mape": None if math.isnan(r.member_mape) else r.member_mape,
                "failures": r.failures,
            } for r in self.rows],
        }


def _fmt(v):
    return "" if v is None else "%.6f" % v


def select_test_days(dataset, site, min_history):
    """Last day of each kind in each season with at least ``min_history`` prior days."""
    classes = classify_dataset(dataset, site)
    first = classes[0][0]
    picks = {}
    for date, c in classes:
        if (date - first).days < min_history:
            continue
        doy = min(date.timetuple().tm_yday, 365)
        picks[(season_of(doy), c.kind)] = date
    out = []
    for s in SEASONS:
        for k in KIND_ORDER:
            if (s, k) in picks:
                out.append(TestDay(s, k, picks[(s, k)].isoformat()))
    return out


def _single_config(trainer, seed, hidden):
    return ens.EnsembleConfig(n_structures=1, models_per_structure=1, hidden_schedule=(hidden,),
                              trainer_split={1: trainer}, alpha_candidates=(0,),
                              base_seed=seed)


def train_window(dataset, first_day, n_days, ensemble_config, bcfg, spec):
    """Train an ensemble on the ``n_days`` target days starting at ``first_day``."""
    days = [np.datetime64(first_day, "D") + np.timedelta64(i, "D") for i in range(n_days)]
    history = dataset.select_days(days[0] - np.timedelta64(max(bcfg.lags), "D"), days[-1])
    skeleton = ens.build_ensemble(ensemble_config, spec, bcfg.lags, bcfg.extension)
    comps = ens.history_components(skeleton, history, history.dates())
    pats = dataio.build_patterns(history, comps, bcfg.lags, days)
    return ens.train_ensemble(skeleton, pats, bcfg.trainers, jobs=bcfg.jobs)


def forecast_with(model, dataset, day):
    """Day-ahead forecast using the dataset's history and the day's weather rows."""
    day = np.datetime64(day, "D")
    hist = dataset.select_days(dataset.dates()[0], day - np.timedelta64(1, "D"))
    return ens.forecast_day(model, hist, ens.met_rows(dataset, day), day)


def window_for(first_test_day, bcfg, train_days=None):
    """(train_start, validation_days) ending the day before ``first_test_day``."""
    first_test = np.datetime64(first_test_day, "D")
    val_start = first_test - np.timedelta64(bcfg.validation_days, "D")
    train_start = val_start - np.timedelta64(train_days or bcfg.train_days, "D")
    vdays = [val_start + np.timedelta64(i, "D") for i in range(bcfg.validation_days)]
    return train_start, vdays


def fit_nne(dataset, first_test_day, bcfg, seed=None, train_days=None):
    """Train the full ensemble before ``first_test_day`` and pick alpha on validation days."""
    cfg = bcfg.ensemble if seed is None else replace(bcfg.ensemble, base_seed=seed)
    n = train_days or bcfg.train_days
    train_start, vdays = window_for(first_test_day, bcfg, n)
    model = train_window(dataset, train_start, n, cfg, bcfg, bcfg.wavelet_spec)
    profiles = dataio.daylight_profiles(dataset, "pv_power")
    if vdays:
        mats = [forecast_with(model, dataset, d).members for d in vdays]
        acts = [profiles[d] for d in vdays]
        model.alpha = ens.select_alpha(mats, acts, bcfg.peak_power,
                                       model.config.alpha_candidates)
    else:
        model.alpha = min(model.config.alpha_candidates)
    return model


def run_benchmarks(dataset, test_days=None, config=None, forecasters=None):
    """Train per season group and score the six models on every test day.

    Each season group is trained once on ``train_days`` days ending just
    before its validation days, which end the day before the group's earliest
    test day. ``forecasters`` maps a model tag to ``f(dataset, day) -> profile``
    and overrides the built-in model (useful for stubs).
    """
    config = config or BenchmarkConfig()
    forecasters = forecasters or {}
    need = config.train_days + config.validation_days + max(config.lags)
    if test_days is None:
        test_days = select_test_days(dataset, config.site, need)
    peak = config.peak_power
    profiles = dataio.daylight_profiles(dataset, "pv_power")
    rows = [BenchmarkRow(t.season, t.kind, t.day) for t in test_days]
    alphas = {}
    groups = {}
    for r in rows:
        groups.setdefault(r.season, []).append(r)
    ss = np.random.SeedSequence(config.seed)
    for season in SEASONS:
        grp = groups.get(season)
        if not grp:
            continue
        first_test = min(np.datetime64(r.day, "D") for r in grp)
        train_start, _ = window_for(first_test, config)
        gseed = int(ss.spawn(1)[0].generate_state(1)[0])

        for tag in config.models:
            try:
                if tag in forecasters:
                    fc_fn = forecasters[tag]
                elif tag == "M1":
                    fc_fn = lambda ds, d: persistence_forecast(ds, d)  # noqa: E731
                else:
                    if tag == "M6":
                        model = fit_nne(dataset, first_test, config, seed=gseed)
                        alphas[season] = model.alpha
                    else:
                        spec = config.wavelet_spec if tag in ("M4", "M5") else None
                        trainer = "BP" if tag in ("M2", "M4") else "PSO"
                        cfg = _single_config(trainer, gseed, config.baseline_hidden)
                        model = train_window(dataset, train_start, config.train_days, cfg,
                                             config, spec)
                    fc_fn = (lambda m: lambda ds, d: forecast_with(m, ds, d))(model)
                for r in grp:
                    act = profiles[np.datetime64(r.day, "D")]
                    out = fc_fn(dataset, r.day)
                    prof = out.profile if isinstance(out, ens.DayForecast) else np.asarray(out)
                    rep = evaluate(act, prof, peak)
                    r.mape[tag] = rep.mape_pct
                    r.variance[tag] = rep.error_variance
                    r.r2[tag] = rep.r_squared
                    if tag == "M6" and isinstance(out, ens.DayForecast):
                        r.member_mape = float(np.mean([mape(act, v, peak)
                                                       for v in out.members.values]))
            except (PvnneError, ArithmeticError, ValueError) as exc:
                logger.warning("model %s failed for season %s: %s", tag, season, exc)
                for r in grp:
                    r.failures[tag] = f"{type(exc).__name__}: {exc}"
                    r.mape.pop(tag, None)
    return BenchmarkResult(rows, config.seed, alphas)


def season_variance_table(results):
    """Mean sigma^2 per (season-kind) cell and model across several results."""
    cells = {}
    for res in results:
        for key, var in res.variances().items():
            for m, v in var.items():
                cells.setdefault(key, {}).setdefault(m, []).append(v)
    return {k: {m: float(np.mean(v)) for m, v in d.items()} for k, d in cells.items()}
