"""Neural network ensemble: structures of member networks, one net per wavelet band.

Every member forecasts each band of the next day's daylight profile; the band
forecasts are de-normalized and summed (the band split is a projection, so
the sum is the inverse transform). Member profiles are combined per time step
with an alpha-trimmed mean.
"""

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from threadpoolctl import threadpool_limits

from . import dataio, neural, wavelet
from .errors import (ConfigError, EnsembleTrainingError, GapError, PvnneError, ShapeError,
                     TrimError)
from .pso import PsoConfig, train_pso

logger = logging.getLogger(__name__)

BUNDLE_TAG = "pvnne.ensemble"
BUNDLE_VERSION = 1
TRAINERS = ("LM", "PSO", "BP")


@dataclass(frozen=True)
class EnsembleConfig:
    n_structures: int = 5
    models_per_structure: int = 20
    hidden_schedule: tuple = (10, 15, 20, 25, 30)
    trainer_split: dict = field(default_factory=lambda: {1: "LM", 2: "LM", 3: "PSO",
                                                          4: "PSO", 5: "PSO"})
    alpha_candidates: tuple = (0, 10, 20, 30, 40, 50)
    base_seed: int = 0

    def __post_init__(self):
        sched = tuple(int(h) for h in self.hidden_schedule)
        object.__setattr__(self, "hidden_schedule", sched)
        split = {int(k): str(v).upper() for k, v in dict(self.trainer_split).items()}
        object.__setattr__(self, "trainer_split", split)
        object.__setattr__(self, "alpha_candidates",
                           tuple(float(a) for a in self.alpha_candidates))
        if self.n_structures < 1 or self.models_per_structure < 1:
            raise ConfigError("need at least one structure and one model per structure")
        if len(sched) != self.n_structures:
            raise ConfigError(f"hidden_schedule has {len(sched)} entries for "
                              f"{self.n_structures} structures")
        if len(set(sched)) != len(sched) or min(sched) <= 0:
            raise ConfigError("hidden sizes must be distinct and positive")
        if sorted(split) != list(range(1, self.n_structures + 1)):
            raise ConfigError("trainer_split must name a trainer for every structure 1..n")
        bad = [v for v in split.values() if v not in TRAINERS]
        if bad:
            raise ConfigError(f"unknown trainers {bad}; use {TRAINERS}")
        if not self.alpha_candidates:
            raise ConfigError("alpha_candidates is empty")
        if any(not 0.0 <= a <= 100.0 for a in self.alpha_candidates):
            raise ConfigError("alpha candidates must lie in [0, 100]")

    @property
    def n_total(self):
        return self.n_structures * self.models_per_structure

    def to_dict(self):
        d = asdict(self)
        d["hidden_schedule"] = list(self.hidden_schedule)
        d["alpha_candidates"] = list(self.alpha_candidates)
        d["trainer_split"] = {str(k): v for k, v in self.trainer_split.items()}
        return d


@dataclass(frozen=True)
class LmSettings:
    mu0: float = 1e-3
    mu_scale: float = 10.0
    max_epochs: int = 100
    tolerance: float = 0.0


@dataclass(frozen=True)
class BpSettings:
    learning_rate: float = 0.1
    max_epochs: int = 2000
    tolerance: float = 0.0


@dataclass(frozen=True)
class TrainerConfig:
    lm: LmSettings = field(default_factory=LmSettings)
    bp: BpSettings = field(default_factory=BpSettings)
    pso: PsoConfig = field(default_factory=PsoConfig)


@dataclass
class Member:
    structure: int
    index: int
    hidden: int
    trainer: str
    seeds: dict
    networks: dict = field(default_factory=dict)
    usable: bool = True
    diagnostics: str = ""

    @property
    def key(self):
        return (self.structure, self.index)


@dataclass
class EnsembleModel:
    config: EnsembleConfig
    members: list
    bands: tuple
    wavelet_spec: object = None
    extension: str = "symmetric"
    lags: tuple = (1, 2)
    normalization: dict = field(default_factory=dict)
    alpha: float = 0.0
    trained: bool = False

    @property
    def usable_members(self):
        return [m for m in self.members if m.usable]

    @property
    def n_inputs(self):
        return len(self.lags) + len(dataio.MET_FIELDS)


@dataclass
class MemberForecastMatrix:
    values: np.ndarray
    member_keys: list

    @property
    def horizon(self):
        return self.values.shape[1]


def member_seed(base_seed, structure, index, component):
    ss = np.random.SeedSequence([int(base_seed), int(structure), int(index), int(component)])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def default_bands(wavelet_spec):
    return ("P",) if wavelet_spec is None else wavelet.band_names(wavelet_spec.levels)


def build_ensemble(config=None, wavelet_spec="default", lags=(1, 2), extension="symmetric"):
    """Untrained member skeletons with deterministic per-band seeds."""
    config = config or EnsembleConfig()
    if wavelet_spec == "default":
        wavelet_spec = wavelet.WaveletSpec()
    bands = default_bands(wavelet_spec)
    members = []
    for s in range(1, config.n_structures + 1):
        for m in range(1, config.models_per_structure + 1):
            seeds = {b: member_seed(config.base_seed, s, m, c) for c, b in enumerate(bands)}
            members.append(Member(s, m, config.hidden_schedule[s - 1],
                                  config.trainer_split[s], seeds))
    return EnsembleModel(config, members, bands, wavelet_spec, extension, tuple(lags))


# --- training ------------------------------------------------------------------

_WORKER_PATTERNS = None


def _init_worker(patterns):
    global _WORKER_PATTERNS
    _WORKER_PATTERNS = patterns
    # one BLAS thread per worker process for its whole life
    threadpool_limits(limits=1)


def _usable_cpus():
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - not on Linux
        return os.cpu_count() or 1


def _fit(task, patterns):
    trainer, hidden, seed, n_inputs, band, tcfg = task
    spec = neural.NetworkSpec((n_inputs, hidden, 1), seed=seed)
    net = neural.init_network(spec)
    ps = patterns[band]
    if trainer == "LM":
        s = tcfg.lm
        net, rep = neural.train_lm(net, ps, s.mu0, s.mu_scale, s.max_epochs, s.tolerance)
    elif trainer == "BP":
        s = tcfg.bp
        net, rep = neural.train_backprop(net, ps, s.learning_rate, s.max_epochs, s.tolerance)
    else:
        cfg = PsoConfig(**{**asdict(tcfg.pso), "seed": seed, "stream": 0})
        net, rep = train_pso(net, ps, cfg)
    if not np.all(np.isfinite(net.flatten())) or not math.isfinite(rep.final_mse):
        raise PvnneError("non-finite parameters after training")
    return net.flatten(), rep.final_mse, rep.epochs_run


def _run_task(task, patterns=None):
    try:
        return ("ok",) + _fit(task, patterns if patterns is not None else _WORKER_PATTERNS)
    except (PvnneError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return ("error", f"{type(exc).__name__}: {exc}")


def _worker_task(task):
    return _run_task(task)


def train_ensemble(ensemble, patterns, trainers=None, jobs=1):
    """Train every member's band networks; results do not depend on ``jobs``."""
    trainers = trainers or TrainerConfig()
    missing = [b for b in ensemble.bands if b not in patterns]
    if missing:
        raise ShapeError(f"no patterns for bands {missing}")
    n_in = ensemble.n_inputs
    for b in ensemble.bands:
        if patterns[b].inputs.shape[1] != n_in:
            raise ShapeError(f"band {b}: {patterns[b].inputs.shape[1]} features, "
                             f"ensemble expects {n_in}")
    tasks, index = [], []
    for mi, m in enumerate(ensemble.members):
        for b in ensemble.bands:
            tasks.append((m.trainer, m.hidden, m.seeds[b], n_in, b, trainers))
            index.append((mi, b))
    if jobs and jobs > 1:
        # more workers than cores or tasks only adds contention
        workers = max(1, min(jobs, len(tasks), _usable_cpus()))
        slim = {b: dataio.PatternSet(p.inputs, p.targets, p.input_norm, p.target_norm)
                for b, p in patterns.items()}
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(slim,)) as pool:
            results = list(pool.map(_worker_task, tasks,
                                    chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        with threadpool_limits(limits=1):
            results = [_run_task(t, patterns) for t in tasks]

    members = [Member(m.structure, m.index, m.hidden, m.trainer, dict(m.seeds))
               for m in ensemble.members]
    for (mi, b), res in zip(index, results):
        m = members[mi]
        if res[0] == "ok":
            spec = neural.NetworkSpec((n_in, m.hidden, 1), seed=m.seeds[b])
            m.networks[b] = neural.unflatten(spec, res[1])
        else:
            m.usable = False
            m.diagnostics = (m.diagnostics + "; " if m.diagnostics else "") + f"{b}: {res[1]}"
    failed = [m for m in members if not m.usable]
    for m in failed:
        m.networks = {}
        logger.warning("member %s unusable: %s", m.key, m.diagnostics)
    if 2 * len(failed) > len(members):
        raise EnsembleTrainingError(
            f"{len(failed)} of {len(members)} members failed to train",
            {m.key: m.diagnostics for m in failed})
    norm = {b: (patterns[b].input_norm, patterns[b].target_norm) for b in ensemble.bands}
    return EnsembleModel(ensemble.config, members, ensemble.bands, ensemble.wavelet_spec,
                         ensemble.extension, ensemble.lags, norm, ensemble.alpha, True)


# --- prediction and aggregation ---------------------------------------------

def predict_members(ensemble, day_inputs):
    """Member profiles (usable members x steps) from raw feature rows per band."""
    if not ensemble.trained:
        raise ConfigError("ensemble is not trained")
    rows = []
    keys = []
    steps = None
    for b in ensemble.bands:
        X = np.asarray(day_inputs[b], dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != ensemble.n_inputs:
            raise ShapeError(f"band {b}: expected (steps, {ensemble.n_inputs}) inputs, "
                             f"got {X.shape}")
        if steps is None:
            steps = X.shape[0]
        elif X.shape[0] != steps:
            raise ShapeError("bands disagree on horizon length")
    normed = {b: ensemble.normalization[b][0].apply(np.asarray(day_inputs[b], dtype=float))
              for b in ensemble.bands}
    for m in ensemble.usable_members:
        total = np.zeros(steps)
        for b in ensemble.bands:
            y = neural.forward(m.networks[b], normed[b])[:, 0]
            total = total + ensemble.normalization[b][1].invert(y[:, None])[:, 0]
        rows.append(np.maximum(total, 0.0))
        keys.append(m.key)
    values = np.vstack(rows) if rows else np.zeros((0, steps))
    return MemberForecastMatrix(values, keys)


def _trim_count(n, alpha):
    # even number of values removed, half from each tail
    return 2 * int((Fraction(alpha) * n) // 200)


def _exact_mean(vals):
    # float denominators are powers of two, so one common denominator is exact;
    # int / int true division rounds once, to nearest
    pairs = [v.as_integer_ratio() for v in vals]
    den = max(d for _, d in pairs)
    num = sum(n * (den // d) for n, d in pairs)
    return num / (den * len(vals))


def trim_aggregate(values, alpha):
    """Mean of the values left after dropping the alpha-percent extremes.

    The mean is the exact average rounded once, so it never leaves the range
    of the kept values and equals v when every kept value is v.
    """
    vals = sorted(float(v) for v in values)
    n = len(vals)
    if n == 0:
        raise TrimError("no values to aggregate")
    if not 0.0 <= alpha <= 100.0:
        raise TrimError(f"alpha {alpha} outside [0, 100]")
    if not all(math.isfinite(v) for v in vals):
        raise TrimError("member values must be finite")
    k = _trim_count(n, alpha)
    if k >= n:
        raise TrimError(f"alpha={alpha} trims all {n} values")
    return _exact_mean(vals[k // 2:n - k // 2])


def aggregate_matrix(matrix, alpha):
    values = matrix.values if isinstance(matrix, MemberForecastMatrix) else np.asarray(matrix)
    return np.array([trim_aggregate(values[:, j], alpha) for j in range(values.shape[1])])


def _peak_mape(actual, forecast, peak):
    return 100.0 * float(np.mean(np.abs(np.asarray(actual) - np.asarray(forecast)))) / peak


def select_alpha(matrices, actuals, peak_power, candidates):
    """Candidate with the lowest validation error; ties go to the smaller alpha."""
    candidates = sorted(float(a) for a in candidates)
    if not candidates:
        raise ConfigError("no alpha candidates")
    if not matrices:
        raise ConfigError("need at least one validation day")
    act = np.concatenate([np.asarray(a, dtype=float) for a in actuals])
    best, best_err = None, math.inf
    for a in candidates:
        try:
            fc = np.concatenate([aggregate_matrix(m, a) for m in matrices])
        except TrimError:
            continue
        err = _peak_mape(act, fc, peak_power)
        if err < best_err:
            best, best_err = a, err
    if best is None:
        raise ConfigError("every alpha candidate trims all members")
    return best


# --- end-to-end day forecast ----------------------------------------------------

@dataclass
class DayForecast:
    day: str
    timestamps: np.ndarray
    profile: np.ndarray
    members: MemberForecastMatrix


def history_components(ensemble, dataset, days):
    """{date: {band: series}} for the given days; a day with gaps raises."""
    prof = dataio.daylight_profiles(dataset, "pv_power")
    out = {}
    for d in days:
        d = np.datetime64(d, "D")
        p = prof.get(d)
        if p is None or np.isnan(p).any():
            raise GapError(f"history incomplete on {d}", day=str(d))
        if ensemble.wavelet_spec is None:
            out[d] = {"P": p}
        else:
            out[d] = wavelet.split_components(
                wavelet.decompose(p, ensemble.wavelet_spec, ensemble.extension))
    return out


def day_feature_rows(ensemble, history, met_day, day):
    """Raw (un-normalized) feature rows per band for one target day.

    ``met_day`` is a (steps x 4) array of irradiance, temperature, wind and
    humidity over the target day's daylight window.
    """
    day = np.datetime64(day, "D")
    lag_days = [day - np.timedelta64(l, "D") for l in ensemble.lags]
    comps = history_components(ensemble, history, lag_days)
    met = {day: np.asarray(met_day, dtype=np.float64)}
    return {b: dataio.raw_features(comps, met, day, b, ensemble.lags) for b in ensemble.bands}


def met_rows(dataset, day):
    mats = [dataset.day_matrix(f, daylight_only=True) for f in dataio.MET_FIELDS]
    dates = mats[0][0]
    i = np.searchsorted(dates, np.datetime64(day, "D"))
    if i >= dates.size or dates[i] != np.datetime64(day, "D"):
        raise GapError(f"no meteorological rows for {day}", day=str(day))
    return np.column_stack([m[i] for _, m in mats])


def forecast_day(ensemble, history, met_forecast, day):
    """Aggregated daylight profile for ``day`` plus the member matrix."""
    day = np.datetime64(day, "D")
    rows = day_feature_rows(ensemble, history, met_forecast, day)
    mat = predict_members(ensemble, rows)
    if mat.values.shape[0] == 0:
        raise EnsembleTrainingError("no usable members")
    profile = aggregate_matrix(mat, ensemble.alpha)
    res = history.resolution_minutes
    start = day + np.timedelta64(history.daylight_window[0] * 60, "m")
    ts = start + np.arange(profile.size) * np.timedelta64(res, "m")
    return DayForecast(str(day), ts, profile, mat)


# --- persistence ---------------------------------------------------------------------

def to_dict(ensemble):
    return {
        "format": BUNDLE_TAG,
        "version": BUNDLE_VERSION,
        "config": ensemble.config.to_dict(),
        "bands": list(ensemble.bands),
        "wavelet": None if ensemble.wavelet_spec is None else ensemble.wavelet_spec.to_dict(),
        "extension": ensemble.extension,
        "lags": list(ensemble.lags),
        "alpha": ensemble.alpha,
        "trained": ensemble.trained,
        "normalization": {b: {"inputs": n[0].to_dict(), "targets": n[1].to_dict()}
                          for b, n in ensemble.normalization.items()},
        "members": [{
            "structure": m.structure, "index": m.index, "hidden": m.hidden,
            "trainer": m.trainer, "usable": m.usable, "diagnostics": m.diagnostics,
            "seeds": {b: s for b, s in m.seeds.items()},
            "networks": {b: n.to_dict() for b, n in m.networks.items()},
        } for m in ensemble.members],
    }


def from_dict(d):
    if d.get("format") != BUNDLE_TAG:
        raise ConfigError("not an ensemble bundle")
    if d.get("version") != BUNDLE_VERSION:
        raise ConfigError(f"unsupported bundle version {d.get('version')}")
    cfg = dict(d["config"])
    cfg["trainer_split"] = {int(k): v for k, v in cfg["trainer_split"].items()}
    config = EnsembleConfig(**cfg)
    members = [Member(m["structure"], m["index"], m["hidden"], m["trainer"], dict(m["seeds"]),
                      {b: neural.Network.from_dict(n) for b, n in m["networks"].items()},
                      m["usable"], m["diagnostics"]) for m in d["members"]]
    norm = {b: (dataio.Normalization.from_dict(n["inputs"]),
                dataio.Normalization.from_dict(n["targets"]))
            for b, n in d["normalization"].items()}
    spec = None if d["wavelet"] is None else wavelet.WaveletSpec.from_dict(d["wavelet"])
    return EnsembleModel(config, members, tuple(d["bands"]), spec, d["extension"],
                         tuple(d["lags"]), norm, float(d["alpha"]), bool(d["trained"]))


def save(ensemble, path):
    with open(path, "w") as fh:
        json.dump(to_dict(ensemble), fh, sort_keys=True)


def load(path):
    with open(path) as fh:
        return from_dict(json.load(fh))
