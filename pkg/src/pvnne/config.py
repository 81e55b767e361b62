"""Run configuration: one TOML (or JSON) document with documented defaults.

Unknown keys are rejected. The effective configuration is a plain nested
dict; :func:`canonical_json` gives the byte form that gets hashed and echoed
into every output directory.
"""

import copy
import hashlib
import json
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import dataio, wavelet
from .ensemble import BpSettings, EnsembleConfig, LmSettings, TrainerConfig
from .errors import ConfigError
from .evaluation import BenchmarkConfig
from .pso import PsoConfig
from .sky import SiteGeometry
from .synth import REFERENCE_COMPOSITION, PlantParams, SynthConfig

DEFAULTS = {
    "seed": 0,
    "data": {
        "path": "",
        "schema": dict(dataio.DEFAULT_SCHEMA),
        "resolution": 15,
        "daylight_window": [7, 17],
        "reconstruct_k": 3,
    },
    "site": {
        "latitude": -27.5,
        "solar_constant": 1.367,
        "eccentricity_coeff": 0.033,
    },
    "plant": {
        "p_stc": 300.0,
        "gamma": 0.004,
        "noct": 45.0,
        "n_series": 20,
        "n_parallel": 200,
    },
    "synth": {
        "start_date": "2014-01-01",
        "n_days": 360,
        "window_days": 30,
        "composition": [list(r) for r in REFERENCE_COMPOSITION],
    },
    "wavelet": {
        "name": "db4",
        "levels": 3,
        "extension": "symmetric",
    },
    "ensemble": {
        "n_structures": 5,
        "models_per_structure": 20,
        "hidden_schedule": [10, 15, 20, 25, 30],
        "trainer_split": {"1": "LM", "2": "LM", "3": "PSO", "4": "PSO", "5": "PSO"},
        "alpha_candidates": [0, 10, 20, 30, 40, 50],
        "lags": [1, 2],
    },
    "trainers": {
        "lm": {"mu0": 1e-3, "mu_scale": 10.0, "max_epochs": 30, "tolerance": 0.0},
        "bp": {"learning_rate": 0.1, "max_epochs": 2000, "tolerance": 0.0},
        "pso": {
            "swarm_size": 20,
            "max_iterations": 30,
            "inertia_start": 0.9,
            "inertia_end": 0.4,
            "cognitive_c1": 2.0,
            "social_c2": 2.0,
            "position_bounds": [-5.0, 5.0],
            "velocity_clamp": 0.2,
        },
    },
    "evaluation": {
        "peak_power": 0.0,
        "test_days": [],
        "train_days": 30,
        "validation_days": 5,
        "baseline_hidden": 20,
        "lengths": [30, 60, 90],
        "resolutions": [1, 15, 30, 60],
    },
}

# sections whose keys are free-form (merged, not validated key by key)
_OPEN = {("data", "schema"), ("ensemble", "trainer_split")}


def _merge(base, override, path=()):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k not in base:
            if path in _OPEN:
                out[k] = v
                continue
            where = ".".join(path + (k,))
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(base[k], dict) and path + (k,) not in _OPEN:
            if not isinstance(v, dict):
                raise ConfigError(f"{'.'.join(path + (k,))} must be a table")
            out[k] = _merge(base[k], v, path + (k,))
        elif path + (k,) in _OPEN:
            if not isinstance(v, dict):
                raise ConfigError(f"{'.'.join(path + (k,))} must be a table")
            if path + (k,) == ("ensemble", "trainer_split"):
                out[k] = dict(v)
            else:
                out[k] = {**base[k], **v}
        else:
            out[k] = v
    return out


def load_config(path=None, overrides=None):
    """Defaults, then the file at ``path``, then ``overrides`` (same shape)."""
    doc = {}
    if path:
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            if str(path).endswith(".json"):
                doc = json.loads(raw.decode("utf-8"))
            else:
                doc = tomllib.loads(raw.decode("utf-8"))
        except (ValueError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    cfg = _merge(DEFAULTS, doc)
    if overrides:
        cfg = _merge(cfg, overrides)
    validate(cfg)
    return cfg


def canonical_json(cfg):
    return json.dumps(cfg, sort_keys=True, indent=2) + "\n"


def config_hash(cfg):
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def validate(cfg):
    # building every typed object runs its own checks
    site(cfg)
    plant(cfg)
    wavelet_spec(cfg)
    ensemble_config(cfg)
    trainer_config(cfg)
    if cfg["data"]["resolution"] not in dataio.RESOLUTIONS:
        raise ConfigError(f"data.resolution must be one of {dataio.RESOLUTIONS}")
    if int(cfg["data"]["reconstruct_k"]) < 1:
        raise ConfigError("data.reconstruct_k must be positive")
    if not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer")


def site(cfg):
    s = cfg["site"]
    try:
        return SiteGeometry(float(s["latitude"]), float(s["solar_constant"]),
                            float(s["eccentricity_coeff"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def plant(cfg):
    p = cfg["plant"]
    return PlantParams(float(p["p_stc"]), float(p["gamma"]), float(p["noct"]),
                       int(p["n_series"]), int(p["n_parallel"]))


def peak_power(cfg):
    """Rated peak in kW unless configured explicitly."""
    v = float(cfg["evaluation"]["peak_power"])
    return v if v > 0 else plant(cfg).rated_kw


def wavelet_spec(cfg):
    w = cfg["wavelet"]
    if w["extension"] not in wavelet.MODES:
        raise ConfigError(f"wavelet.extension must be one of {wavelet.MODES}")
    try:
        return wavelet.WaveletSpec(name=w["name"], levels=int(w["levels"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def ensemble_config(cfg, seed=None):
    e = cfg["ensemble"]
    return EnsembleConfig(
        n_structures=int(e["n_structures"]),
        models_per_structure=int(e["models_per_structure"]),
        hidden_schedule=tuple(e["hidden_schedule"]),
        trainer_split={int(k): v for k, v in e["trainer_split"].items()},
        alpha_candidates=tuple(e["alpha_candidates"]),
        base_seed=cfg["seed"] if seed is None else seed,
    )


def trainer_config(cfg):
    t = cfg["trainers"]
    pso = dict(t["pso"])
    pso["position_bounds"] = tuple(pso["position_bounds"])
    try:
        return TrainerConfig(lm=LmSettings(**t["lm"]), bp=BpSettings(**t["bp"]),
                             pso=PsoConfig(**pso))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def synth_config(cfg, resolution=None):
    s = cfg["synth"]
    return SynthConfig(
        site=site(cfg), plant=plant(cfg),
        composition_targets=tuple(tuple(r) for r in s["composition"]),
        resolution_minutes=int(resolution or cfg["data"]["resolution"]),
        seed=cfg["seed"], start_date=s["start_date"], n_days=int(s["n_days"]),
        window_days=int(s["window_days"]),
        daylight_window=tuple(cfg["data"]["daylight_window"]),
    )


def benchmark_config(cfg, jobs=1):
    ev = cfg["evaluation"]
    return BenchmarkConfig(
        train_days=int(ev["train_days"]), validation_days=int(ev["validation_days"]),
        lags=tuple(cfg["ensemble"]["lags"]), wavelet_spec=wavelet_spec(cfg),
        extension=cfg["wavelet"]["extension"], ensemble=ensemble_config(cfg),
        trainers=trainer_config(cfg), baseline_hidden=int(ev["baseline_hidden"]),
        peak_power=peak_power(cfg), site=site(cfg), seed=cfg["seed"], jobs=jobs,
    )
