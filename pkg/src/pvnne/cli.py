"""Command-line entry point.

Every subcommand writes its outputs, the effective configuration
(``config.json``) and a ``manifest.json`` (config hash, seed, input and output
digests) into ``--out``. Files are written atomically. ``--jobs`` only changes
how training is scheduled, never the results.
"""

import argparse
import datetime as dt
import hashlib
import io
import json
import logging
import os
import sys
import tempfile

import numpy as np

from . import __version__, config as rc, dataio, ensemble as ens, evaluation as ev, synth
from .errors import PvnneError

log = logging.getLogger("pvnne")

COMMANDS = ("synth", "ingest", "classify", "train", "forecast", "evaluate",
            "experiment-resolution", "experiment-length")


class UsageError(Exception):
    pass


# --- output plumbing -----------------------------------------------------------

def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Collects outputs of one invocation and writes them with a manifest."""

    def __init__(self, command, cfg, out_dir, inputs):
        self.command = command
        self.cfg = cfg
        self.out_dir = out_dir
        self.inputs = {os.path.basename(p): sha256_file(p) for p in inputs if p}
        self.outputs = {}

    def write(self, name, text):
        path = os.path.join(self.out_dir, name)
        atomic_write(path, text)
        self.outputs[name] = hashlib.sha256(text.encode()).hexdigest()
        return path

    def finish(self):
        self.write("config.json", rc.canonical_json(self.cfg))
        manifest = {
            "command": self.command,
            "package_version": __version__,
            "seed": self.cfg["seed"],
            "config_sha256": rc.config_hash(self.cfg),
            "inputs": self.inputs,
            "outputs": dict(sorted(self.outputs.items())),
        }
        atomic_write(os.path.join(self.out_dir, "manifest.json"),
                     json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _csv_text(dataset, cfg):
    buf = io.StringIO()
    dataset.to_csv(buf, cfg["data"]["schema"])
    return buf.getvalue()


# --- data helpers --------------------------------------------------------------------

def _input_path(args, cfg):
    return args.input or cfg["data"]["path"] or None


def _load(path, cfg):
    return dataio.read_csv(path, cfg["data"]["schema"],
                           daylight_window=tuple(cfg["data"]["daylight_window"]))


def _clean(dataset, cfg, resolution=None):
    """Gap filling, resampling and night-zeroing, in that order."""
    if any(np.isnan(dataset.values[f]).any() for f in dataio.FIELDS):
        dataset = dataio.reconstruct_missing(dataset, int(cfg["data"]["reconstruct_k"]))
    res = resolution or cfg["data"]["resolution"]
    if res != dataset.resolution_minutes:
        dataset = dataio.resample(dataset, res)
    return dataio.apply_night_zero(dataset)


def _dataset(args, cfg, resolution=None):
    """Cleaned input data, or a synthetic year when no input is given."""
    path = _input_path(args, cfg)
    if path:
        return _clean(_load(path, cfg), cfg, resolution), [path]
    res = resolution or cfg["data"]["resolution"]
    return synth.generate_year(rc.synth_config(cfg, res)), []


def _parse_day(text):
    try:
        return dt.date.fromisoformat(text)
    except ValueError as exc:
        raise UsageError(f"--day must be YYYY-MM-DD, got {text!r}") from exc


def _test_days(cfg, dataset, bcfg):
    listed = cfg["evaluation"]["test_days"]
    if listed:
        classes = dict(synth.classify_dataset(dataset, rc.site(cfg)))
        out = []
        for d in listed:
            day = _parse_day(d)
            if day not in classes:
                raise UsageError(f"test day {d} not in the data")
            doy = min(day.timetuple().tm_yday, 365)
            out.append(ev.TestDay(ev.season_of(doy), classes[day].kind, day.isoformat()))
        return out
    need = bcfg.train_days + bcfg.validation_days + max(bcfg.lags)
    return ev.select_test_days(dataset, bcfg.site, need)


# --- subcommands --------------------------------------------------------------------

def cmd_synth(args, cfg):
    """Generate a synthetic year of plant data."""
    ds = synth.generate_year(rc.synth_config(cfg, args.resolution))
    run = Run("synth", cfg, args.out, [])
    run.write("data.csv", _csv_text(ds, cfg))
    run.finish()


def cmd_ingest(args, cfg):
    """Clean an input CSV: fill gaps, resample, zero night power."""
    path = _input_path(args, cfg)
    if not path:
        raise UsageError("ingest needs --input or data.path")
    ds = _clean(_load(path, cfg), cfg, args.resolution)
    run = Run("ingest", cfg, args.out, [path])
    run.write("clean.csv", _csv_text(ds, cfg))
    run.finish()


def cmd_classify(args, cfg):
    """Classify every day as clear, partially cloudy or cloudy."""
    ds, inputs = _dataset(args, cfg, args.resolution)
    rows = ["date,k_t,class"]
    for date, c in synth.classify_dataset(ds, rc.site(cfg)):
        rows.append(f"{date.isoformat()},{c.k_t:.6f},{c.kind.value}")
    run = Run("classify", cfg, args.out, inputs)
    run.write("classification.csv", "\n".join(rows) + "\n")
    run.finish()


def _target_day(args, ds):
    if args.day:
        return np.datetime64(_parse_day(args.day).isoformat(), "D")
    return ds.dates()[-1] + np.timedelta64(1, "D")


def cmd_train(args, cfg):
    """Train the ensemble for a target day and pick alpha."""
    ds, inputs = _dataset(args, cfg, args.resolution)
    bcfg = rc.benchmark_config(cfg, jobs=args.jobs)
    day = _target_day(args, ds)
    model = ev.fit_nne(ds, day, bcfg)
    run = Run("train", cfg, args.out, inputs)
    run.write("model.json", json.dumps(ens.to_dict(model), sort_keys=True) + "\n")
    run.finish()


def cmd_forecast(args, cfg):
    """Forecast one day with a trained ensemble."""
    if not args.day:
        raise UsageError("forecast needs --day")
    model_path = args.model or os.path.join(args.out, "model.json")
    if not os.path.exists(model_path):
        raise UsageError(f"no trained model at {model_path}; run train or pass --model")
    model = ens.load(model_path)
    ds, inputs = _dataset(args, cfg, args.resolution)
    day = np.datetime64(_parse_day(args.day).isoformat(), "D")
    fc = ev.forecast_with(model, ds, day)
    res = ds.resolution_minutes
    stamps = day + np.arange(ds.steps_per_day) * np.timedelta64(res, "m")
    full = np.zeros(ds.steps_per_day)
    s = ds.daylight_window[0] * 60 // res
    full[s:s + fc.profile.size] = fc.profile
    lines = ["timestamp,forecast_kw"]
    lines += [f"{t},{v:.6f}" for t, v in zip(stamps.astype(str), full)]
    members = ["member," + ",".join(fc.timestamps.astype(str))]
    for key, row in zip(fc.members.member_keys, fc.members.values):
        members.append(f"s{key[0]}m{key[1]}," + ",".join(f"{v:.6f}" for v in row))
    run = Run("forecast", cfg, args.out, inputs + [model_path])
    run.write("forecast.csv", "\n".join(lines) + "\n")
    run.write("members.csv", "\n".join(members) + "\n")
    run.finish()


def cmd_evaluate(args, cfg):
    """Run the six-model seasonal benchmark."""
    ds, inputs = _dataset(args, cfg, args.resolution)
    bcfg = rc.benchmark_config(cfg, jobs=args.jobs)
    res = ev.run_benchmarks(ds, _test_days(cfg, ds, bcfg), bcfg)
    run = Run("evaluate", cfg, args.out, inputs)
    run.write("table.csv", res.table_csv())
    run.write("long.csv", res.long_csv())
    run.write("summary.json", json.dumps(res.summary(), sort_keys=True, indent=2) + "\n")
    run.finish()


def _experiment_days(cfg, ds, bcfg):
    """Test days sharing one training window: the latest season group."""
    days = _test_days(cfg, ds, bcfg)
    if not days:
        raise PvnneError("no test days with enough history")
    if cfg["evaluation"]["test_days"]:
        return days
    last = days[-1].season
    return [t for t in days if t.season == last]


def cmd_experiment_resolution(args, cfg):
    """Compare training resolutions by R-squared."""
    path = _input_path(args, cfg)
    if path:
        raw = _load(path, cfg)
        base, inputs = _clean(raw, cfg, raw.resolution_minutes), [path]
    else:
        base, inputs = _dataset(args, cfg, resolution=min(cfg["evaluation"]["resolutions"]))
    peak = rc.peak_power(cfg)
    lines = ["resolution_min,r_squared,mape_pct,n_steps"]
    for r in cfg["evaluation"]["resolutions"]:
        if r % base.resolution_minutes:
            log.warning("skipping %d min: input resolution is %d min", r,
                        base.resolution_minutes)
            continue
        ds = dataio.apply_night_zero(dataio.resample(base, r))
        bcfg = rc.benchmark_config(cfg, jobs=args.jobs)
        days = _experiment_days(cfg, ds, bcfg)
        model = ev.fit_nne(ds, min(t.day for t in days), bcfg)
        prof = dataio.daylight_profiles(ds, "pv_power")
        act, fc = [], []
        for t in days:
            act.append(prof[np.datetime64(t.day, "D")])
            fc.append(ev.forecast_with(model, ds, t.day).profile)
        a, f = np.concatenate(act), np.concatenate(fc)
        lines.append(f"{r},{ev.r_squared(a, f):.6f},{ev.mape(a, f, peak):.6f},{a.size}")
    run = Run("experiment-resolution", cfg, args.out, inputs)
    run.write("resolution.csv", "\n".join(lines) + "\n")
    run.finish()


def cmd_experiment_length(args, cfg):
    """Compare 30/60/90-day training windows by MAPE."""
    ds, inputs = _dataset(args, cfg, args.resolution)
    peak = rc.peak_power(cfg)
    lengths = [int(n) for n in cfg["evaluation"]["lengths"]]
    bcfg = rc.benchmark_config(cfg, jobs=args.jobs)
    need = max(lengths) + bcfg.validation_days + max(bcfg.lags)
    days = [t for t in _experiment_days(cfg, ds, bcfg)
            if (np.datetime64(t.day, "D") - ds.dates()[0]).astype(int) >= need]
    if not days:
        raise PvnneError(f"no test day has {need} days of history")
    prof = dataio.daylight_profiles(ds, "pv_power")
    lines = ["date,kind,train_days,mape_pct"]
    first = min(t.day for t in days)
    for n in lengths:
        model = ev.fit_nne(ds, first, bcfg, train_days=n)
        for t in days:
            fc = ev.forecast_with(model, ds, t.day).profile
            m = ev.mape(prof[np.datetime64(t.day, "D")], fc, peak)
            lines.append(f"{t.day},{t.kind.short},{n},{m:.6f}")
    run = Run("experiment-length", cfg, args.out, inputs)
    run.write("length.csv", "\n".join(lines) + "\n")
    run.finish()


HANDLERS = {
    "synth": cmd_synth, "ingest": cmd_ingest, "classify": cmd_classify, "train": cmd_train,
    "forecast": cmd_forecast, "evaluate": cmd_evaluate,
    "experiment-resolution": cmd_experiment_resolution,
    "experiment-length": cmd_experiment_length,
}


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    common.add_argument("--resolution", type=int, choices=dataio.RESOLUTIONS,
                        help="working resolution in minutes")
    common.add_argument("--day", help="target day YYYY-MM-DD")
    common.add_argument("--jobs", type=_positive, default=1, help="parallel training jobs")
    common.add_argument("--input", help="input CSV (default: data.path, else synthetic)")
    common.add_argument("--model", help="trained model bundle (forecast)")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="pvnne", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pvnne {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HANDLERS[name].__doc__)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = {} if args.seed is None else {"seed": args.seed}
        if args.resolution is not None:
            overrides.setdefault("data", {})["resolution"] = args.resolution
        cfg = rc.load_config(args.config, overrides)
        HANDLERS[args.command](args, cfg)
    except UsageError as exc:
        print(f"pvnne {args.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except (PvnneError, OSError, ValueError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"pvnne {args.command}: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
