"""Observation records, cleaning, resampling, and supervised pattern building.

A :class:`Dataset` holds one regular time grid. Timestamps are local clock
times at minute precision (one fixed UTC offset per dataset); fields are float
arrays with NaN marking a missing value.
"""

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import (EmptyInputError, GapError, IntegrityError, IrrecoverableFieldError,
                     ResolutionError, SchemaError, ShapeError)
from . import wavelet

FIELDS = ("pv_power", "irradiance", "temperature", "wind_speed", "humidity")
MET_FIELDS = ("irradiance", "temperature", "wind_speed", "humidity")
DEFAULT_SCHEMA = {
    "timestamp": "timestamp",
    "pv_power": "pv_kw",
    "irradiance": "ghi_wm2",
    "temperature": "temp_c",
    "wind_speed": "wind_ms",
    "humidity": "humidity_pct",
}
RESOLUTIONS = (1, 15, 30, 60)
MINUTES_PER_DAY = 1440


class SampleRecord(NamedTuple):
    timestamp: dt.datetime
    pv_power: Optional[float] = None
    irradiance: Optional[float] = None
    temperature: Optional[float] = None
    wind_speed: Optional[float] = None
    humidity: Optional[float] = None


def _valid(name, v):
    # physically impossible readings are treated as missing
    if v is None or not math.isfinite(v):
        return None
    if name in ("pv_power", "irradiance") and v < 0:
        return None
    if name == "humidity" and not 0.0 <= v <= 100.0:
        return None
    return v


def _parse_float(text):
    text = text.strip()
    if not text:
        return None
    try:
        return float(text)
    except ValueError:
        return None


def _parse_timestamp(text):
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return dt.datetime.fromisoformat(text)


def parse_records(source, schema=None):
    """Read CSV rows into records sorted by timestamp.

    ``schema`` maps record field names to CSV column names; missing keys fall
    back to the default column names.
    """
    schema = {**DEFAULT_SCHEMA, **(schema or {})}
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None:
        raise EmptyInputError("empty input: no header row")
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise SchemaError(f"duplicate column names in header {header}")
    missing = [schema[f] for f in ("timestamp",) + FIELDS if schema[f] not in header]
    if missing:
        raise SchemaError(f"header lacks required columns {missing}")
    col = {f: header.index(schema[f]) for f in ("timestamp",) + FIELDS}
    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise SchemaError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        try:
            ts = _parse_timestamp(row[col["timestamp"]])
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: bad timestamp {row[col['timestamp']]!r}") from exc
        vals = {f: _valid(f, _parse_float(row[col[f]])) for f in FIELDS}
        records.append(SampleRecord(ts, **vals))
    if not records:
        raise EmptyInputError("no data rows")
    offsets = {r.timestamp.utcoffset() for r in records}
    if len(offsets) > 1:
        raise IntegrityError("mixed UTC offsets in one dataset")
    records.sort(key=lambda r: r.timestamp)
    for a, b in zip(records, records[1:]):
        if a.timestamp == b.timestamp:
            raise IntegrityError(f"duplicate timestamp {a.timestamp.isoformat()}")
    return records


def _to_minutes(ts):
    return np.datetime64(ts.replace(tzinfo=None), "m")


class Dataset:
    """Regular time grid of observations; immutable."""

    def __init__(self, timestamps, values, resolution_minutes, daylight_window=(7, 17),
                 utc_offset_minutes=None):
        ts = np.asarray(timestamps, dtype="datetime64[m]")
        if ts.ndim != 1 or ts.size == 0:
            raise EmptyInputError("dataset needs at least one timestamp")
        res = int(resolution_minutes)
        if res <= 0 or MINUTES_PER_DAY % res:
            raise ResolutionError(f"resolution {res} min must divide a day")
        steps = np.diff(ts).astype(np.int64)
        if np.any(steps != res):
            raise IntegrityError(f"timestamps not on a regular {res}-minute grid")
        start, end = daylight_window
        if not 0 <= start < end <= 24:
            raise ShapeError(f"invalid daylight window {daylight_window}")
        vals = {}
        for f in FIELDS:
            a = np.array(values.get(f, np.full(ts.size, np.nan)), dtype=np.float64)
            if a.shape != ts.shape:
                raise ShapeError(f"{f} has {a.shape}, expected {ts.shape}")
            a.setflags(write=False)
            vals[f] = a
        ts = ts.copy()
        ts.setflags(write=False)
        self.timestamps = ts
        self.values = vals
        self.resolution_minutes = res
        self.daylight_window = (int(start), int(end))
        self.utc_offset_minutes = utc_offset_minutes

    @classmethod
    def from_records(cls, records, resolution_minutes=None, daylight_window=(7, 17)):
        """Place records on a regular grid; absent grid points become missing."""
        records = list(records)
        if not records:
            raise EmptyInputError("no records")
        off = records[0].timestamp.utcoffset()
        off_min = None if off is None else int(off.total_seconds() // 60)
        ts = np.array([_to_minutes(r.timestamp) for r in records])
        if np.any(np.diff(ts).astype(np.int64) <= 0):
            raise IntegrityError("records must be strictly increasing in time")
        if resolution_minutes is None:
            d = np.diff(ts).astype(np.int64)
            resolution_minutes = int(np.gcd.reduce(d)) if d.size else 15
        res = int(resolution_minutes)
        rel = (ts - ts[0]).astype(np.int64)
        if np.any(rel % res):
            raise IntegrityError(f"timestamps off the {res}-minute grid")
        idx = rel // res
        n = int(idx[-1]) + 1
        grid = ts[0] + np.arange(n) * np.timedelta64(res, "m")
        vals = {}
        for f in FIELDS:
            a = np.full(n, np.nan)
            a[idx] = [np.nan if getattr(r, f) is None else getattr(r, f) for r in records]
            vals[f] = a
        return cls(grid, vals, res, daylight_window, off_min)

    def replace(self, **changes):
        kw = dict(timestamps=self.timestamps, values=self.values,
                  resolution_minutes=self.resolution_minutes,
                  daylight_window=self.daylight_window,
                  utc_offset_minutes=self.utc_offset_minutes)
        if "values" in changes:
            changes["values"] = {**self.values, **changes["values"]}
        kw.update(changes)
        return Dataset(**kw)

    def __len__(self):
        return self.timestamps.size

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        ts = self.timestamps[i].astype(dt.datetime)
        if self.utc_offset_minutes is not None:
            ts = ts.replace(tzinfo=dt.timezone(dt.timedelta(minutes=self.utc_offset_minutes)))
        vals = {}
        for f in FIELDS:
            v = float(self.values[f][i])
            vals[f] = None if math.isnan(v) else v
        return SampleRecord(ts, **vals)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.resolution_minutes == other.resolution_minutes
                and self.daylight_window == other.daylight_window
                and np.array_equal(self.timestamps, other.timestamps)
                and all(np.array_equal(self.values[f], other.values[f], equal_nan=True)
                        for f in FIELDS))

    # --- day views -------------------------------------------------------

    @property
    def steps_per_day(self):
        return MINUTES_PER_DAY // self.resolution_minutes

    @property
    def daylight_steps(self):
        s, e = self.daylight_window
        return (e - s) * 60 // self.resolution_minutes

    def minute_of_day(self):
        return (self.timestamps - self.timestamps.astype("datetime64[D]")).astype(np.int64)

    def dates(self):
        return np.unique(self.timestamps.astype("datetime64[D]"))

    def _day_positions(self):
        day = self.timestamps.astype("datetime64[D]")
        dates = np.unique(day)
        di = np.searchsorted(dates, day)
        pos = self.minute_of_day() // self.resolution_minutes
        return dates, di, pos

    def day_matrix(self, name, daylight_only=False):
        """(dates, days x steps matrix) with NaN where a day lacks samples."""
        dates, di, pos = self._day_positions()
        m = np.full((dates.size, self.steps_per_day), np.nan)
        m[di, pos] = self.values[name]
        if daylight_only:
            s = self.daylight_window[0] * 60 // self.resolution_minutes
            m = m[:, s:s + self.daylight_steps]
        return dates, m

    def daylight_mask(self):
        s, e = self.daylight_window
        mod = self.minute_of_day()
        return (mod >= s * 60) & (mod < e * 60)

    def select_days(self, first, last):
        """Sub-dataset covering dates first..last inclusive."""
        day = self.timestamps.astype("datetime64[D]")
        keep = (day >= np.datetime64(first, "D")) & (day <= np.datetime64(last, "D"))
        if not keep.any():
            raise GapError(f"no samples between {first} and {last}", day=first)
        return Dataset(self.timestamps[keep], {f: self.values[f][keep] for f in FIELDS},
                       self.resolution_minutes, self.daylight_window, self.utc_offset_minutes)

    # --- output ----------------------------------------------------------

    def to_csv(self, stream, schema=None, float_format="%.6f"):
        schema = {**DEFAULT_SCHEMA, **(schema or {})}
        w = csv.writer(stream, lineterminator="\n")
        w.writerow([schema["timestamp"]] + [schema[f] for f in FIELDS])
        suffix = ""
        if self.utc_offset_minutes is not None:
            sign = "+" if self.utc_offset_minutes >= 0 else "-"
            hh, mm = divmod(abs(self.utc_offset_minutes), 60)
            suffix = f"{sign}{hh:02d}:{mm:02d}"
        cols = [self.values[f] for f in FIELDS]
        for i, t in enumerate(self.timestamps.astype(str)):
            row = [t + suffix]
            for c in cols:
                v = c[i]
                row.append("" if math.isnan(v) else float_format % v)
            w.writerow(row)


def read_csv(path, schema=None, resolution_minutes=None, daylight_window=(7, 17)):
    with open(path, newline="") as fh:
        records = parse_records(fh, schema)
    return Dataset.from_records(records, resolution_minutes, daylight_window)


# --- cleaning --------------------------------------------------------------

def reconstruct_missing(dataset, k=3):
    """Fill gaps with the mean of the k most similar days at the same time of day.

    Day similarity is the RMS difference over entries present in both days,
    with every field scaled by its dataset-wide standard deviation. Candidate
    days must be complete in the field being filled.
    """
    if k < 1:
        raise ValueError("k must be positive")
    dates, _, _ = dataset._day_positions()
    mats = {f: dataset.day_matrix(f)[1] for f in FIELDS}
    present = {f: ~np.isnan(dataset.values[f]) for f in FIELDS}
    if not any((~p).any() for p in present.values()):
        return dataset
    scaled = []
    for f in FIELDS:
        sd = np.nanstd(dataset.values[f]) if present[f].any() else 0.0
        scaled.append(mats[f] / (sd if sd > 0 else 1.0))
    S = np.concatenate(scaled, axis=1)
    ok = ~np.isnan(S)
    Sz = np.where(ok, S, 0.0)
    # pairwise RMS distance over shared entries
    shared = ok.astype(np.float64) @ ok.T.astype(np.float64)
    sq = (Sz * Sz) @ ok.T.astype(np.float64)
    d2 = sq + sq.T - 2.0 * (Sz @ Sz.T)
    with np.errstate(invalid="ignore", divide="ignore"):
        dist = np.where(shared > 0, np.maximum(d2, 0.0) / shared, np.inf)
    new_values = {}
    _, di, pos = dataset._day_positions()
    for f in FIELDS:
        if present[f].all():
            continue
        if not present[f].any():
            raise IrrecoverableFieldError(f"field {f} is missing for the entire dataset")
        M = mats[f]
        # days with every grid point present in this field
        complete = ~np.isnan(M).any(axis=1)
        if complete.sum() < k:
            raise IrrecoverableFieldError(
                f"field {f}: only {int(complete.sum())} complete days, need k={k}")
        filled = M.copy()
        for d in np.flatnonzero(np.isnan(M).any(axis=1)):
            cand = np.flatnonzero(complete)
            order = np.argsort(dist[d, cand], kind="stable")
            nn = cand[order[:k]]
            gaps = np.isnan(M[d])
            filled[d, gaps] = M[nn][:, gaps].mean(axis=0)
        a = filled[di, pos]
        # original values are never altered
        a = np.where(present[f], dataset.values[f], a)
        new_values[f] = a
    return dataset.replace(values=new_values)


def resample(dataset, target_resolution_minutes):
    """Window means on a coarser grid, windows aligned to midnight, labelled by start."""
    tgt = int(target_resolution_minutes)
    src = dataset.resolution_minutes
    if tgt not in RESOLUTIONS:
        raise ResolutionError(f"target resolution must be one of {RESOLUTIONS}")
    if tgt % src:
        raise ResolutionError(f"{tgt} min is not a multiple of {src} min")
    if tgt == src:
        return dataset
    ts = dataset.timestamps
    day = ts.astype("datetime64[D]")
    win = day + ((dataset.minute_of_day() // tgt) * tgt).astype("timedelta64[m]")
    starts, inv = np.unique(win, return_inverse=True)
    grid = np.arange(starts[0], starts[-1] + np.timedelta64(tgt, "m"),
                     np.timedelta64(tgt, "m"))
    gi = np.searchsorted(grid, starts)[inv]
    vals = {}
    for f in FIELDS:
        v = dataset.values[f]
        ok = ~np.isnan(v)
        total = np.bincount(gi, weights=np.where(ok, v, 0.0), minlength=grid.size)
        count = np.bincount(gi, weights=ok.astype(np.float64), minlength=grid.size)
        with np.errstate(invalid="ignore", divide="ignore"):
            vals[f] = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return Dataset(grid, vals, tgt, dataset.daylight_window, dataset.utc_offset_minutes)


def apply_night_zero(dataset):
    """Set pv_power to exactly 0 outside the daylight window."""
    night = ~dataset.daylight_mask()
    if not night.any():
        return dataset
    pv = np.where(night, 0.0, dataset.values["pv_power"])
    return dataset.replace(values={"pv_power": pv})


# --- patterns ----------------------------------------------------------------

@dataclass(frozen=True)
class Normalization:
    """Per-column min-max map to [-1, 1]; a zero-span column maps to 0."""

    low: np.ndarray
    high: np.ndarray

    @classmethod
    def fit(cls, data):
        data = np.asarray(data, dtype=np.float64)
        return cls(data.min(axis=0), data.max(axis=0))

    def apply(self, x):
        span = self.high - self.low
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, 2.0 * (np.asarray(x) - self.low) / safe - 1.0, 0.0)

    def invert(self, y):
        span = self.high - self.low
        return np.where(span > 0, (np.asarray(y) + 1.0) * 0.5 * span + self.low, self.low)

    def to_dict(self):
        return {"low": self.low.tolist(), "high": self.high.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["low"], dtype=float), np.asarray(d["high"], dtype=float))


@dataclass
class PatternSet:
    inputs: np.ndarray
    targets: np.ndarray
    input_norm: Normalization
    target_norm: Normalization
    days: list = field(default_factory=list)
    feature_names: tuple = ()

    @property
    def normalization(self):
        return {"inputs": self.input_norm, "targets": self.target_norm}

    def __len__(self):
        return self.inputs.shape[0]


def feature_names(lags):
    return tuple(f"lag{l}" for l in lags) + MET_FIELDS


def daylight_profiles(dataset, name="pv_power"):
    """{date: daylight series} for every date in the dataset."""
    dates, m = dataset.day_matrix(name, daylight_only=True)
    return {d: m[i] for i, d in enumerate(dates)}


def day_components(dataset, spec=None, mode="symmetric"):
    """{date: {band: daylight series}} of pv power.

    With a wavelet spec the bands are the full-length projections A_J,
    D_J..D_1 (they sum to the profile); without one, the single band 'P'
    is the raw profile. Days with gaps are left out.
    """
    out = {}
    for d, prof in daylight_profiles(dataset, "pv_power").items():
        if np.isnan(prof).any():
            continue
        if spec is None:
            out[d] = {"P": prof}
        else:
            out[d] = wavelet.split_components(wavelet.decompose(prof, spec, mode))
    return out


def _met_matrix(dataset):
    """{date: steps x 4 meteorological matrix over daylight}."""
    mats = [dataset.day_matrix(f, daylight_only=True) for f in MET_FIELDS]
    dates = mats[0][0]
    stack = np.stack([m for _, m in mats], axis=2)
    return {d: stack[i] for i, d in enumerate(dates)}


def raw_features(components, met, day, band, lags):
    """Un-normalized feature rows (steps x n_features) for one target day."""
    day = np.datetime64(day, "D")
    cols = []
    for l in lags:
        prev = day - np.timedelta64(l, "D")
        if prev not in components:
            raise GapError(f"no complete history for {prev} (lag {l} of {day})", day=str(prev))
        cols.append(components[prev][band])
    if day not in met or np.isnan(met[day]).any():
        raise GapError(f"incomplete meteorological inputs for {day}", day=str(day))
    return np.column_stack(cols + [met[day]])


def build_patterns(dataset, components=None, lags=(1, 2), days=None, normalization=None,
                   spec=None):
    """Training patterns per band: {band: PatternSet}.

    One row per daylight step of each target day. Inputs are the band value at
    the same step ``l`` days earlier for every lag, then the target-day
    irradiance, temperature, wind speed and humidity; the target is the band
    value on the target day. Extrema come from these rows unless an existing
    ``normalization`` ({band: (input_norm, target_norm)}) is passed.
    """
    lags = tuple(int(l) for l in lags)
    if not lags or min(lags) < 1:
        raise ShapeError("lags must be positive day offsets")
    if components is None:
        components = day_components(dataset, spec)
    met = _met_matrix(dataset)
    all_dates = list(dataset.dates())
    if days is None:
        first = all_dates[0] + np.timedelta64(max(lags), "D")
        days = [d for d in all_dates if d >= first]
    days = [np.datetime64(d, "D") for d in days]
    if not days:
        raise GapError("no target days with enough history")
    bands = None
    for d in days:
        if d not in components:
            raise GapError(f"target day {d} is incomplete", day=str(d))
        if bands is None:
            bands = tuple(components[d])
    out = {}
    for band in bands:
        X = np.vstack([raw_features(components, met, d, band, lags) for d in days])
        Y = np.concatenate([components[d][band] for d in days])[:, None]
        if normalization is None:
            nin, nout = Normalization.fit(X), Normalization.fit(Y)
        else:
            nin, nout = normalization[band]
        out[band] = PatternSet(nin.apply(X), nout.apply(Y), nin, nout,
                               [str(d) for d in days], feature_names(lags))
    return out
