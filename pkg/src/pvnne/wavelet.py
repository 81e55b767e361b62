"""Multi-level discrete wavelet transform (Mallat filter bank).

The analysis stage correlates the signal with an orthonormal lowpass/highpass
pair and keeps every second sample; synthesis is the transpose. Two boundary
policies are provided:

``periodic``
    circular convolution. The transform is orthogonal for even lengths, so
    coefficient energy equals signal energy.
``symmetric``
    the signal is mirrored (half-sample symmetric) by ``len(filter) - 1``
    samples on both sides before a periodic stage; synthesis inverts the
    periodic stage and crops the mirror padding. Redundant but exact, with
    fewer edge artefacts on short day profiles.

For forecasting, :func:`split_components` projects a decomposition back to
full-length band signals (A_J, D_J, ..., D_1) whose sum is the input; the
inverse, :func:`merge_components`, is the plain sum (synthesis is linear).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import IntegrityError, NumericError, SpecError, WaveletLengthError

_SQRT2 = math.sqrt(2.0)
_SQRT3 = math.sqrt(3.0)

# Scaling (lowpass) filters, conventional Daubechies ordering.
_LOWPASS = {
    "haar": (1.0 / _SQRT2, 1.0 / _SQRT2),
    "db2": (
        (1.0 + _SQRT3) / (4.0 * _SQRT2),
        (3.0 + _SQRT3) / (4.0 * _SQRT2),
        (3.0 - _SQRT3) / (4.0 * _SQRT2),
        (1.0 - _SQRT3) / (4.0 * _SQRT2),
    ),
    "db4": (
        0.2303778133088965,
        0.7148465705529157,
        0.6308807679298589,
        -0.027983769416859854,
        -0.18703481171909309,
        0.030841381835560764,
        0.0328830116668852,
        -0.010597401785069032,
    ),
}

MODES = ("symmetric", "periodic")


def _qmf(lowpass):
    n = len(lowpass)
    return tuple((-1.0) ** k * lowpass[n - 1 - k] for k in range(n))


def _check_taps(name, lowpass, tol=1e-12):
    lo = np.asarray(lowpass)
    L = len(lo)
    if abs(float(lo @ lo) - 1.0) > tol:
        raise SpecError(f"{name}: lowpass taps not unit norm")
    if abs(float(lo.sum()) - _SQRT2) > tol:
        raise SpecError(f"{name}: lowpass taps do not sum to sqrt(2)")
    for shift in range(2, L, 2):
        if abs(float(lo[shift:] @ lo[:L - shift])) > tol:
            raise SpecError(f"{name}: lowpass taps not orthogonal at shift {shift}")


for _name, _taps in _LOWPASS.items():
    _check_taps(_name, _taps)


@dataclass(frozen=True)
class WaveletSpec:
    name: str = "db4"
    lowpass: tuple = field(default=None)
    highpass: tuple = field(default=None)
    levels: int = 3

    def __post_init__(self):
        if self.lowpass is None:
            if self.name not in _LOWPASS:
                raise SpecError(f"unknown wavelet {self.name!r}; known: {sorted(_LOWPASS)}")
            object.__setattr__(self, "lowpass", _LOWPASS[self.name])
        object.__setattr__(self, "lowpass", tuple(float(t) for t in self.lowpass))
        if self.highpass is None:
            object.__setattr__(self, "highpass", _qmf(self.lowpass))
        object.__setattr__(self, "highpass", tuple(float(t) for t in self.highpass))
        if len(self.lowpass) != len(self.highpass) or len(self.lowpass) < 2:
            raise SpecError("lowpass and highpass must have equal length >= 2")
        if self.levels < 1:
            raise SpecError("levels must be >= 1")
        _check_taps(self.name, self.lowpass)
        if not np.allclose(self.highpass, _qmf(self.lowpass), rtol=0, atol=1e-15):
            raise SpecError("highpass must be the quadrature mirror of lowpass")

    @property
    def filter_length(self):
        return len(self.lowpass)

    def to_dict(self):
        return {"name": self.name, "levels": self.levels,
                "lowpass": list(self.lowpass), "highpass": list(self.highpass)}

    @classmethod
    def from_dict(cls, d):
        return cls(name=d["name"], levels=int(d["levels"]),
                   lowpass=tuple(d["lowpass"]), highpass=tuple(d["highpass"]))


@dataclass(frozen=True)
class WaveletDecomposition:
    """Coefficients of a ``levels``-deep decomposition.

    ``details[0]`` is D1 (finest), ``details[-1]`` is D_levels.
    ``level_lengths[j]`` is the length of the signal entering stage ``j``.
    """

    approximation: np.ndarray
    details: tuple
    original_length: int
    spec: WaveletSpec
    extension: str = "symmetric"
    level_lengths: tuple = ()

    @property
    def bands(self):
        """Band names coarse to fine, e.g. ('A3', 'D3', 'D2', 'D1')."""
        J = len(self.details)
        return (f"A{J}",) + tuple(f"D{j}" for j in range(J, 0, -1))

    def to_dict(self):
        return {
            "approximation": self.approximation.tolist(),
            "details": [d.tolist() for d in self.details],
            "original_length": self.original_length,
            "spec": self.spec.to_dict(),
            "extension": self.extension,
            "level_lengths": list(self.level_lengths),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            approximation=np.asarray(d["approximation"], dtype=float),
            details=tuple(np.asarray(x, dtype=float) for x in d["details"]),
            original_length=int(d["original_length"]),
            spec=WaveletSpec.from_dict(d["spec"]),
            extension=d["extension"],
            level_lengths=tuple(d["level_lengths"]),
        )


def band_names(levels):
    return (f"A{levels}",) + tuple(f"D{j}" for j in range(levels, 0, -1))


def _mirror_pad(x, pad):
    # half-sample symmetric: x[-1] = x[0], x[-2] = x[1], ...
    n = len(x)
    idx = np.arange(-pad, n + pad)
    period = 2 * n
    idx = np.mod(idx, period)
    idx = np.where(idx >= n, period - 1 - idx, idx)
    return x[idx]


def _stage_input(x, mode, L):
    """Signal actually fed to the circular stage, and its even length."""
    if mode == "periodic":
        if len(x) % 2:
            x = np.append(x, x[-1])
        return x
    ext = _mirror_pad(x, L - 1)
    if len(ext) % 2:
        ext = np.append(ext, ext[-1])
    return ext


def _coeff_length(n, mode, L):
    if mode == "periodic":
        return (n + 1) // 2
    return (n + 2 * (L - 1) + 1) // 2


def decompose(signal, spec=None, mode="symmetric"):
    """Iterated analysis filter bank."""
    spec = spec or WaveletSpec()
    if mode not in MODES:
        raise SpecError(f"unknown extension mode {mode!r}")
    x = np.asarray(signal, dtype=np.float64).ravel()
    if len(x) < 2 ** spec.levels:
        raise WaveletLengthError(
            f"signal length {len(x)} < 2**levels = {2 ** spec.levels}")
    if not np.all(np.isfinite(x)):
        raise NumericError("signal contains non-finite values")
    lo = np.asarray(spec.lowpass)
    hi = np.asarray(spec.highpass)
    L = len(lo)
    details = []
    lengths = []
    a = x
    for _ in range(spec.levels):
        lengths.append(len(a))
        a, d = kernels.dwt_periodic(_stage_input(a, mode, L), lo, hi)
        details.append(d)
    return WaveletDecomposition(
        approximation=a, details=tuple(details), original_length=len(x),
        spec=spec, extension=mode, level_lengths=tuple(lengths))


def _check_consistency(dec):
    spec = dec.spec
    L = spec.filter_length
    if len(dec.details) != spec.levels or len(dec.level_lengths) != spec.levels:
        raise IntegrityError("number of detail bands does not match levels")
    if dec.level_lengths[0] != dec.original_length:
        raise IntegrityError("level bookkeeping does not match original length")
    for j, n in enumerate(dec.level_lengths):
        expect = _coeff_length(n, dec.extension, L)
        if len(dec.details[j]) != expect:
            raise IntegrityError(f"D{j + 1} has length {len(dec.details[j])}, expected {expect}")
        nxt = dec.level_lengths[j + 1] if j + 1 < spec.levels else len(dec.approximation)
        if nxt != expect:
            raise IntegrityError(f"level {j + 1} approximation length mismatch")


def reconstruct(decomposition):
    """Iterated synthesis bank; exact inverse of :func:`decompose`."""
    dec = decomposition
    if dec.extension not in MODES:
        raise IntegrityError(f"unknown extension {dec.extension!r}")
    _check_consistency(dec)
    lo = np.asarray(dec.spec.lowpass)
    hi = np.asarray(dec.spec.highpass)
    L = len(lo)
    a = np.asarray(dec.approximation, dtype=np.float64)
    for j in range(dec.spec.levels - 1, -1, -1):
        full = kernels.idwt_periodic(a, dec.details[j], lo, hi)
        n = dec.level_lengths[j]
        if dec.extension == "periodic":
            a = full[:n]
        else:
            a = full[L - 1:L - 1 + n]
    return a


def _zero_like(dec, keep):
    """Copy of ``dec`` with every band except ``keep`` zeroed."""
    J = dec.spec.levels
    approx = dec.approximation if keep == f"A{J}" else np.zeros_like(dec.approximation)
    details = tuple(d if keep == f"D{j + 1}" else np.zeros_like(d)
                    for j, d in enumerate(dec.details))
    return WaveletDecomposition(approx, details, dec.original_length, dec.spec,
                                dec.extension, dec.level_lengths)


def split_components(decomposition):
    """Full-length band signals {band: series}; they sum to the original."""
    return {band: reconstruct(_zero_like(decomposition, band))
            for band in decomposition.bands}


def merge_components(components):
    """Inverse of :func:`split_components`."""
    series = [np.asarray(v, dtype=np.float64) for v in components.values()]
    out = np.zeros_like(series[0])
    for s in series:
        out = out + s
    return out
