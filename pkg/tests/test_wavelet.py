import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from pvnne import wavelet
from pvnne.errors import IntegrityError, NumericError, SpecError, WaveletLengthError

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def signals(min_size=8, max_size=120):
    return st.integers(min_size, max_size).flatmap(
        lambda n: arrays(np.float64, n, elements=finite))


def test_haar_constant_signal():
    spec = wavelet.WaveletSpec("haar", levels=1)
    dec = wavelet.decompose([1.0, 1.0, 1.0, 1.0], spec, mode="periodic")
    s2 = math.sqrt(2.0)
    assert np.allclose(dec.approximation, [s2, s2], atol=1e-15)
    assert np.allclose(dec.details[0], [0.0, 0.0], atol=1e-15)


def test_haar_step_detail():
    spec = wavelet.WaveletSpec("haar", levels=1)
    dec = wavelet.decompose([3.0, 1.0, 0.0, 0.0], spec, mode="periodic")
    # pair sums and differences, scaled by 1/sqrt(2)
    assert np.allclose(dec.approximation, [4 / math.sqrt(2), 0.0], atol=1e-15)
    assert abs(dec.details[0][0]) == pytest.approx(2 / math.sqrt(2), abs=1e-15)


@pytest.mark.parametrize("name", ["haar", "db2", "db4"])
def test_taps_orthonormal(name):
    lo = np.asarray(wavelet.WaveletSpec(name).lowpass)
    assert lo.sum() == pytest.approx(math.sqrt(2), abs=1e-14)
    for shift in range(0, len(lo), 2):
        dot = lo[shift:] @ lo[:len(lo) - shift]
        assert dot == pytest.approx(1.0 if shift == 0 else 0.0, abs=1e-14)


@pytest.mark.parametrize("name", ["haar", "db2", "db4"])
@given(x=arrays(np.float64, 64, elements=finite))
def test_parseval_periodic(name, x):
    spec = wavelet.WaveletSpec(name, levels=3)
    dec = wavelet.decompose(x, spec, mode="periodic")
    energy = sum(float(c @ c) for c in (dec.approximation,) + dec.details)
    assert energy == pytest.approx(float(x @ x), rel=1e-10, abs=1e-9)


@pytest.mark.parametrize("mode", wavelet.MODES)
@given(x=signals())
def test_round_trip(mode, x):
    dec = wavelet.decompose(x, mode=mode)
    assert np.allclose(wavelet.reconstruct(dec), x, rtol=0, atol=1e-9)


@pytest.mark.parametrize("mode", wavelet.MODES)
@given(x=signals())
def test_components_sum_to_signal(mode, x):
    comps = wavelet.split_components(wavelet.decompose(x, mode=mode))
    assert list(comps) == ["A3", "D3", "D2", "D1"]
    assert all(len(v) == len(x) for v in comps.values())
    assert np.allclose(wavelet.merge_components(comps), x, atol=1e-9)


@given(x=arrays(np.float64, 40, elements=finite), y=arrays(np.float64, 40, elements=finite),
       a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_linearity(x, y, a, b):
    d = wavelet.decompose(a * x + b * y)
    dx, dy = wavelet.decompose(x), wavelet.decompose(y)
    for u, v, w in zip((d.approximation,) + d.details, (dx.approximation,) + dx.details,
                       (dy.approximation,) + dy.details):
        assert np.allclose(u, a * v + b * w, atol=1e-8)


@given(x=arrays(np.float64, 64, elements=finite))
def test_periodic_even_shift_equivariance(x):
    # shifting by 2**levels shifts every band's coefficients by one per level scale
    spec = wavelet.WaveletSpec("db2", levels=2)
    d0 = wavelet.decompose(x, spec, mode="periodic")
    d1 = wavelet.decompose(np.roll(x, 4), spec, mode="periodic")
    assert np.allclose(np.roll(d0.details[0], 2), d1.details[0], atol=1e-9)
    assert np.allclose(np.roll(d0.details[1], 1), d1.details[1], atol=1e-9)
    assert np.allclose(np.roll(d0.approximation, 1), d1.approximation, atol=1e-9)


def test_thousand_random_signals(rng):
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(8, 200))
        x = rng.normal(size=n) * 100
        for mode in wavelet.MODES:
            worst = max(worst, np.max(np.abs(wavelet.reconstruct(wavelet.decompose(x, mode=mode)) - x)))
    assert worst < 1e-9


def test_constant_signal_lives_in_approximation():
    comps = wavelet.split_components(wavelet.decompose(np.full(40, 7.0)))
    assert np.allclose(comps["A3"], 7.0, atol=1e-12)
    for b in ("D1", "D2", "D3"):
        assert np.allclose(comps[b], 0.0, atol=1e-12)


def test_json_round_trip():
    x = np.sin(np.arange(41) / 3.0)
    dec = wavelet.decompose(x)
    back = wavelet.WaveletDecomposition.from_dict(json.loads(json.dumps(dec.to_dict())))
    assert np.array_equal(wavelet.reconstruct(back), wavelet.reconstruct(dec))
    spec = wavelet.WaveletSpec("db2", levels=2)
    assert wavelet.WaveletSpec.from_dict(spec.to_dict()) == spec


def test_tampered_decomposition_rejected():
    dec = wavelet.decompose(np.arange(40.0))
    bad = wavelet.WaveletDecomposition(dec.approximation, dec.details[:2], dec.original_length,
                                       dec.spec, dec.extension, dec.level_lengths)
    with pytest.raises(IntegrityError):
        wavelet.reconstruct(bad)
    bad = wavelet.WaveletDecomposition(dec.approximation, (dec.details[0][:-1],) + dec.details[1:],
                                       dec.original_length, dec.spec, dec.extension,
                                       dec.level_lengths)
    with pytest.raises(IntegrityError):
        wavelet.reconstruct(bad)


def test_errors():
    with pytest.raises(WaveletLengthError):
        wavelet.decompose(np.ones(7))
    with pytest.raises(NumericError):
        wavelet.decompose([1.0, np.nan] + [0.0] * 10)
    with pytest.raises(SpecError):
        wavelet.WaveletSpec("db99")
    with pytest.raises(SpecError):
        wavelet.WaveletSpec("custom", lowpass=(0.5, 0.5))
    with pytest.raises(SpecError):
        wavelet.decompose(np.ones(16), mode="zero")
    with pytest.raises(SpecError):
        wavelet.WaveletSpec(levels=0)


def test_band_names():
    assert wavelet.band_names(3) == ("A3", "D3", "D2", "D1")
    assert wavelet.decompose(np.ones(16)).bands == ("A3", "D3", "D2", "D1")


def test_zero_signal_and_zero_bands():
    dec = wavelet.decompose(np.zeros(50))
    assert all(np.array_equal(c, np.zeros_like(c)) for c in (dec.approximation,) + dec.details)
    assert np.array_equal(wavelet.reconstruct(dec), np.zeros(50))


def test_parseval_length_512(rng):
    x = rng.normal(size=512)
    dec = wavelet.decompose(x, wavelet.WaveletSpec("db4", levels=3), mode="periodic")
    energy = sum(float(np.dot(c, c)) for c in (dec.approximation,) + dec.details)
    assert energy == pytest.approx(float(np.dot(x, x)), rel=1e-9)


def test_approximation_only_on_noisy_ramp(rng):
    x = np.linspace(0.0, 10.0, 256) + rng.normal(scale=0.5, size=256)
    dec = wavelet.decompose(x, wavelet.WaveletSpec("db4", levels=3), mode="periodic")
    smooth = wavelet.split_components(dec)["A3"]
    # smoother than the input
    assert np.sum(np.abs(np.diff(smooth))) < 0.5 * np.sum(np.abs(np.diff(x)))
    residual = x - smooth
    detail_energy = sum(float(d @ d) for d in dec.details)
    assert float(residual @ residual) == pytest.approx(detail_energy, rel=1e-9)
