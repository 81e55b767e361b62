"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Workloads are sized like the production hot paths: one daylight profile
through the filter bank, a 20-particle swarm on a month of 15-minute
patterns, and one Levenberg-Marquardt Jacobian.
"""

import argparse
import timeit

import numpy as np

from pvnne import _backend
from pvnne.wavelet import WaveletSpec


def workloads(rng):
    spec = WaveletSpec("db4")
    lo, hi = np.asarray(spec.lowpass), np.asarray(spec.highpass)
    x = rng.normal(size=54)
    a, d = rng.normal(size=27), rng.normal(size=27)

    sizes, acts = (6, 20, 1), (1, 0)
    n_params = 6 * 20 + 20 + 20 + 1
    P = rng.uniform(-1, 1, size=(20, n_params))
    X = rng.uniform(-1, 1, size=(1120, 6))
    Y = rng.uniform(-1, 1, size=(1120, 1))
    return {
        "dwt_periodic": lambda k: k.dwt_periodic(x, lo, hi),
        "idwt_periodic": lambda k: k.idwt_periodic(a, d, lo, hi),
        "mlp_forward": lambda k: k.mlp_forward(P[0], sizes, acts, X),
        "swarm_mse": lambda k: k.swarm_mse(P, sizes, acts, X, Y),
        "mlp_jacobian": lambda k: k.mlp_jacobian(P[0], sizes, acts, X),
    }


def best_time(fn, repeat):
    t = timeit.Timer(fn)
    n, _ = t.autorange()
    return min(t.repeat(repeat=repeat, number=n)) / n


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    py = _backend.get_kernels("python")
    try:
        cy = _backend.get_kernels("cython")
    except ImportError:
        cy = None
        print("compiled kernels not built; timing the numpy fallback only")
    print(f"{'kernel':<15}{'numpy (us)':>12}{'cython (us)':>13}{'speedup':>9}")
    for name, fn in workloads(np.random.default_rng(0)).items():
        tp = best_time(lambda: fn(py), args.repeat) * 1e6
        if cy is None:
            print(f"{name:<15}{tp:>12.1f}")
            continue
        tc = best_time(lambda: fn(cy), args.repeat) * 1e6
        print(f"{name:<15}{tp:>12.1f}{tc:>13.1f}{tp / tc:>8.2f}x")


if __name__ == "__main__":
    main()
