"""Global-best particle swarm optimizer and PSO training of networks."""

import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import ObjectiveError, ShapeError, SpecError
from .neural import TrainReport, unflatten


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 30
    max_iterations: int = 200
    inertia_start: float = 0.9
    inertia_end: float = 0.4
    cognitive_c1: float = 2.0
    social_c2: float = 2.0
    position_bounds: tuple = (-5.0, 5.0)
    velocity_clamp: float = 0.2
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if self.swarm_size < 2:
            raise SpecError("swarm_size must be >= 2")
        if self.max_iterations < 1:
            raise SpecError("max_iterations must be >= 1")
        lo, hi = self.position_bounds
        if not lo < hi:
            raise SpecError("position bounds need low < high")
        if not 0.0 < self.velocity_clamp <= 1.0:
            raise SpecError("velocity_clamp must be in (0, 1]")


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_value: float
    value_history: list = field(default_factory=list)
    final_positions: np.ndarray = None


def _rng(config):
    return np.random.default_rng(np.random.SeedSequence([config.seed, config.stream]))


def pso_minimize(objective, dimension, config=None, *, vectorized=False,
                 initial_positions=None, rng=None):
    """Minimize ``objective`` over the bound box.

    ``objective`` maps a vector to a float, or with ``vectorized=True`` maps a
    (swarm, dimension) array to a length-swarm array. Random factors for an
    iteration are drawn before any evaluation, so the trajectory depends only
    on the seed.
    """
    config = config or PsoConfig()
    if dimension < 1:
        raise SpecError("dimension must be >= 1")
    rng = rng if rng is not None else _rng(config)
    P, D = config.swarm_size, int(dimension)
    lo, hi = (float(b) for b in config.position_bounds)
    vmax = config.velocity_clamp * (hi - lo)

    if initial_positions is None:
        x = rng.uniform(lo, hi, size=(P, D))
    else:
        x = np.array(initial_positions, dtype=np.float64)
        if x.shape != (P, D):
            raise ShapeError(f"initial positions must be {(P, D)}, got {x.shape}")
        np.clip(x, lo, hi, out=x)
    v = np.zeros((P, D))

    def evaluate(pos, it):
        if vectorized:
            f = np.asarray(objective(pos), dtype=np.float64)
        else:
            f = np.array([objective(p) for p in pos], dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(f))
        if bad.size:
            raise ObjectiveError(f"objective not finite for particle {bad[0]} at iteration {it}",
                                 particle=int(bad[0]), iteration=it)
        return f

    f = evaluate(x, 0)
    pbest, pval = x.copy(), f.copy()
    g = int(np.argmin(pval))
    gbest, gval = pbest[g].copy(), float(pval[g])
    history = []
    T = config.max_iterations
    w0, w1 = config.inertia_start, config.inertia_end
    c1, c2 = config.cognitive_c1, config.social_c2
    for it in range(T):
        w = w0 - (w0 - w1) * (it / (T - 1) if T > 1 else 1.0)
        r1 = rng.random((P, D))
        r2 = rng.random((P, D))
        v = w * v + c1 * r1 * (pbest - x) + c2 * r2 * (gbest - x)
        np.clip(v, -vmax, vmax, out=v)
        x = x + v
        np.clip(x, lo, hi, out=x)
        f = evaluate(x, it + 1)
        better = f < pval
        pbest[better] = x[better]
        pval[better] = f[better]
        g = int(np.argmin(pval))
        if pval[g] < gval:
            gbest, gval = pbest[g].copy(), float(pval[g])
        history.append(gval)
    return PsoResult(gbest, gval, history, x)


def initial_swarm(network, config, rng):
    """Particle 0 is the network itself; the rest are fresh uniform inits."""
    spec = network.spec
    s = spec.layer_sizes
    P = config.swarm_size
    X = np.zeros((P, spec.n_params))
    X[0] = network.flatten()
    off = 0
    for l in range(len(s) - 1):
        nw = s[l + 1] * s[l]
        r = 1.0 / math.sqrt(s[l])
        X[1:, off:off + nw] = rng.uniform(-r, r, size=(P - 1, nw))
        off += nw + s[l + 1]
    return X


def train_pso(network, patterns, config=None):
    """Fit the network weights by minimizing batch mse with the swarm."""
    config = config or PsoConfig()
    spec = network.spec
    if spec.n_params == 0:
        raise SpecError("network has no parameters")
    X = np.ascontiguousarray(patterns.inputs, dtype=np.float64)
    Y = np.asarray(patterns.targets, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    Y = np.ascontiguousarray(Y)
    if X.shape[0] == 0:
        raise ShapeError("no training patterns")
    if X.shape[1] != spec.layer_sizes[0] or Y.shape != (X.shape[0], spec.layer_sizes[-1]):
        raise ShapeError("patterns do not match network layer sizes")
    sizes, acts = spec.layer_sizes, spec.activation_codes

    def objective(positions):
        return kernels.swarm_mse(positions, sizes, acts, X, Y)

    rng = _rng(config)
    start = initial_swarm(network, config, rng)
    res = pso_minimize(objective, spec.n_params, config, vectorized=True,
                       initial_positions=start, rng=rng)
    trained = unflatten(spec, res.best_position)
    return trained, TrainReport(config.max_iterations, res.best_value,
                                list(res.value_history), "max-epochs")
