"""Feedforward networks, backprop gradients, and the GD / Levenberg-Marquardt trainers.

Parameters are flattened layer by layer: the weight matrix of each transition
(fan_out x fan_in, row-major) followed by its bias vector. Every trainer,
the PSO objective and the compiled kernels share this order.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .errors import DivergenceError, NumericError, ShapeError, SpecError

ACTIVATIONS = {"linear": 0, "tanh": 1, "sigmoid": 2}
FORMAT_TAG = "pvnne.network"
FORMAT_VERSION = 1
MU_MAX = 1e10


@dataclass(frozen=True)
class NetworkSpec:
    layer_sizes: tuple
    hidden_activation: str = "tanh"
    output_activation: str = "linear"
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 2:
            raise SpecError("need at least an input and an output layer")
        if any(s <= 0 for s in sizes):
            raise SpecError(f"layer sizes must be positive, got {sizes}")
        for tag in (self.hidden_activation, self.output_activation):
            if tag not in ACTIVATIONS:
                raise SpecError(f"unknown activation {tag!r}")

    @property
    def activation_codes(self):
        n = len(self.layer_sizes) - 1
        return tuple([ACTIVATIONS[self.hidden_activation]] * (n - 1)
                     + [ACTIVATIONS[self.output_activation]])

    @property
    def n_params(self):
        s = self.layer_sizes
        return sum(s[i + 1] * s[i] + s[i + 1] for i in range(len(s) - 1))


@dataclass
class Network:
    weights: list
    biases: list
    spec: NetworkSpec

    def __post_init__(self):
        s = self.spec.layer_sizes
        if len(self.weights) != len(s) - 1 or len(self.biases) != len(s) - 1:
            raise ShapeError("one weight matrix and bias vector per layer transition")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (s[l + 1], s[l]) or b.shape != (s[l + 1],):
                raise ShapeError(f"layer {l}: got W{W.shape}, b{b.shape}")

    def flatten(self):
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def copy(self):
        return Network([W.copy() for W in self.weights],
                       [b.copy() for b in self.biases], self.spec)

    def with_params(self, params):
        return unflatten(self.spec, params)

    def to_dict(self):
        return {
            "format": FORMAT_TAG,
            "version": FORMAT_VERSION,
            "layer_sizes": list(self.spec.layer_sizes),
            "hidden_activation": self.spec.hidden_activation,
            "output_activation": self.spec.output_activation,
            "seed": self.spec.seed,
            "params": self.flatten().tolist(),
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT_TAG:
            raise SpecError("not a serialized network")
        if d.get("version") != FORMAT_VERSION:
            raise SpecError(f"unsupported network format version {d.get('version')}")
        spec = NetworkSpec(tuple(d["layer_sizes"]), d["hidden_activation"],
                           d["output_activation"], int(d["seed"]))
        return unflatten(spec, np.asarray(d["params"], dtype=np.float64))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.flatten(), other.flatten())


@dataclass
class TrainReport:
    epochs_run: int
    final_mse: float
    mse_history: list = field(default_factory=list)
    terminated_by: str = "max-epochs"


def unflatten(spec, params):
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (spec.n_params,):
        raise ShapeError(f"expected {spec.n_params} parameters, got {params.shape}")
    s = spec.layer_sizes
    weights, biases = [], []
    off = 0
    for l in range(len(s) - 1):
        fin, fout = s[l], s[l + 1]
        weights.append(params[off:off + fout * fin].reshape(fout, fin).copy())
        off += fout * fin
        biases.append(params[off:off + fout].copy())
        off += fout
    return Network(weights, biases, spec)


def init_network(spec):
    """Uniform weights in +-1/sqrt(fan_in), zero biases, seeded by ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    s = spec.layer_sizes
    weights = []
    for l in range(len(s) - 1):
        r = 1.0 / math.sqrt(s[l])
        weights.append(rng.uniform(-r, r, size=(s[l + 1], s[l])))
    biases = [np.zeros(s[l + 1]) for l in range(len(s) - 1)]
    return Network(weights, biases, spec)


def _as_batch(network, X):
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != network.spec.layer_sizes[0]:
        raise ShapeError(f"input width {X.shape[-1]} != {network.spec.layer_sizes[0]}")
    return X, single


def forward(network, inputs):
    """Evaluate the network on one input vector or a batch of rows."""
    X, single = _as_batch(network, inputs)
    out = kernels.mlp_forward(network.flatten(), network.spec.layer_sizes,
                              network.spec.activation_codes, X)
    return out[0] if single else out


def _check_pair(network, inputs, targets):
    X, _ = _as_batch(network, inputs)
    Y = np.asarray(targets, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape != (X.shape[0], network.spec.layer_sizes[-1]):
        raise ShapeError(f"targets shape {Y.shape} does not match {X.shape[0]} x "
                         f"{network.spec.layer_sizes[-1]}")
    return X, Y


def mse(network, inputs, targets):
    X, Y = _check_pair(network, inputs, targets)
    r = forward(network, X) - Y
    return float(np.mean(r * r))


def _dact(a, code):
    if code == 1:
        return 1.0 - a * a
    if code == 2:
        return a * (1.0 - a)
    return np.ones_like(a)


def _act(z, code):
    if code == 1:
        return np.tanh(z)
    if code == 2:
        return 1.0 / (1.0 + np.exp(-z))
    return z


def _mse_and_gradient(network, X, Y):
    codes = network.spec.activation_codes
    activ = [X]
    for W, b, c in zip(network.weights, network.biases, codes):
        activ.append(_act(activ[-1] @ W.T + b, c))
    r = activ[-1] - Y
    n, m = Y.shape
    delta = (2.0 / (n * m)) * r * _dact(activ[-1], codes[-1])
    grads = []
    for l in range(len(network.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))
        grads.append((delta.T @ activ[l]).ravel())
        if l > 0:
            delta = (delta @ network.weights[l]) * _dact(activ[l], codes[l - 1])
    grads.reverse()
    return float(np.mean(r * r)), np.concatenate(grads)


def gradient(network, inputs, targets):
    """d(mse)/d(params) over the batch, in the flattening order."""
    X, Y = _check_pair(network, inputs, targets)
    return _mse_and_gradient(network, X, Y)[1]


def _patterns(network, patterns):
    X, Y = _check_pair(network, patterns.inputs, patterns.targets)
    if X.shape[0] == 0:
        raise ShapeError("no training patterns")
    return X, Y


def train_backprop(network, patterns, learning_rate=0.1, max_epochs=1000, tolerance=0.0):
    """Full-batch gradient descent on the mean squared error.

    The step follows the classic delta rule, i.e. the gradient of half the
    mean squared error: ``params -= learning_rate * gradient / 2``.
    """
    if learning_rate <= 0:
        raise SpecError("learning_rate must be positive")
    X, Y = _patterns(network, patterns)
    net = network.copy()
    params = net.flatten()
    history = []
    reason = "max-epochs"
    epochs = 0
    while True:
        with np.errstate(over="ignore", invalid="ignore"):
            err, g = _mse_and_gradient(net, X, Y)
        if not math.isfinite(err):
            raise DivergenceError(f"mse became non-finite at epoch {epochs}", epoch=epochs)
        history.append(err)
        if err < tolerance:
            reason = "tolerance"
            break
        if epochs >= max_epochs:
            break
        params = params - (0.5 * learning_rate) * g
        net = unflatten(net.spec, params)
        epochs += 1
    return net, TrainReport(epochs, history[-1], history, reason)


def _sse_out(params, spec, X, Y):
    out = kernels.mlp_forward(params, spec.layer_sizes, spec.activation_codes, X)
    r = Y - out
    return float(np.sum(r * r)), r


def train_lm(network, patterns, mu0=1e-3, mu_scale=10.0, max_epochs=100, tolerance=0.0):
    """Levenberg-Marquardt on the sum of squared residuals.

    Each epoch linearizes once and retries the damped step with a growing mu
    until the error decreases; mu above 1e10 ends training as a stall.
    """
    if mu0 <= 0 or mu_scale <= 1:
        raise SpecError("need mu0 > 0 and mu_scale > 1")
    X, Y = _patterns(network, patterns)
    spec = network.spec
    nm = Y.size
    params = network.flatten()
    sse, _ = _sse_out(params, spec, X, Y)
    if not math.isfinite(sse):
        raise DivergenceError("non-finite residuals at start", epoch=0)
    history = [sse / nm]
    mu = mu0
    reason = "max-epochs"
    epochs = 0
    eye = np.eye(spec.n_params)
    while True:
        if history[-1] < tolerance:
            reason = "tolerance"
            break
        if epochs >= max_epochs:
            break
        out, J = kernels.mlp_jacobian(params, spec.layer_sizes, spec.activation_codes, X)
        r = (Y - out).ravel()
        JtJ = J.T @ J
        Jtr = J.T @ r
        accepted = False
        while mu <= MU_MAX:
            try:
                step = np.linalg.solve(JtJ + mu * eye, Jtr)
            except np.linalg.LinAlgError as exc:
                raise NumericError(f"normal equations singular at mu={mu:g}") from exc
            if not np.all(np.isfinite(step)):
                raise NumericError(f"non-finite step at mu={mu:g}")
            trial = params + step
            new_sse, _ = _sse_out(trial, spec, X, Y)
            if math.isfinite(new_sse) and new_sse < sse:
                params, sse = trial, new_sse
                mu /= mu_scale
                accepted = True
                break
            mu *= mu_scale
        if not accepted:
            reason = "stall"
            break
        epochs += 1
        history.append(sse / nm)
    return unflatten(spec, params), TrainReport(epochs, history[-1], history, reason)
