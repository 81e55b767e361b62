from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pvnne import neural as nn
from pvnne.errors import ObjectiveError, ShapeError, SpecError
from pvnne.pso import PsoConfig, initial_swarm, pso_minimize, train_pso


def sphere(x):
    return float(np.sum(x * x))


def rosenbrock(x):
    return float(np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))


def test_sphere_median_over_seeds():
    best = [pso_minimize(sphere, 10, PsoConfig(seed=s)).best_value for s in range(20)]
    assert np.median(best) < 1e-4


def test_rosenbrock_2d():
    res = pso_minimize(rosenbrock, 2, PsoConfig(max_iterations=400, seed=3))
    assert res.best_value < 1e-6
    assert np.allclose(res.best_position, [1.0, 1.0], atol=1e-2)


@pytest.mark.parametrize("seed", range(10))
def test_xor_training(seed):
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], float)
    Y = np.array([[0], [1], [1], [0]], float)
    net = nn.init_network(nn.NetworkSpec((2, 4, 1), seed=seed))
    out, rep = train_pso(net, SimpleNamespace(inputs=X, targets=Y),
                         PsoConfig(swarm_size=30, max_iterations=300, seed=seed))
    assert np.all(np.abs(nn.forward(out, X) - Y) < 0.1)
    assert rep.final_mse == pytest.approx(nn.mse(out, X, Y), rel=1e-12)


@given(seed=st.integers(0, 10**6), dim=st.integers(1, 6))
def test_history_monotone_and_bounded(seed, dim):
    cfg = PsoConfig(swarm_size=8, max_iterations=25, seed=seed, position_bounds=(-2.0, 3.0))
    res = pso_minimize(lambda x: float(np.sum(np.cos(3 * x) + x)), dim, cfg)
    h = res.value_history
    assert len(h) == 25
    assert all(b <= a for a, b in zip(h, h[1:]))
    assert res.best_value == h[-1]
    assert np.all(res.final_positions >= -2.0) and np.all(res.final_positions <= 3.0)
    assert np.all(res.best_position >= -2.0) and np.all(res.best_position <= 3.0)


def test_determinism_and_streams():
    cfg = PsoConfig(max_iterations=20, seed=9)
    a = pso_minimize(sphere, 4, cfg)
    b = pso_minimize(sphere, 4, cfg)
    assert np.array_equal(a.best_position, b.best_position) and a.value_history == b.value_history
    c = pso_minimize(sphere, 4, PsoConfig(max_iterations=20, seed=9, stream=1))
    assert not np.array_equal(a.best_position, c.best_position)


def test_vectorized_matches_scalar():
    cfg = PsoConfig(max_iterations=30, seed=2)
    a = pso_minimize(sphere, 5, cfg)
    b = pso_minimize(lambda P: np.sum(P * P, axis=1), 5, cfg, vectorized=True)
    assert np.allclose(a.best_position, b.best_position) and a.best_value == pytest.approx(b.best_value)


def test_constant_objective():
    res = pso_minimize(lambda x: 4.0, 3, PsoConfig(max_iterations=10))
    assert res.best_value == 4.0 and res.value_history == [4.0] * 10


def test_objective_error_reports_location():
    calls = {"n": 0}

    def f(x):
        calls["n"] += 1
        return float("nan") if calls["n"] == 35 else sphere(x)

    with pytest.raises(ObjectiveError) as info:
        pso_minimize(f, 2, PsoConfig(swarm_size=10, max_iterations=10))
    assert info.value.iteration == 3 and info.value.particle == 4


def test_config_validation():
    with pytest.raises(SpecError):
        PsoConfig(swarm_size=0)
    with pytest.raises(SpecError):
        PsoConfig(position_bounds=(1.0, -1.0))
    with pytest.raises(SpecError):
        pso_minimize(sphere, 0)
    with pytest.raises(ShapeError):
        pso_minimize(sphere, 2, PsoConfig(swarm_size=4), initial_positions=np.zeros((3, 2)))


def test_initial_swarm_contains_network():
    net = nn.init_network(nn.NetworkSpec((6, 10, 1), seed=1))
    cfg = PsoConfig(swarm_size=12)
    X = initial_swarm(net, cfg, np.random.default_rng(0))
    assert X.shape == (12, net.spec.n_params)
    assert np.array_equal(X[0], net.flatten())
    for row in X[1:]:
        other = nn.unflatten(net.spec, row)
        assert np.all(np.abs(other.weights[0]) <= 1 / np.sqrt(6))
        assert all(np.all(b == 0) for b in other.biases)


def test_train_pso_never_worse_than_start():
    rng = np.random.default_rng(5)
    X, Y = rng.normal(size=(30, 3)), rng.normal(size=(30, 1))
    net = nn.init_network(nn.NetworkSpec((3, 5, 1), seed=0))
    out, rep = train_pso(net, SimpleNamespace(inputs=X, targets=Y),
                         PsoConfig(swarm_size=6, max_iterations=5))
    assert rep.final_mse <= nn.mse(net, X, Y)


def test_rosenbrock_median_over_seeds():
    best = [pso_minimize(rosenbrock, 2, PsoConfig(max_iterations=400, seed=s)).best_value
            for s in range(20)]
    assert np.median(best) < 1e-2


def test_sphere_keeps_improving():
    better = 0
    for s in range(40):
        h = pso_minimize(sphere, 10, PsoConfig(seed=s)).value_history
        better += h[199] < h[19]
    assert better >= 0.95 * 40


def test_degenerate_network_rejected():
    with pytest.raises(SpecError):
        nn.NetworkSpec((0, 1))


def test_xor_defaults_and_determinism():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], float)
    Y = np.array([[0], [1], [1], [0]], float)
    pats = SimpleNamespace(inputs=X, targets=Y)
    ok = 0
    for seed in range(10):
        net = nn.init_network(nn.NetworkSpec((2, 4, 1), seed=seed))
        out, rep = train_pso(net, pats, PsoConfig(seed=seed))
        ok += rep.final_mse < 0.01
    assert ok >= 8
    again, _ = train_pso(net, pats, PsoConfig(seed=9))
    assert again == out
