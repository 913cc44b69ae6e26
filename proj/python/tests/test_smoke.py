from pathlib import Path

import numpy as np
import pytest

import sibp

SUBSET = Path(__file__).resolve().parents[2] / "data" / "mnist-subset"


def tiny_problem(seed=3):
    rng = np.random.default_rng(seed)
    spec = sibp.NetworkSpec([4, 6, 3], sibp.Activation.ReLU, init_std=0.5, seed=seed)
    x = rng.normal(size=(4, 12))
    y = list(rng.integers(0, 3, size=12))
    return spec, sibp.init_params(spec), x, y


def test_shapes_and_forward():
    spec, p, x, _ = tiny_problem()
    assert [w.shape for w in p.weights] == [(6, 4), (3, 6)]
    assert sibp.forward(spec, p, x).shape == (3, 12)
    with pytest.raises(sibp.ShapeError):
        sibp.forward(spec, p, np.zeros((5, 2)))


def test_gradient_matches_finite_differences():
    spec, p, x, y = tiny_problem()
    g = sibp.gradient(spec, p, x, y)
    w = p.weights[0]
    h = 1e-6
    for i, j in [(0, 0), (2, 3), (5, 1)]:
        plus, minus = w.copy(), w.copy()
        plus[i, j] += h
        minus[i, j] -= h
        f = []
        for trial in (plus, minus):
            q = sibp.ParameterSet([trial, p.weights[1]], p.biases)
            f.append(sibp.loss_value(sibp.Loss.SoftmaxCrossEntropy, sibp.forward(spec, q, x), y))
        assert g.weights[0][i, j] == pytest.approx((f[0] - f[1]) / (2 * h), rel=1e-5, abs=1e-9)


def test_semi_implicit_steps_reduce_loss():
    spec, p, x, y = tiny_problem()
    start = sibp.loss_value(sibp.Loss.SoftmaxCrossEntropy, sibp.forward(spec, p, x), y)
    for _ in range(20):
        p = sibp.semi_implicit_step(spec, p, x, y, eta=1.0, lam=1.0)
    end = sibp.loss_value(sibp.Loss.SoftmaxCrossEntropy, sibp.forward(spec, p, x), y)
    assert end < start
    assert sibp.stationarity_check(spec, p, x, y) >= 0.0


def test_identity_subproblem_is_ridge():
    rng = np.random.default_rng(5)
    w_k, b = rng.normal(size=(5, 7)), rng.normal(size=5)
    f, t = rng.normal(size=(7, 11)), rng.normal(size=(5, 11))
    w = sibp.solve_W_subproblem(w_k, b, f, t, 1.0, 50, sibp.Activation.Identity)
    # minimizer of ||W F + b - T||^2 + 1/2 ||W - W_k||^2
    rhs = 2 * (t - b[:, None]) @ f.T + w_k
    exact = np.linalg.solve(2 * f @ f.T + np.eye(7), rhs.T).T
    assert np.linalg.norm(w - exact) < 1e-6


def test_checks_pass():
    results = sibp.run_checks()
    assert len(results) == 5
    assert all(r["passed"] for r in results), results


def test_train_on_subset_is_deterministic():
    kwargs = dict(arch=[784, 16, 10], epochs=1, max_samples=600, seed=4)
    a = sibp.train(str(SUBSET), **kwargs)
    b = sibp.train(str(SUBSET), **kwargs)
    assert [r["train_loss"] for r in a["rows"]] == [r["train_loss"] for r in b["rows"]]
    assert a["rows"][-1]["train_loss"] < a["rows"][0]["train_loss"]
    with pytest.raises(sibp.DataError):
        sibp.train("/nonexistent")


def test_load_subset():
    x, y = sibp.load_mnist(str(SUBSET))
    assert x.shape == (784, 5000)
    assert len(y) == 5000
    assert 0.0 <= x.min() and x.max() <= 1.0
