import numpy as np
import pytest

from anoml.detect import (
    BadArchitecture,
    DimensionMismatch,
    ae_fit,
    ae_score,
    ae_score_batch,
    classify,
    loss_and_gradients,
)
from anoml.detect.autoencoder import _init_params, reconstruction_errors


def line_data(n=200, noise=0.01, seed=2):
    """Points near a 1-D line through the origin in 3-D."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(-1, 1, n)
    direction = np.array([1.0, -0.5, 2.0])
    direction /= np.linalg.norm(direction)
    return t[:, None] * direction + rng.normal(0, noise, (n, 3))


def numeric_gradients(X, weights, biases, h=1e-5):
    """Central finite differences over every parameter."""
    grads_w = [np.zeros_like(w) for w in weights]
    grads_b = [np.zeros_like(b) for b in biases]
    for params, grads in ((weights, grads_w), (biases, grads_b)):
        for p, g in zip(params, grads):
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = p[idx]
                p[idx] = orig + h
                loss_plus, _, _ = loss_and_gradients(X, weights, biases)
                p[idx] = orig - h
                loss_minus, _, _ = loss_and_gradients(X, weights, biases)
                p[idx] = orig
                g[idx] = (loss_plus - loss_minus) / (2 * h)
    return grads_w, grads_b


class TestGradients:
    def test_analytic_matches_central_differences(self):
        # 4-2-1-2-4 network, 8 samples, h = 1e-5, rel error <= 1e-4
        X = np.random.default_rng(11).normal(0, 1, (8, 4))
        weights, biases = _init_params(4, 2, 1, np.random.default_rng(5))
        _, analytic_w, analytic_b = loss_and_gradients(X, weights, biases)
        numeric_w, numeric_b = numeric_gradients(X, weights, biases)
        for got, want in zip(analytic_w + analytic_b, numeric_w + numeric_b):
            rel = np.abs(got - want) / np.maximum.reduce(
                [np.abs(got), np.abs(want), np.full_like(got, 1e-8)])
            assert rel.max() <= 1e-4


class TestFit:
    def test_loss_decreases_monotonically(self):
        X = line_data()
        weights, biases = _init_params(3, 4, 1, np.random.default_rng(0))
        losses = []
        for _ in range(11):
            loss, grads_w, grads_b = loss_and_gradients(X, weights, biases)
            losses.append(loss)
            weights = [w - 0.05 * g for w, g in zip(weights, grads_w)]
            biases = [b - 0.05 * g for b, g in zip(biases, grads_b)]
        assert all(losses[i + 1] < losses[i] for i in range(10))

    def test_epochs_zero_returns_initialization(self):
        X = line_data(50)
        model = ae_fit(X, hidden_dim=4, bottleneck_dim=1, epochs=0, seed=9)
        weights, biases = _init_params(3, 4, 1, np.random.default_rng(9))
        for got, want in zip(model.weights, weights):
            assert np.array_equal(got, want)
        assert model.threshold > 0.0  # tau still computed from init errors

    def test_deterministic(self):
        X = line_data(80)
        a = ae_fit(X, 4, 1, epochs=20, seed=3)
        b = ae_fit(X, 4, 1, epochs=20, seed=3)
        for wa, wb in zip(a.weights, b.weights):
            assert np.array_equal(wa, wb)
        assert a.threshold == b.threshold

    def test_bad_architectures(self):
        X = line_data(20)
        with pytest.raises(BadArchitecture):
            ae_fit(X, hidden_dim=4, bottleneck_dim=3)  # b >= d
        with pytest.raises(BadArchitecture):
            ae_fit(X, hidden_dim=0, bottleneck_dim=1)
        with pytest.raises(BadArchitecture):
            ae_fit(np.ones((5, 1)), hidden_dim=2, bottleneck_dim=1)  # d < 2

    def test_threshold_is_train_quantile(self):
        X = line_data(100)
        model = ae_fit(X, 4, 1, epochs=50, seed=0, threshold_quantile=0.9)
        errors = reconstruction_errors(model, X)
        assert model.threshold == pytest.approx(float(np.quantile(errors, 0.9)))


class TestScore:
    def test_score_is_mean_squared_error(self):
        X = line_data(60)
        model = ae_fit(X, 4, 1, epochs=30, seed=1)
        scores = ae_score_batch(model, X)
        assert (scores >= 0.0).all()
        one = ae_score(model, X[0])
        assert one.value == pytest.approx(scores[0])

    def test_planted_outlier_exceeds_threshold(self):
        X = line_data()
        model = ae_fit(X, hidden_dim=4, bottleneck_dim=1, epochs=300, lr=0.05, seed=0)
        outlier = np.array([3.0, 3.0, -3.0])  # far off the training line
        score = ae_score(model, outlier)
        assert score.value > model.threshold
        assert classify(score, model.threshold) == 1

    def test_tie_stays_normal(self):
        X = line_data(50)
        model = ae_fit(X, 4, 1, epochs=10, seed=0)
        assert classify(model.threshold, model.threshold) == 0

    def test_perfect_reconstruction_scores_zero(self):
        # identity behavior is unreachable for a compressing net, but the
        # score definition itself must send out == in to 0
        X = np.zeros((1, 3))
        weights = (np.zeros((3, 4)), np.zeros((4, 1)), np.zeros((1, 4)), np.zeros((4, 3)))
        biases = (np.zeros(4), np.zeros(1), np.zeros(4), np.zeros(3))
        errors = reconstruction_errors((list(weights), list(biases)), X)
        assert errors[0] == 0.0

    def test_dimension_mismatch(self):
        model = ae_fit(line_data(30), 4, 1, epochs=5, seed=0)
        with pytest.raises(DimensionMismatch):
            ae_score(model, np.array([1.0, 2.0]))
