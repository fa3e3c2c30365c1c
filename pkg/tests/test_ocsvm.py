import math

import numpy as np
import pytest

from anoml.detect import (
    DimensionMismatch,
    InvalidNu,
    OCSVM_THRESHOLD,
    classify,
    linear_map,
    ocsvm_decision,
    ocsvm_decision_batch,
    ocsvm_fit,
    ocsvm_raw_batch,
    random_fourier_map,
)


def circle_points(n=300, seed=0):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0, 2 * np.pi, n)
    return np.stack([np.cos(theta), np.sin(theta)], axis=1)


class TestFeatureMap:
    def test_rff_shape_and_range(self):
        fmap = random_fourier_map(3, 64, gamma=0.5, seed=0)
        out = fmap(np.random.default_rng(1).normal(0, 1, (10, 3)))
        assert out.shape == (10, 64)
        bound = math.sqrt(2.0 / 64)
        assert (np.abs(out) <= bound + 1e-12).all()

    def test_rff_deterministic(self):
        a = random_fourier_map(2, 16, 1.0, seed=3)
        b = random_fourier_map(2, 16, 1.0, seed=3)
        assert np.array_equal(a.omega, b.omega) and np.array_equal(a.beta, b.beta)

    def test_rff_approximates_rbf_kernel(self):
        # <phi(x), phi(y)> ~= exp(-gamma ||x-y||^2) for a wide map
        gamma = 0.7
        fmap = random_fourier_map(2, 4096, gamma, seed=0)
        x = np.array([[0.3, -0.2]])
        y = np.array([[1.0, 0.5]])
        approx = float((fmap(x) @ fmap(y).T)[0, 0])
        exact = math.exp(-gamma * float(((x - y) ** 2).sum()))
        assert approx == pytest.approx(exact, abs=0.05)

    def test_linear_map_identity(self):
        X = np.random.default_rng(0).normal(0, 1, (4, 3))
        assert np.array_equal(linear_map(3)(X), X)

    def test_dimension_check(self):
        with pytest.raises(DimensionMismatch):
            random_fourier_map(3, 8, 1.0, 0)(np.ones((2, 2)))


class TestFit:
    def test_invalid_nu(self):
        X = np.ones((5, 2))
        for nu in (0.0, 1.0, -0.1, 2.0):
            with pytest.raises(InvalidNu):
                ocsvm_fit(X, nu=nu)

    def test_deterministic_in_seed(self):
        X = np.random.default_rng(0).normal(0, 1, (80, 2))
        a = ocsvm_fit(X, nu=0.1, seed=5)
        b = ocsvm_fit(X, nu=0.1, seed=5)
        assert np.array_equal(a.w, b.w) and a.rho == b.rho

    @pytest.mark.parametrize("nu", [0.05, 0.1, 0.2])
    def test_nu_bounds_training_outlier_fraction(self, nu):
        for seed in range(5):
            X = np.random.default_rng(seed).normal(0, 1, (500, 3))
            model = ocsvm_fit(X, nu=nu, seed=seed)
            frac = float((ocsvm_raw_batch(model, X) < 0).mean())
            assert frac <= nu + 0.1

    def test_nu_near_one_floors_nonpositive_count(self):
        # at least floor((1 - 0.1) * nu * n) of the train set scores <= 0
        nu, n = 0.95, 400
        X = np.random.default_rng(3).normal(0, 1, (n, 2))
        model = ocsvm_fit(X, nu=nu, seed=3)
        nonpos = int((ocsvm_raw_batch(model, X) <= 0).sum())
        assert nonpos >= math.floor(0.9 * nu * n)

    def test_default_gamma_is_one_over_d(self):
        X = np.random.default_rng(0).normal(0, 1, (50, 4))
        model = ocsvm_fit(X, nu=0.1, seed=0)
        assert model.feature_map.gamma == 0.25

    def test_linear_kernel_trains(self):
        X = np.random.default_rng(0).normal(5, 1, (100, 2))
        model = ocsvm_fit(X, nu=0.1, kernel="linear", seed=0)
        assert model.w.shape == (2,)


class TestDecision:
    def test_circle_rank(self):
        model = ocsvm_fit(circle_points(), nu=0.1, gamma=1.0, rff_dim=64, seed=0)
        raw_far = ocsvm_raw_batch(model, np.array([[5.0, 5.0]]))[0]
        raw_near = ocsvm_raw_batch(model, np.array([[1.0, 0.0]]))[0]
        assert raw_far < raw_near
        score_far = ocsvm_decision(model, np.array([5.0, 5.0]))
        score_near = ocsvm_decision(model, np.array([1.0, 0.0]))
        assert score_far.value > score_near.value

    def test_score_is_neg_tanh_of_margin(self):
        model = ocsvm_fit(circle_points(50), nu=0.2, seed=1)
        X = np.random.default_rng(2).normal(0, 2, (20, 2))
        raw = ocsvm_raw_batch(model, X)
        np.testing.assert_allclose(ocsvm_decision_batch(model, X), -np.tanh(raw))

    def test_mapping_fixed_points(self):
        # raw 0 -> 0; raw -1 -> tanh(1); the map is bounded by (-1, 1)
        assert -math.tanh(0.0) == 0.0
        assert -math.tanh(-1.0) == pytest.approx(0.7615941559557649)
        model = ocsvm_fit(circle_points(50), nu=0.2, seed=1)
        scores = ocsvm_decision_batch(model, np.random.default_rng(0).normal(0, 9, (50, 2)))
        assert (scores > -1.0).all() and (scores < 1.0).all()

    def test_classify_orientation(self):
        # negative margin (outside the support region) flags anomalous
        assert classify(-math.tanh(-0.5), OCSVM_THRESHOLD) == 1
        assert classify(-math.tanh(0.5), OCSVM_THRESHOLD) == 0
        assert classify(0.0, OCSVM_THRESHOLD) == 0  # tie stays normal

    def test_dimension_mismatch(self):
        model = ocsvm_fit(circle_points(30), nu=0.1, seed=0)
        with pytest.raises(DimensionMismatch):
            ocsvm_decision(model, np.array([1.0, 2.0, 3.0]))
