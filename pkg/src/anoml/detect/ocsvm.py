"""One-class SVM trained by sub-gradient descent.

Minimizes the nu-parameterized one-class objective

    (1/2) ||w||^2 + (1 / (nu n)) sum_i max(0, rho - <w, phi(x_i)>) - rho

over (w, rho). Each epoch takes one full-batch sub-gradient step in w,
then sets rho to its exact minimizer given w, which is the ceil(nu n)-th
smallest projection <w, phi(x_i)>. That coordinate-exact step is what
makes the nu guarantee crisp: at most a nu fraction of training points
ends up strictly below rho.

phi is either the identity (linear) or a random Fourier feature map
approximating the RBF kernel exp(-gamma ||x - x'||^2):

    phi(x) = sqrt(2/D) * cos(x Omega + beta),
    Omega ~ Normal(0, 2 gamma), beta ~ Uniform[0, 2 pi)

The exported anomaly score is -tanh(<w, phi(x)> - rho), living in
(-1, 1) with higher = more anomalous; deep inliers approach -1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .common import AnomalyScore, DimensionMismatch, InvalidNu, TooFewSamples

DEFAULT_RFF_DIM = 64
DEFAULT_EPOCHS = 200
DEFAULT_LR = 0.1


@dataclass(frozen=True)
class FeatureMap:
    """Linear map when omega is None, random Fourier features otherwise."""

    input_dim: int
    omega: np.ndarray | None = None   # (input_dim, D)
    beta: np.ndarray | None = None    # (D,)
    gamma: float = 0.0

    @property
    def output_dim(self) -> int:
        return self.input_dim if self.omega is None else self.omega.shape[1]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.input_dim:
            raise DimensionMismatch(
                f"feature map expects {self.input_dim} inputs, got {X.shape[1]}")
        if self.omega is None:
            return X
        D = self.omega.shape[1]
        return math.sqrt(2.0 / D) * np.cos(X @ self.omega + self.beta)


def linear_map(input_dim: int) -> FeatureMap:
    return FeatureMap(input_dim=input_dim)


def random_fourier_map(input_dim: int, dim: int, gamma: float, seed: int) -> FeatureMap:
    if dim < 1:
        raise ValueError("random Fourier dimension must be >= 1")
    rng = np.random.default_rng(seed)
    omega = rng.normal(0.0, math.sqrt(2.0 * gamma), size=(input_dim, dim))
    beta = rng.uniform(0.0, 2.0 * np.pi, size=dim)
    return FeatureMap(input_dim=input_dim, omega=omega, beta=beta, gamma=gamma)


@dataclass(frozen=True)
class OneClassSvmModel:
    feature_map: FeatureMap
    w: np.ndarray
    rho: float
    nu: float
    epochs: int
    lr: float
    seed: int

    @property
    def input_dim(self) -> int:
        return self.feature_map.input_dim


def _exact_rho(projections: np.ndarray, nu: float) -> float:
    # Minimizer of the objective in rho for fixed w: the k-th smallest
    # projection with k = ceil(nu n); at most k-1 < nu n points sit
    # strictly below it.
    n = len(projections)
    k = max(1, math.ceil(nu * n))
    return float(np.partition(projections, k - 1)[k - 1])


def ocsvm_fit(train: np.ndarray, nu: float = 0.1, kernel: str = "rff",
              rff_dim: int = DEFAULT_RFF_DIM, gamma: float | None = None,
              epochs: int = DEFAULT_EPOCHS, lr: float = DEFAULT_LR,
              seed: int = 0) -> OneClassSvmModel:
    """Train on (assumed normal) rows; deterministic in (data, params, seed)."""
    X = np.atleast_2d(np.asarray(train, dtype=np.float64))
    n, d = X.shape
    if n < 1:
        raise TooFewSamples("need at least one training row")
    if not 0.0 < nu < 1.0:
        raise InvalidNu(f"nu must be in (0, 1), got {nu}")

    if kernel == "linear":
        feature_map = linear_map(d)
    elif kernel == "rff":
        feature_map = random_fourier_map(d, rff_dim, gamma if gamma is not None else 1.0 / d, seed)
    else:
        raise ValueError(f"unknown kernel {kernel!r}; use 'linear' or 'rff'")

    Phi = feature_map(X)
    w = np.zeros(Phi.shape[1])
    rho = 0.0
    for epoch in range(epochs):
        projections = Phi @ w
        # <= picks the informative subgradient at the hinge kink; with a
        # strict < the all-zero start (every projection == rho == 0) has
        # zero gradient and training never leaves the saddle.
        violating = projections <= rho
        grad_w = w - Phi[violating].sum(axis=0) / (nu * n)
        w = w - (lr / math.sqrt(epoch + 1)) * grad_w
        rho = _exact_rho(Phi @ w, nu)
    return OneClassSvmModel(
        feature_map=feature_map, w=w, rho=rho,
        nu=nu, epochs=epochs, lr=lr, seed=seed,
    )


def ocsvm_raw_batch(model: OneClassSvmModel, X: np.ndarray) -> np.ndarray:
    """Signed margins <w, phi(x)> - rho; negative margins are outliers."""
    return model.feature_map(X) @ model.w - model.rho


def ocsvm_decision_batch(model: OneClassSvmModel, X: np.ndarray) -> np.ndarray:
    return -np.tanh(ocsvm_raw_batch(model, X))


def ocsvm_decision(model: OneClassSvmModel, x: np.ndarray) -> AnomalyScore:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("ocsvm_decision takes a single feature vector")
    return AnomalyScore(value=float(ocsvm_decision_batch(model, x[None, :])[0]),
                        normalized=True)
