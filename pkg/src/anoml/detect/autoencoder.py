"""Dense autoencoder scored by reconstruction error.

Fixed compress-reconstruct shape d -> h -> b -> h -> d with tanh hidden
layers and an identity output. Trained by full-batch gradient descent on
mean squared reconstruction error; the anomaly threshold is a high
quantile (default 0.99) of the training reconstruction errors, so a
fresh input reconstructing worse than almost all training data flags as
anomalous.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .common import AnomalyScore, BadArchitecture, DimensionMismatch

DEFAULT_EPOCHS = 200
DEFAULT_LR = 0.05
DEFAULT_QUANTILE = 0.99


@dataclass(frozen=True)
class AutoencoderModel:
    input_dim: int
    hidden_dim: int
    bottleneck_dim: int
    weights: tuple[np.ndarray, ...]  # W1, W2, W3, W4
    biases: tuple[np.ndarray, ...]   # b1, b2, b3, b4
    threshold: float                 # reconstruction-error cutoff tau
    quantile: float
    epochs: int
    lr: float
    seed: int


def _init_params(d: int, h: int, b: int, rng: np.random.Generator):
    # Uniform(+-1/sqrt(fan_in)) weights, zero biases.
    sizes = [(d, h), (h, b), (b, h), (h, d)]
    weights = []
    biases = []
    for fan_in, fan_out in sizes:
        bound = 1.0 / math.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _forward(X, weights, biases):
    a1 = np.tanh(X @ weights[0] + biases[0])
    a2 = np.tanh(a1 @ weights[1] + biases[1])
    a3 = np.tanh(a2 @ weights[2] + biases[2])
    out = a3 @ weights[3] + biases[3]
    return a1, a2, a3, out


def reconstruction_errors(model_or_params, X: np.ndarray) -> np.ndarray:
    """Per-row mean squared reconstruction error."""
    if isinstance(model_or_params, AutoencoderModel):
        weights, biases = model_or_params.weights, model_or_params.biases
    else:
        weights, biases = model_or_params
    *_, out = _forward(X, weights, biases)
    return ((out - X) ** 2).mean(axis=1)


def loss_and_gradients(X, weights, biases):
    """Full-batch MSE loss and its gradients via backpropagation."""
    n, d = X.shape
    a1, a2, a3, out = _forward(X, weights, biases)
    diff = out - X
    loss = float((diff ** 2).mean())

    delta4 = 2.0 * diff / (n * d)
    grad_w4 = a3.T @ delta4
    grad_b4 = delta4.sum(axis=0)
    delta3 = (delta4 @ weights[3].T) * (1.0 - a3 ** 2)
    grad_w3 = a2.T @ delta3
    grad_b3 = delta3.sum(axis=0)
    delta2 = (delta3 @ weights[2].T) * (1.0 - a2 ** 2)
    grad_w2 = a1.T @ delta2
    grad_b2 = delta2.sum(axis=0)
    delta1 = (delta2 @ weights[1].T) * (1.0 - a1 ** 2)
    grad_w1 = X.T @ delta1
    grad_b1 = delta1.sum(axis=0)

    return loss, [grad_w1, grad_w2, grad_w3, grad_w4], [grad_b1, grad_b2, grad_b3, grad_b4]


def ae_fit(train: np.ndarray, hidden_dim: int, bottleneck_dim: int,
           epochs: int = DEFAULT_EPOCHS, lr: float = DEFAULT_LR, seed: int = 0,
           threshold_quantile: float = DEFAULT_QUANTILE) -> AutoencoderModel:
    """Train the autoencoder; with epochs=0 the initialization is returned
    (threshold still computed from its errors)."""
    X = np.atleast_2d(np.asarray(train, dtype=np.float64))
    n, d = X.shape
    if d < 2:
        raise BadArchitecture(f"input dimension must be >= 2, got {d}")
    if not 1 <= bottleneck_dim < d:
        raise BadArchitecture(
            f"bottleneck {bottleneck_dim} must compress: 1 <= b < d={d}")
    if hidden_dim < 1:
        raise BadArchitecture("hidden width must be >= 1")
    if not 0.0 < threshold_quantile <= 1.0:
        raise ValueError("threshold_quantile must be in (0, 1]")

    rng = np.random.default_rng(seed)
    weights, biases = _init_params(d, hidden_dim, bottleneck_dim, rng)
    for _ in range(epochs):
        _, grads_w, grads_b = loss_and_gradients(X, weights, biases)
        weights = [w - lr * g for w, g in zip(weights, grads_w)]
        biases = [b - lr * g for b, g in zip(biases, grads_b)]

    errors = reconstruction_errors((weights, biases), X)
    tau = float(np.quantile(errors, threshold_quantile))
    return AutoencoderModel(
        input_dim=d, hidden_dim=hidden_dim, bottleneck_dim=bottleneck_dim,
        weights=tuple(w.copy() for w in weights),
        biases=tuple(b.copy() for b in biases),
        threshold=tau, quantile=threshold_quantile,
        epochs=epochs, lr=lr, seed=seed,
    )


def ae_score_batch(model: AutoencoderModel, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.input_dim:
        raise DimensionMismatch(
            f"model expects {model.input_dim} features, got {X.shape[1]}")
    return reconstruction_errors(model, X)


def ae_score(model: AutoencoderModel, x: np.ndarray) -> AnomalyScore:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("ae_score takes a single feature vector")
    return AnomalyScore(value=float(ae_score_batch(model, x[None, :])[0]),
                        normalized=False)
