"""Unsupervised anomaly detectors: isolation forest, one-class SVM, autoencoder.

All three fit deterministically from (data, hyperparameters, seed), are
immutable afterward, and expose both a single-vector scoring call and a
batch variant. `classify` applies each family's decision threshold with
a strict greater-than rule.
"""

from .common import (
    AnomalyScore,
    BadArchitecture,
    DetectorError,
    DimensionMismatch,
    IFOREST_THRESHOLD,
    InvalidNu,
    LABEL_ANOMALOUS,
    LABEL_NORMAL,
    OCSVM_THRESHOLD,
    TooFewSamples,
    classify,
)
from .iforest import (
    IsolationForestModel,
    IsolationTree,
    average_path_length,
    harmonic,
    if_fit,
    if_score,
    if_score_batch,
)
from .ocsvm import (
    FeatureMap,
    OneClassSvmModel,
    linear_map,
    ocsvm_decision,
    ocsvm_decision_batch,
    ocsvm_fit,
    ocsvm_raw_batch,
    random_fourier_map,
)
from .autoencoder import (
    AutoencoderModel,
    ae_fit,
    ae_score,
    ae_score_batch,
    loss_and_gradients,
    reconstruction_errors,
)

__all__ = [name for name in dir() if not name.startswith("_")]
