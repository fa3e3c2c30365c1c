"""Shared detector types: anomaly scores, thresholds, errors."""

from __future__ import annotations

from dataclasses import dataclass

LABEL_NORMAL = 0
LABEL_ANOMALOUS = 1

# Default decision thresholds per detector family. Isolation forest
# scores live in (0, 1] with 0.5 the "no structure" point; the one-class
# SVM score is a signed margin mapped into (-1, 1) around 0; the
# autoencoder carries its own trained reconstruction-error threshold.
IFOREST_THRESHOLD = 0.5
OCSVM_THRESHOLD = 0.0


class DetectorError(ValueError):
    pass


class DimensionMismatch(DetectorError):
    pass


class TooFewSamples(DetectorError):
    pass


class InvalidNu(DetectorError):
    pass


class BadArchitecture(DetectorError):
    pass


@dataclass(frozen=True)
class AnomalyScore:
    """Higher always means more anomalous; normalized marks a bounded range."""

    value: float
    normalized: bool = False

    def __float__(self) -> float:
        return self.value


def classify(score: AnomalyScore | float, threshold: float) -> int:
    """Binary verdict: anomalous iff score exceeds the threshold strictly."""
    return LABEL_ANOMALOUS if float(score) > threshold else LABEL_NORMAL
