"""Confusion-matrix metrics and rank-based AUC.

The confusion orientation here treats NORMAL as the positive class:
TP = normal predicted normal, TN = anomalous predicted anomalous,
FP = normal predicted anomalous, FN = anomalous predicted normal.
That is inverted relative to most anomaly-detection tooling; reports can
flip it via invert_positive for comparison. AUC always ranks the
anomalous class as positive (higher score = more anomalous), which is
the natural orientation for an anomaly score.

    accuracy  = (TP + TN) / (TP + TN + FP + FN)
    precision = TP / (TP + FP)
    recall    = TP / (TP + FN)
    f1        = 2 TP / (2 TP + FP + FN)

Any 0/0 denominator yields 0 so reports stay total.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

LABEL_NORMAL = 0
LABEL_ANOMALOUS = 1


class MetricsError(ValueError):
    pass


class LengthMismatch(MetricsError):
    pass


class Empty(MetricsError):
    pass


class SingleClass(MetricsError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def inverted(self) -> "ConfusionCounts":
        """Swap the positive class (normal <-> anomalous)."""
        return ConfusionCounts(tp=self.tn, tn=self.tp, fp=self.fn, fn=self.fp)


def confusion(predictions: Sequence[int], truth: Sequence[int]) -> ConfusionCounts:
    predictions = np.asarray(predictions)
    truth = np.asarray(truth)
    if len(predictions) != len(truth):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(truth)} truths")
    if len(predictions) == 0:
        raise Empty("no instances to count")
    normal_truth = truth == LABEL_NORMAL
    normal_pred = predictions == LABEL_NORMAL
    return ConfusionCounts(
        tp=int((normal_truth & normal_pred).sum()),
        tn=int((~normal_truth & ~normal_pred).sum()),
        fp=int((normal_truth & ~normal_pred).sum()),
        fn=int((~normal_truth & normal_pred).sum()),
    )


def _ratio(num: float, den: float) -> float:
    return num / den if den != 0 else 0.0


def accuracy(c: ConfusionCounts) -> float:
    return _ratio(c.tp + c.tn, c.total)


def precision(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    return _ratio(c.tp, c.tp + c.fn)


def f1(c: ConfusionCounts) -> float:
    return _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged (fractional ranking)."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auc(scores: Sequence[float], truth: Sequence[int]) -> float:
    """Rank (Mann-Whitney) AUC with half credit for ties.

    Anomalous instances are the positive class; a perfect detector
    scores every anomalous instance above every normal one. Equals the
    probability a random anomalous/normal pair is ranked correctly.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth)
    if len(scores) != len(truth):
        raise LengthMismatch(f"{len(scores)} scores vs {len(truth)} truths")
    positive = truth == LABEL_ANOMALOUS
    n_pos = int(positive.sum())
    n_neg = len(truth) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes present")
    ranks = _average_ranks(scores)
    rank_sum = float(ranks[positive].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@dataclass(frozen=True)
class TimingStats:
    mean_ms: float
    std_ms: float
    repetitions: int


def timeit(op: Callable[[], object], repetitions: int) -> TimingStats:
    """Wall-clock mean/std per invocation of op."""
    if repetitions < 1:
        raise MetricsError("repetitions must be >= 1")
    samples = np.empty(repetitions)
    for i in range(repetitions):
        start = time.perf_counter()
        op()
        samples[i] = (time.perf_counter() - start) * 1000.0
    return TimingStats(
        mean_ms=float(samples.mean()),
        std_ms=float(samples.std()) if repetitions > 1 else 0.0,
        repetitions=repetitions,
    )


REPORT_COLUMNS = [
    "algorithm", "sr", "placement",
    "inference_time_ms", "auc", "accuracy", "recall", "precision", "f1_score",
    "scaling_reduction_time_s", "model_size_kb",
]


@dataclass
class MetricReport:
    """One evaluation row: quality metrics plus the timing that varies by tier."""

    algorithm: str = ""
    sr: str = ""
    placement: str = ""
    counts: ConfusionCounts | None = None
    auc: float = 0.0
    inference_time_ms: float = 0.0
    scaling_reduction_time_s: float = 0.0
    model_size_kb: float = 0.0

    @property
    def accuracy(self) -> float:
        return accuracy(self.counts)

    @property
    def precision(self) -> float:
        return precision(self.counts)

    @property
    def recall(self) -> float:
        return recall(self.counts)

    @property
    def f1(self) -> float:
        return f1(self.counts)

    def metric_block(self) -> dict:
        """Quality metrics only; timing excluded on purpose.

        Two runs of the same model over the same data must produce
        byte-identical blocks regardless of where inference ran.
        """
        return {
            "counts": {"tp": self.counts.tp, "tn": self.counts.tn,
                       "fp": self.counts.fp, "fn": self.counts.fn},
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
        }

    def metric_block_bytes(self) -> bytes:
        return json.dumps(self.metric_block(), sort_keys=True,
                          separators=(",", ":")).encode()

    def inverted(self) -> "MetricReport":
        out = MetricReport(**{**self.__dict__})
        out.counts = self.counts.inverted()
        return out

    def to_row(self) -> list:
        return [
            self.algorithm, self.sr, self.placement,
            repr(self.inference_time_ms), repr(self.auc), repr(self.accuracy),
            repr(self.recall), repr(self.precision), repr(self.f1),
            repr(self.scaling_reduction_time_s), repr(self.model_size_kb),
        ]

    def to_json(self) -> dict:
        block = self.metric_block()
        block.update({
            "algorithm": self.algorithm,
            "sr": self.sr,
            "placement": self.placement,
            "inference_time_ms": self.inference_time_ms,
            "scaling_reduction_time_s": self.scaling_reduction_time_s,
            "model_size_kb": self.model_size_kb,
        })
        return block


def reports_to_csv(reports: Sequence[MetricReport]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(REPORT_COLUMNS)
    for report in reports:
        writer.writerow(report.to_row())
    return buffer.getvalue()
