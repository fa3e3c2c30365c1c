import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anoml.metrics import (
    ConfusionCounts,
    Empty,
    LengthMismatch,
    MetricReport,
    SingleClass,
    accuracy,
    auc,
    confusion,
    f1,
    precision,
    recall,
    reports_to_csv,
    timeit,
)

N, A = 0, 1  # normal / anomalous


def brute_force_auc(scores, truth):
    """Pairwise-comparison oracle: 1 per correct pair, 0.5 per tie."""
    pos = [s for s, t in zip(scores, truth) if t == A]
    neg = [s for s, t in zip(scores, truth) if t == N]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestConfusion:
    def test_hand_enumeration(self):
        counts = confusion([N, N, A, A], [N, A, A, N])
        assert counts == ConfusionCounts(tp=1, tn=1, fp=1, fn=1)

    def test_perfect(self):
        assert confusion([N, A], [N, A]) == ConfusionCounts(tp=1, tn=1, fp=0, fn=0)

    def test_all_normal_predictions_on_anomalous_truth(self):
        counts = confusion([N] * 7, [A] * 7)
        assert counts.fn == 7 and counts.tp == 0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion([N], [N, A])

    def test_empty(self):
        with pytest.raises(Empty):
            confusion([], [])

    def test_total_invariant(self):
        rng = np.random.default_rng(0)
        preds = rng.integers(0, 2, 100)
        truth = rng.integers(0, 2, 100)
        assert confusion(preds, truth).total == 100


class TestFormulas:
    def test_balanced_counts(self):
        c = ConfusionCounts(1, 1, 1, 1)
        assert accuracy(c) == precision(c) == recall(c) == f1(c) == 0.5

    def test_degenerate_precision(self):
        assert precision(ConfusionCounts(tp=0, tn=3, fp=0, fn=2)) == 0.0

    def test_f1_four_ninths(self):
        c = ConfusionCounts(tp=2, tn=0, fp=1, fn=4)
        assert f1(c) == pytest.approx(4 / 9)

    def test_perfect_scores_one(self):
        c = ConfusionCounts(tp=10, tn=5, fp=0, fn=0)
        assert accuracy(c) == precision(c) == recall(c) == f1(c) == 1.0

    def test_total_inversion_scores_zero(self):
        c = confusion([A, A, N, N], [N, N, A, A])
        assert accuracy(c) == 0.0 and precision(c) == 0.0
        assert recall(c) == 0.0 and f1(c) == 0.0

    def test_values_stay_in_unit_interval(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            preds = rng.integers(0, 2, 20)
            truth = rng.integers(0, 2, 20)
            if (truth == truth[0]).all():
                continue
            c = confusion(preds, truth)
            for metric in (accuracy, precision, recall, f1):
                assert 0.0 <= metric(c) <= 1.0


class TestAuc:
    def test_perfect_ranking(self):
        assert auc([0.9, 0.1], [A, N]) == 1.0

    def test_all_ties_half(self):
        assert auc([0.5, 0.5, 0.5, 0.5], [A, N, A, N]) == 0.5

    def test_hand_derived_three_quarters(self):
        assert auc([0.8, 0.6, 0.4, 0.2], [A, N, A, N]) == 0.75

    def test_single_class(self):
        with pytest.raises(SingleClass):
            auc([0.1, 0.2], [N, N])

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            n = int(rng.integers(2, 13))
            truth = rng.integers(0, 2, n)
            if (truth == truth[0]).all():
                truth[0] = 1 - truth[0]
            scores = rng.choice([0.1, 0.2, 0.3, 0.5, 0.9], size=n)  # force ties
            assert auc(scores, truth) == pytest.approx(
                brute_force_auc(scores, truth), abs=1e-12)

    @given(st.data())
    @settings(max_examples=150)
    def test_monotone_transform_invariance(self, data):
        n = data.draw(st.integers(3, 12))
        truth = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
        if all(t == truth[0] for t in truth):
            truth[0] = 1 - truth[0]
        # a coarse grid keeps exp() injective in float arithmetic, so the
        # transform is strictly increasing and preserves tie structure
        scores = data.draw(st.lists(
            st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 3)),
            min_size=n, max_size=n))
        base = auc(scores, truth)
        scale = data.draw(st.floats(0.1, 4.0))
        transformed = [float(np.exp(scale * s)) for s in scores]
        assert auc(transformed, truth) == pytest.approx(base, abs=1e-12)


class TestTimeit:
    def test_noop_mean_nonnegative(self):
        stats = timeit(lambda: None, 100)
        assert stats.mean_ms >= 0.0

    def test_single_repetition_std_zero(self):
        stats = timeit(lambda: None, 1)
        assert stats.std_ms == 0.0 and stats.repetitions == 1

    def test_sleep_bounded(self):
        stats = timeit(lambda: time.sleep(0.001), 50)
        assert 1.0 <= stats.mean_ms <= 50.0

    def test_zero_repetitions_rejected(self):
        with pytest.raises(ValueError):
            timeit(lambda: None, 0)


class TestReport:
    def make_report(self):
        return MetricReport(
            algorithm="if", sr="mad", placement="fog",
            counts=ConfusionCounts(tp=8, tn=1, fp=1, fn=0),
            auc=0.9, inference_time_ms=0.5,
            scaling_reduction_time_s=0.01, model_size_kb=12.0,
        )

    def test_metric_block_excludes_timing(self):
        block = self.make_report().metric_block()
        assert "inference_time_ms" not in block
        assert block["accuracy"] == 0.9

    def test_block_bytes_stable(self):
        assert self.make_report().metric_block_bytes() == \
               self.make_report().metric_block_bytes()

    def test_inverted_swaps_orientation(self):
        inv = self.make_report().inverted()
        assert inv.counts == ConfusionCounts(tp=1, tn=8, fp=0, fn=1)

    def test_csv_shape(self):
        text = reports_to_csv([self.make_report()])
        lines = text.strip().splitlines()
        header = lines[0].split(",")
        assert header[:3] == ["algorithm", "sr", "placement"]
        assert header[3:] == ["inference_time_ms", "auc", "accuracy", "recall",
                              "precision", "f1_score", "scaling_reduction_time_s",
                              "model_size_kb"]
        assert lines[1].startswith("if,mad,fog,")
