import numpy as np
import pytest

from anoml.dataset import (
    AnomalyInjection,
    CsvSchema,
    DegenerateSplit,
    InjectionMode,
    InjectionOutOfBounds,
    LABEL_ANOMALOUS,
    LABEL_NORMAL,
    MissingColumn,
    NonMonotonicTimestamps,
    ParseError,
    TimeSeriesFrame,
    concat,
    load_csv,
    split,
    synthesize,
    write_csv,
)


def make_frame(n=10, d=2, anomalous=()):
    labels = np.zeros(n, dtype=np.int8)
    labels[list(anomalous)] = 1
    return TimeSeriesFrame(
        timestamps=np.arange(n) * 1000,
        features=np.arange(n * d, dtype=np.float64).reshape(n, d),
        feature_names=tuple(f"f{i}" for i in range(d)),
        labels=labels,
    )


class TestFrame:
    def test_invariants(self):
        frame = make_frame()
        assert frame.n_rows == 10 and frame.n_features == 2
        assert not frame.features.flags.writeable

    def test_rejects_backwards_timestamps(self):
        with pytest.raises(NonMonotonicTimestamps):
            TimeSeriesFrame(np.array([2, 1]), np.zeros((2, 1)), ("f0",), np.zeros(2))

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            TimeSeriesFrame(np.array([1]), np.zeros((2, 1)), ("f0",), np.zeros(2))

    def test_rejects_zero_features(self):
        with pytest.raises(ValueError):
            TimeSeriesFrame(np.array([1]), np.zeros((1, 0)), (), np.zeros(1))


class TestCsv:
    def test_three_row_csv(self, tmp_path):
        path = tmp_path / "small.csv"
        path.write_text(
            "timestamp,f0,f1,label\n"
            "1000,1.5,2.5,0\n"
            "2000,1.6,2.6,0\n"
            "3000,9.9,9.9,1\n"
        )
        frame = load_csv(path)
        assert frame.n_rows == 3
        assert frame.labels.tolist() == [0, 0, 1]

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        frame = TimeSeriesFrame(
            timestamps=np.arange(50) * 777,
            features=rng.normal(0, 1, (50, 3)),
            feature_names=("a", "b", "c"),
            labels=(rng.random(50) < 0.2).astype(np.int8),
        )
        path = tmp_path / "rt.csv"
        write_csv(frame, path)
        back = load_csv(path, CsvSchema(feature_columns=("a", "b", "c")))
        assert np.array_equal(back.timestamps, frame.timestamps)
        assert np.array_equal(back.features, frame.features)  # repr() round-trips floats
        assert np.array_equal(back.labels, frame.labels)
        assert back.feature_names == frame.feature_names

    def test_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,f0\n1,2\n")
        with pytest.raises(MissingColumn):
            load_csv(path)

    def test_non_monotonic(self, tmp_path):
        path = tmp_path / "back.csv"
        path.write_text("timestamp,f0,label\n2000,1,0\n1000,2,0\n")
        with pytest.raises(NonMonotonicTimestamps):
            load_csv(path)

    def test_parse_error_carries_row(self, tmp_path):
        path = tmp_path / "junk.csv"
        path.write_text("timestamp,f0,label\n1000,1.0,0\n2000,oops,0\n")
        with pytest.raises(ParseError) as err:
            load_csv(path)
        assert err.value.row == 3  # header is line 1

    def test_seven_column_sensor_fixture(self, tmp_path):
        # timestamp + five sensor columns + label = 7 columns, 5 features
        path = tmp_path / "sensors.csv"
        path.write_text(
            "timestamp,temperature,humidity,air_quality,light,loudness,label\n"
            "1000,24.45,44.31,75,255,644,0\n"
            "2000,24.50,44.20,76,250,640,0\n"
        )
        frame = load_csv(path)
        assert frame.n_features == 5
        assert frame.feature_names == (
            "temperature", "humidity", "air_quality", "light", "loudness")

    def test_wide_schema_selection(self, tmp_path):
        # wide CSV loads through schema config rather than hardcoded names
        path = tmp_path / "wide.csv"
        cols = ",".join(f"s{i}" for i in range(10))
        path.write_text(
            f"ts,{cols},flag\n" + "5," + ",".join("1.0" for _ in range(10)) + ",0\n"
            + "6," + ",".join("2.0" for _ in range(10)) + ",1\n"
        )
        schema = CsvSchema(timestamp_column="ts", label_column="flag")
        frame = load_csv(path, schema)
        assert frame.n_features == 10


class TestSynthesize:
    def test_ramp_labels_injection_width(self):
        inj = AnomalyInjection(40, 60, InjectionMode.RAMP, 5.0, (0,))
        frame = synthesize(100, 2, seed=7, injections=[inj])
        assert int((frame.labels == LABEL_ANOMALOUS).sum()) == 20

    def test_no_injections_all_normal(self):
        frame = synthesize(50, 3, seed=1)
        assert (frame.labels == LABEL_NORMAL).all()

    def test_deterministic_in_seed(self):
        a = synthesize(64, 2, seed=3)
        b = synthesize(64, 2, seed=3)
        assert np.array_equal(a.features, b.features)
        assert not np.array_equal(a.features, synthesize(64, 2, seed=4).features)

    def test_out_of_bounds(self):
        with pytest.raises(InjectionOutOfBounds):
            synthesize(10, 1, 0, [AnomalyInjection(5, 11)])
        with pytest.raises(InjectionOutOfBounds):
            synthesize(10, 1, 0, [AnomalyInjection(0, 5, target_features=(3,))])

    def test_spike_moves_target_feature_only(self):
        inj = AnomalyInjection(10, 20, InjectionMode.SPIKE, 100.0, (1,))
        spiked = synthesize(30, 2, seed=5, injections=[inj])
        clean = synthesize(30, 2, seed=5)
        assert np.array_equal(spiked.features[:, 0], clean.features[:, 0])
        assert (spiked.features[10:20, 1] > clean.features[10:20, 1] + 50).all()

    def test_stuck_holds_first_value(self):
        inj = AnomalyInjection(10, 15, InjectionMode.STUCK, 0.0, (0,))
        frame = synthesize(30, 1, seed=5, injections=[inj])
        assert np.unique(frame.features[10:15, 0]).size == 1

    def test_union_of_overlapping_injections(self):
        frame = synthesize(30, 1, seed=0, injections=[
            AnomalyInjection(5, 10), AnomalyInjection(8, 12),
        ])
        assert int(frame.labels.sum()) == 7  # rows 5..11


class TestSplit:
    def test_plain_80_20(self):
        train, test = split(make_frame(100), 0.8)
        assert train.n_rows == 80 and test.n_rows == 20

    def test_anomalous_rows_dropped_from_train(self):
        frame = make_frame(100, anomalous=range(70, 80))
        train, test = split(frame, 0.8)
        assert train.n_rows == 70
        assert test.n_rows == 20
        assert (train.labels == LABEL_NORMAL).all()

    def test_chronological_not_shuffled(self):
        train, test = split(make_frame(10), 0.5)
        assert train.timestamps.max() < test.timestamps.min()

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.5, 1.5])
    def test_degenerate_fraction(self, fraction):
        with pytest.raises(DegenerateSplit):
            split(make_frame(10), fraction)

    def test_degenerate_tiny_frame(self):
        with pytest.raises(DegenerateSplit):
            split(make_frame(1), 0.5)


def test_concat_appends():
    a = make_frame(5)
    b = TimeSeriesFrame(
        timestamps=np.arange(5, 8) * 1000,
        features=np.ones((3, 2)),
        feature_names=("f0", "f1"),
        labels=np.zeros(3, dtype=np.int8),
    )
    merged = concat(a, b)
    assert merged.n_rows == 8
