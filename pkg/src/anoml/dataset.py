"""Labeled time-series ingestion, synthesis with injected anomalies, and splitting.

Frames are immutable after construction (arrays are frozen). Labels use
0 for normal rows and 1 for anomalous rows, both in memory and in CSVs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

LABEL_NORMAL = 0
LABEL_ANOMALOUS = 1


class DatasetError(ValueError):
    pass


class MissingColumn(DatasetError):
    pass


class NonMonotonicTimestamps(DatasetError):
    pass


class ParseError(DatasetError):
    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


class InjectionOutOfBounds(DatasetError):
    pass


class DegenerateSplit(DatasetError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TimeSeriesFrame:
    """n_rows of timestamped feature vectors with per-row normal/anomalous labels."""

    timestamps: np.ndarray          # int64 ms, strictly increasing
    features: np.ndarray            # float64, n_rows x n_features
    feature_names: tuple[str, ...]
    labels: np.ndarray              # int8, 0 normal / 1 anomalous

    def __post_init__(self):
        object.__setattr__(self, "timestamps", _frozen(np.asarray(self.timestamps, dtype=np.int64)))
        object.__setattr__(self, "features", _frozen(np.asarray(self.features, dtype=np.float64)))
        object.__setattr__(self, "labels", _frozen(np.asarray(self.labels, dtype=np.int8)))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if self.features.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        n_rows, n_features = self.features.shape
        if n_features < 1:
            raise DatasetError("need at least one feature column")
        if len(self.timestamps) != n_rows or len(self.labels) != n_rows:
            raise DatasetError("timestamps, features and labels must have equal length")
        if len(self.feature_names) != n_features:
            raise DatasetError("feature_names length must match feature count")
        if n_rows > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise NonMonotonicTimestamps("timestamps must be strictly increasing")
        if not np.isin(self.labels, (LABEL_NORMAL, LABEL_ANOMALOUS)).all():
            raise DatasetError("labels must be 0 or 1")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for loading arbitrary wide CSVs.

    feature_columns=None means "every column that is not the timestamp
    or the label", which is how large external dumps load without
    enumerating a hundred names.
    """

    timestamp_column: str = "timestamp"
    label_column: str = "label"
    feature_columns: tuple[str, ...] | None = None

    @classmethod
    def from_config(cls, cfg: Mapping) -> "CsvSchema":
        features = cfg.get("feature_columns")
        return cls(
            timestamp_column=cfg.get("timestamp_column", "timestamp"),
            label_column=cfg.get("label_column", "label"),
            feature_columns=tuple(features) if features is not None else None,
        )


def load_csv(path, schema: CsvSchema = CsvSchema()) -> TimeSeriesFrame:
    """Load a labeled time-series CSV; bad cells fail with their row number."""
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise MissingColumn("CSV has no header row")
        header = list(reader.fieldnames)
        for required in (schema.timestamp_column, schema.label_column):
            if required not in header:
                raise MissingColumn(f"column {required!r} not in CSV header")
        if schema.feature_columns is None:
            feature_names = tuple(
                c for c in header
                if c not in (schema.timestamp_column, schema.label_column)
            )
        else:
            feature_names = tuple(schema.feature_columns)
            for name in feature_names:
                if name not in header:
                    raise MissingColumn(f"feature column {name!r} not in CSV header")
        if not feature_names:
            raise MissingColumn("no feature columns left after schema selection")

        timestamps, rows, labels = [], [], []
        for line_no, record in enumerate(reader, start=2):  # header is line 1
            try:
                timestamps.append(int(float(record[schema.timestamp_column])))
                labels.append(int(float(record[schema.label_column])))
                rows.append([float(record[name]) for name in feature_names])
            except (TypeError, ValueError) as exc:
                raise ParseError(str(exc), row=line_no) from None

    if not rows:
        raise DatasetError("CSV contains no data rows")
    return TimeSeriesFrame(
        timestamps=np.array(timestamps),
        features=np.array(rows),
        feature_names=feature_names,
        labels=np.array(labels),
    )


def write_csv(frame: TimeSeriesFrame, path) -> None:
    """Companion writer; load_csv(write_csv(frame)) round-trips exactly."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp", *frame.feature_names, "label"])
        for i in range(frame.n_rows):
            writer.writerow([
                int(frame.timestamps[i]),
                *(repr(float(v)) for v in frame.features[i]),
                int(frame.labels[i]),
            ])


class InjectionMode(Enum):
    RAMP = "ramp"    # linear drift from 0 up to magnitude across the range
    SPIKE = "spike"  # constant offset of magnitude across the range
    STUCK = "stuck"  # value frozen at the range's first row


@dataclass(frozen=True)
class AnomalyInjection:
    start_index: int
    end_index: int   # exclusive
    mode: InjectionMode = InjectionMode.SPIKE
    magnitude: float = 5.0
    target_features: tuple[int, ...] = (0,)


# One synthetic row per minute; a full slow cycle spans one day.
ROW_INTERVAL_MS = 60_000
ROWS_PER_CYCLE = 1440


def synthesize(n_rows: int, n_features: int, seed: int,
               injections: Sequence[AnomalyInjection] = ()) -> TimeSeriesFrame:
    """Day/night-style sinusoid per feature plus Gaussian noise, with anomalies injected.

    Rows covered by any injection are labeled anomalous; everything else
    is normal. Identical (arguments, seed) produce identical frames.
    """
    if n_rows < 1 or n_features < 1:
        raise DatasetError("need n_rows >= 1 and n_features >= 1")
    for inj in injections:
        if not (0 <= inj.start_index < inj.end_index <= n_rows):
            raise InjectionOutOfBounds(
                f"injection [{inj.start_index}, {inj.end_index}) outside 0..{n_rows}")
        for f in inj.target_features:
            if not 0 <= f < n_features:
                raise InjectionOutOfBounds(f"target feature {f} outside 0..{n_features - 1}")

    rng = np.random.default_rng(seed)
    t = np.arange(n_rows)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n_features)
    baselines = rng.uniform(15.0, 30.0, size=n_features)
    amplitudes = rng.uniform(3.0, 6.0, size=n_features)
    features = (
        baselines
        + amplitudes * np.sin(2.0 * np.pi * t[:, None] / ROWS_PER_CYCLE + phases)
        + rng.normal(0.0, 0.5, size=(n_rows, n_features))
    )

    labels = np.zeros(n_rows, dtype=np.int8)
    for inj in injections:
        span = inj.end_index - inj.start_index
        cols = list(inj.target_features)
        block = slice(inj.start_index, inj.end_index)
        if inj.mode is InjectionMode.RAMP:
            features[block, cols] += np.linspace(0.0, inj.magnitude, span)[:, None]
        elif inj.mode is InjectionMode.SPIKE:
            features[block, cols] += inj.magnitude
        else:  # STUCK
            features[block, cols] = features[inj.start_index, cols]
        labels[block] = LABEL_ANOMALOUS

    return TimeSeriesFrame(
        timestamps=t * ROW_INTERVAL_MS,
        features=features,
        feature_names=tuple(f"f{i}" for i in range(n_features)),
        labels=labels,
    )


def split(frame: TimeSeriesFrame, train_fraction: float) -> tuple[TimeSeriesFrame, TimeSeriesFrame]:
    """Chronological split; the train side keeps only normal rows.

    Detectors train unsupervised on normal behavior, so anomalous rows
    are dropped from the train partition. The test partition keeps
    everything, labels included.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DegenerateSplit(f"train_fraction {train_fraction} must be in (0, 1)")
    cut = int(frame.n_rows * train_fraction)
    if cut == 0 or cut == frame.n_rows:
        raise DegenerateSplit("split leaves one side empty")
    normal = frame.labels[:cut] == LABEL_NORMAL
    if not normal.any():
        raise DegenerateSplit("train side has no normal rows")
    train = TimeSeriesFrame(
        timestamps=frame.timestamps[:cut][normal],
        features=frame.features[:cut][normal],
        feature_names=frame.feature_names,
        labels=frame.labels[:cut][normal],
    )
    test = TimeSeriesFrame(
        timestamps=frame.timestamps[cut:],
        features=frame.features[cut:],
        feature_names=frame.feature_names,
        labels=frame.labels[cut:],
    )
    return train, test


def concat(first: TimeSeriesFrame, second: TimeSeriesFrame) -> TimeSeriesFrame:
    """Append a later frame to an earlier one (used by ingest --append)."""
    if first.feature_names != second.feature_names:
        raise DatasetError("cannot concat frames with different feature columns")
    return TimeSeriesFrame(
        timestamps=np.concatenate([first.timestamps, second.timestamps]),
        features=np.vstack([first.features, second.features]),
        feature_names=first.feature_names,
        labels=np.concatenate([first.labels, second.labels]),
    )
