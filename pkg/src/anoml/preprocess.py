"""Sliding windows plus the scaling/reduction design space.

Two scalers preserve the multivariate shape:

    minmax    (x - min) / (max - min), per feature, to [0, 1] on train data
    standard  (x - mean) / std, per feature, population std

Five reducers collapse each time step's feature vector to one statistic,
turning an (n, window, d) tensor into (n, window, 1):

    average   mean
    stdev     population standard deviation, sqrt(m2)
    skew      m3 / m2^(3/2), 0 when m2 = 0
    kurtosis  m4 / m2^2 - 3 (excess), 0 when m2 = 0
    mad       median(|x - median(x)|)

All moments are population moments (divide by n), so one-element vectors
stay finite. Scalers fit on the training partition only and are reused
as-is at inference; minmax output can leave [0, 1] on unseen data and is
deliberately not clamped.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np

from .dataset import TimeSeriesFrame, LABEL_ANOMALOUS

DEFAULT_WINDOW_LEN = 30


class PreprocessError(ValueError):
    pass


class FrameTooShort(PreprocessError):
    pass


class FeatureCountMismatch(PreprocessError):
    pass


class EmptyFeatureVector(PreprocessError):
    pass


class ScalerKind(Enum):
    MINMAX = "minmax"
    STANDARD = "standard"
    NONE = "none"


class Reducer(Enum):
    AVERAGE = "average"
    STDEV = "stdev"
    SKEW = "skew"
    KURTOSIS = "kurtosis"
    MAD = "mad"


# Short SR tokens accepted in configs and the CLI alongside full names.
_SR_ALIASES: dict[str, ScalerKind | Reducer] = {
    "mm": ScalerKind.MINMAX, "minmax": ScalerKind.MINMAX,
    "ss": ScalerKind.STANDARD, "standard": ScalerKind.STANDARD,
    "ns": ScalerKind.NONE, "none": ScalerKind.NONE,
    "average": Reducer.AVERAGE, "avg": Reducer.AVERAGE, "mean": Reducer.AVERAGE,
    "stdev": Reducer.STDEV, "std": Reducer.STDEV,
    "skew": Reducer.SKEW,
    "kurtosis": Reducer.KURTOSIS, "kurt": Reducer.KURTOSIS,
    "mad": Reducer.MAD,
}


def sr_from_token(token: str) -> ScalerKind | Reducer:
    try:
        return _SR_ALIASES[token.strip().lower()]
    except KeyError:
        raise PreprocessError(
            f"unknown scaling/reduction token {token!r}; "
            f"expected one of {sorted(set(_SR_ALIASES))}"
        ) from None


@dataclass(frozen=True)
class WindowTensor:
    """(n_windows, window_len, n_features) view of a frame, stride 1.

    A window is labeled anomalous when any covered row is anomalous.
    `transform_chain` records what was applied, for provenance.
    """

    data: np.ndarray
    labels: np.ndarray
    source_id: str = ""
    transform_chain: tuple[str, ...] = ()

    def __post_init__(self):
        if self.data.ndim != 3:
            raise PreprocessError("window tensor must be 3-D")
        if len(self.labels) != self.data.shape[0]:
            raise PreprocessError("one label per window required")

    @property
    def n_windows(self) -> int:
        return self.data.shape[0]

    @property
    def window_len(self) -> int:
        return self.data.shape[1]

    @property
    def n_features(self) -> int:
        return self.data.shape[2]

    def flat(self) -> np.ndarray:
        """Windows as (n_windows, window_len * n_features) detector inputs."""
        return self.data.reshape(self.n_windows, -1)


def make_windows(frame: TimeSeriesFrame, window_len: int = DEFAULT_WINDOW_LEN,
                 stride: int = 1) -> WindowTensor:
    if window_len < 1:
        raise PreprocessError("window_len must be >= 1")
    if stride < 1:
        raise PreprocessError("stride must be >= 1")
    if frame.n_rows < window_len:
        raise FrameTooShort(f"{frame.n_rows} rows cannot fill a window of {window_len}")
    return _windows_from_arrays(frame.features, frame.labels, window_len, stride)


def _windows_from_arrays(features: np.ndarray, labels: np.ndarray,
                         window_len: int, stride: int) -> WindowTensor:
    n_rows = features.shape[0]
    n_windows = (n_rows - window_len) // stride + 1
    starts = np.arange(n_windows) * stride
    data = np.stack([features[s:s + window_len] for s in starts])
    anomalous = np.array([
        (labels[s:s + window_len] == LABEL_ANOMALOUS).any() for s in starts
    ])
    return WindowTensor(data=data, labels=anomalous.astype(np.int8))


@dataclass(frozen=True)
class ScalerParams:
    """Per-feature statistics fitted on the training partition only.

    Features that are constant on train (max = min, or std = 0) are
    flagged degenerate and pass through as 0 wherever the params apply.
    """

    kind: ScalerKind
    offset: np.ndarray      # min (minmax) or mean (standard)
    scale: np.ndarray       # max - min, or std; 1.0 where degenerate
    degenerate: np.ndarray  # bool per feature

    @property
    def n_features(self) -> int:
        return len(self.offset)


def fit_scaler(kind: ScalerKind, train: np.ndarray) -> ScalerParams:
    train = np.asarray(train, dtype=np.float64)
    if train.ndim != 2 or train.size == 0:
        raise PreprocessError("scaler fits on a non-empty 2-D matrix")
    if kind is ScalerKind.NONE:
        d = train.shape[1]
        return ScalerParams(kind, np.zeros(d), np.ones(d), np.zeros(d, dtype=bool))
    if kind is ScalerKind.MINMAX:
        offset = train.min(axis=0)
        scale = train.max(axis=0) - offset
        degenerate = scale == 0.0
    else:
        offset = train.mean(axis=0)
        scale = train.std(axis=0)  # population std
        # max = min means the true std is 0 even when the float one is an
        # ulp-sized residue; either way the feature is degenerate
        degenerate = (scale == 0.0) | (train.max(axis=0) == train.min(axis=0))
    safe_scale = np.where(degenerate, 1.0, scale)
    return ScalerParams(kind, offset, safe_scale, degenerate)


def apply_scaler(params: ScalerParams, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise PreprocessError("apply_scaler expects a 2-D matrix")
    if features.shape[1] != params.n_features:
        raise FeatureCountMismatch(
            f"params fitted on {params.n_features} features, data has {features.shape[1]}")
    if params.kind is ScalerKind.NONE:
        return features.copy()
    out = (features - params.offset) / params.scale
    out[:, params.degenerate] = 0.0
    return out


def reduce_rows(features: np.ndarray, reducer: Reducer) -> np.ndarray:
    """Collapse each row's feature vector to one statistic: (n, d) -> (n, 1)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise PreprocessError("reduce_rows expects a 2-D matrix")
    if features.shape[1] < 1:
        raise EmptyFeatureVector("cannot reduce rows with zero features")

    if reducer is Reducer.AVERAGE:
        out = features.mean(axis=1)
    elif reducer is Reducer.STDEV:
        out = features.std(axis=1)
    elif reducer is Reducer.MAD:
        med = np.median(features, axis=1, keepdims=True)
        out = np.median(np.abs(features - med), axis=1)
    else:
        centered = features - features.mean(axis=1, keepdims=True)
        m2 = (centered ** 2).mean(axis=1)
        # A constant row has m2 = 0 in exact arithmetic; detect it by value
        # equality, because the float mean of a constant row can sit one
        # ulp off and the m2-normalized moments would amplify that noise.
        constant = (features == features[:, :1]).all(axis=1)
        live = ~constant & (m2 > 0.0)
        out = np.zeros(features.shape[0])
        if reducer is Reducer.SKEW:
            m3 = (centered ** 3).mean(axis=1)
            out[live] = m3[live] / m2[live] ** 1.5
        else:  # KURTOSIS, excess
            m4 = (centered ** 4).mean(axis=1)
            out[live] = m4[live] / m2[live] ** 2 - 3.0
    return out[:, None]


def reduce_block(block: np.ndarray, reducer: Reducer) -> np.ndarray:
    """Reduce one window block (window_len, d) -> (window_len, 1)."""
    return reduce_rows(block, reducer)


@dataclass
class TransformChain:
    """One scaler-or-reducer step plus windowing, as configured per run.

    fit() learns scaler statistics on the training frame; apply() turns
    any frame into the window tensor the detectors consume. Chains
    round-trip through plain dicts so model artifacts can carry them.
    """

    sr: ScalerKind | Reducer
    window_len: int = DEFAULT_WINDOW_LEN
    scaler_params: ScalerParams | None = None

    @classmethod
    def from_token(cls, token: str, window_len: int = DEFAULT_WINDOW_LEN) -> "TransformChain":
        return cls(sr=sr_from_token(token), window_len=window_len)

    @property
    def is_reduction(self) -> bool:
        return isinstance(self.sr, Reducer)

    def fit(self, train: TimeSeriesFrame) -> "TransformChain":
        if isinstance(self.sr, ScalerKind):
            self.scaler_params = fit_scaler(self.sr, train.features)
        return self

    def apply(self, frame: TimeSeriesFrame) -> WindowTensor:
        if isinstance(self.sr, Reducer):
            transformed = reduce_rows(frame.features, self.sr)
        else:
            if self.scaler_params is None:
                raise PreprocessError("transform chain not fitted; call fit() first")
            transformed = apply_scaler(self.scaler_params, frame.features)
        tensor = _windows_from_arrays(transformed, frame.labels, self.window_len, stride=1)
        return WindowTensor(
            data=tensor.data,
            labels=tensor.labels,
            source_id="",
            transform_chain=(self.sr.value, f"window{self.window_len}"),
        )

    @property
    def input_features(self) -> int | None:
        if self.scaler_params is not None:
            return self.scaler_params.n_features
        return None

    def to_dict(self) -> dict:
        record: dict = {"sr": self.sr.value, "window_len": self.window_len}
        if self.scaler_params is not None:
            record["scaler"] = {
                "kind": self.scaler_params.kind.value,
                "offset": [float(v) for v in self.scaler_params.offset],
                "scale": [float(v) for v in self.scaler_params.scale],
                "degenerate": [bool(v) for v in self.scaler_params.degenerate],
            }
        return record

    @classmethod
    def from_dict(cls, record: Mapping) -> "TransformChain":
        chain = cls(sr=sr_from_token(record["sr"]), window_len=int(record["window_len"]))
        scaler = record.get("scaler")
        if scaler is not None:
            chain.scaler_params = ScalerParams(
                kind=ScalerKind(scaler["kind"]),
                offset=np.array(scaler["offset"], dtype=np.float64),
                scale=np.array(scaler["scale"], dtype=np.float64),
                degenerate=np.array(scaler["degenerate"], dtype=bool),
            )
        return chain


# Flat binary layout for shipping window tensors: three little-endian
# int64 dims, then the row-major float64 body.
_DIMS = struct.Struct("<qqq")


def windows_to_bytes(tensor: WindowTensor) -> bytes:
    header = _DIMS.pack(tensor.n_windows, tensor.window_len, tensor.n_features)
    return header + tensor.data.astype("<f8").tobytes(order="C")


def windows_from_bytes(buf: bytes) -> WindowTensor:
    if len(buf) < _DIMS.size:
        raise PreprocessError("buffer too short for dims header")
    n_windows, window_len, n_features = _DIMS.unpack_from(buf)
    expected = _DIMS.size + 8 * n_windows * window_len * n_features
    if len(buf) != expected:
        raise PreprocessError(f"buffer is {len(buf)} bytes, dims imply {expected}")
    body = np.frombuffer(buf, dtype="<f8", offset=_DIMS.size)
    data = body.reshape(n_windows, window_len, n_features).astype(np.float64)
    return WindowTensor(data=data, labels=np.zeros(n_windows, dtype=np.int8))
