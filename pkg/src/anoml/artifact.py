"""Binary model artifact container shared across the pipeline.

Layout (all integers little-endian):

    magic            4 bytes  "ANML"
    format version   u16
    detector tag     u8       1 = isolation forest, 2 = one-class SVM, 3 = autoencoder
    metadata length  u32
    metadata         UTF-8, canonical JSON (sorted keys, no whitespace)
    payload length   u64
    payload          detector-specific, little-endian throughout
    checksum         u32      CRC-32 of every preceding byte

Packaging the result of a load reproduces the input byte for byte, and a
loaded model scores identically to the one that was packaged.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .detect import (
    AutoencoderModel,
    FeatureMap,
    IsolationForestModel,
    IsolationTree,
    OneClassSvmModel,
)

MAGIC = b"ANML"
FORMAT_VERSION = 1

TAG_IFOREST = 1
TAG_OCSVM = 2
TAG_AUTOENCODER = 3

_HEAD = struct.Struct("<4sHB")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


class ArtifactError(ValueError):
    pass


class ChecksumMismatch(ArtifactError):
    pass


class UnsupportedVersion(ArtifactError):
    pass


class UnknownDetectorTag(ArtifactError):
    pass


@dataclass(frozen=True)
class ModelArtifact:
    data: bytes
    checksum: int
    detector_tag: int
    metadata: dict

    @property
    def model_id(self) -> str:
        return f"{self.checksum:08x}"

    @property
    def size_kb(self) -> float:
        return len(self.data) / 1024.0


def _f64(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _i32(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<i4").tobytes()


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ArtifactError("payload truncated")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def f64_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)

    def i32_array(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<i4").astype(np.int32)


def _encode_iforest(model: IsolationForestModel) -> bytes:
    parts = [struct.pack("<IIIIq", model.n_trees, model.n_features,
                         model.subsample_size, model.height_limit, model.seed)]
    for tree in model.trees:
        parts.append(_U32.pack(tree.n_nodes))
        parts.append(_i32(tree.feature))
        parts.append(_f64(tree.threshold))
        parts.append(_i32(tree.left))
        parts.append(_i32(tree.right))
        parts.append(_i32(tree.size))
    return b"".join(parts)


def _decode_iforest(reader: _Reader) -> IsolationForestModel:
    n_trees, n_features, subsample, height_limit, seed = struct.unpack(
        "<IIIIq", reader.take(24))
    trees = []
    for _ in range(n_trees):
        n_nodes = reader.u32()
        trees.append(IsolationTree(
            feature=reader.i32_array(n_nodes),
            threshold=reader.f64_array(n_nodes),
            left=reader.i32_array(n_nodes),
            right=reader.i32_array(n_nodes),
            size=reader.i32_array(n_nodes),
        ))
    return IsolationForestModel(
        trees=tuple(trees), n_features=n_features,
        subsample_size=subsample, height_limit=height_limit, seed=seed,
    )


def _encode_ocsvm(model: OneClassSvmModel) -> bytes:
    fmap = model.feature_map
    is_rff = fmap.omega is not None
    parts = [struct.pack(
        "<BIIdddIdq",
        1 if is_rff else 0,
        fmap.input_dim, fmap.output_dim, fmap.gamma,
        model.rho, model.nu, model.epochs, model.lr, model.seed,
    )]
    parts.append(_f64(model.w))
    if is_rff:
        parts.append(_f64(fmap.omega))
        parts.append(_f64(fmap.beta))
    return b"".join(parts)


def _decode_ocsvm(reader: _Reader) -> OneClassSvmModel:
    is_rff, input_dim, output_dim, gamma, rho, nu, epochs, lr, seed = struct.unpack(
        "<BIIdddIdq", reader.take(struct.calcsize("<BIIdddIdq")))
    w = reader.f64_array(output_dim)
    if is_rff:
        omega = reader.f64_array(input_dim * output_dim).reshape(input_dim, output_dim)
        beta = reader.f64_array(output_dim)
        fmap = FeatureMap(input_dim=input_dim, omega=omega, beta=beta, gamma=gamma)
    else:
        fmap = FeatureMap(input_dim=input_dim)
    return OneClassSvmModel(feature_map=fmap, w=w, rho=rho, nu=nu,
                            epochs=epochs, lr=lr, seed=seed)


def _encode_autoencoder(model: AutoencoderModel) -> bytes:
    parts = [struct.pack(
        "<IIIddIdq",
        model.input_dim, model.hidden_dim, model.bottleneck_dim,
        model.threshold, model.quantile, model.epochs, model.lr, model.seed,
    )]
    for w in model.weights:
        parts.append(_f64(w))
    for b in model.biases:
        parts.append(_f64(b))
    return b"".join(parts)


def _decode_autoencoder(reader: _Reader) -> AutoencoderModel:
    d, h, b, tau, quantile, epochs, lr, seed = struct.unpack(
        "<IIIddIdq", reader.take(struct.calcsize("<IIIddIdq")))
    shapes = [(d, h), (h, b), (b, h), (h, d)]
    weights = tuple(
        reader.f64_array(fi * fo).reshape(fi, fo) for fi, fo in shapes
    )
    biases = tuple(reader.f64_array(fo) for _, fo in shapes)
    return AutoencoderModel(
        input_dim=d, hidden_dim=h, bottleneck_dim=b,
        weights=weights, biases=biases,
        threshold=tau, quantile=quantile, epochs=epochs, lr=lr, seed=seed,
    )


_ENCODERS = {
    IsolationForestModel: (TAG_IFOREST, _encode_iforest),
    OneClassSvmModel: (TAG_OCSVM, _encode_ocsvm),
    AutoencoderModel: (TAG_AUTOENCODER, _encode_autoencoder),
}

_DECODERS = {
    TAG_IFOREST: _decode_iforest,
    TAG_OCSVM: _decode_ocsvm,
    TAG_AUTOENCODER: _decode_autoencoder,
}

DETECTOR_NAMES = {TAG_IFOREST: "if", TAG_OCSVM: "ocsvm", TAG_AUTOENCODER: "ae"}


def detector_tag_of(model) -> int:
    try:
        return _ENCODERS[type(model)][0]
    except KeyError:
        raise ArtifactError(f"cannot package a {type(model).__name__}") from None


def package_model(model, metadata: dict | None = None) -> ModelArtifact:
    tag, encoder = _ENCODERS.get(type(model), (None, None))
    if encoder is None:
        raise ArtifactError(f"cannot package a {type(model).__name__}")
    meta = dict(metadata or {})
    meta.setdefault("detector", DETECTOR_NAMES[tag])
    meta.setdefault("format_version", FORMAT_VERSION)
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode()
    payload = encoder(model)
    body = (
        _HEAD.pack(MAGIC, FORMAT_VERSION, tag)
        + _U32.pack(len(meta_bytes)) + meta_bytes
        + _U64.pack(len(payload)) + payload
    )
    checksum = zlib.crc32(body)
    return ModelArtifact(
        data=body + _U32.pack(checksum),
        checksum=checksum,
        detector_tag=tag,
        metadata=meta,
    )


def load_model(data: bytes):
    """Verify and decode an artifact; returns (model, metadata)."""
    if len(data) < _HEAD.size + 4 + 8 + 4:
        raise ArtifactError("artifact too short")
    body, stored = data[:-4], _U32.unpack(data[-4:])[0]
    if zlib.crc32(body) != stored:
        raise ChecksumMismatch(
            f"stored CRC {stored:08x} != computed {zlib.crc32(body):08x}")
    magic, version, tag = _HEAD.unpack_from(body)
    if magic != MAGIC:
        raise ArtifactError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"format version {version} not supported")
    reader = _Reader(body)
    reader.pos = _HEAD.size
    meta_len = reader.u32()
    metadata = json.loads(reader.take(meta_len).decode())
    payload_len = _U64.unpack(reader.take(8))[0]
    payload = reader.take(payload_len)
    if reader.pos != len(body):
        raise ArtifactError("trailing bytes after payload")
    decoder = _DECODERS.get(tag)
    if decoder is None:
        raise UnknownDetectorTag(f"detector tag {tag} unknown")
    model = decoder(_Reader(payload))
    return model, metadata


def load_artifact(data: bytes) -> ModelArtifact:
    """Verify the container and return it without decoding the model."""
    model, metadata = load_model(data)
    tag = detector_tag_of(model)
    return ModelArtifact(data=bytes(data), checksum=_U32.unpack(data[-4:])[0],
                         detector_tag=tag, metadata=metadata)


def save_artifact(artifact: ModelArtifact, path) -> None:
    Path(path).write_bytes(artifact.data)


def read_artifact(path) -> ModelArtifact:
    return load_artifact(Path(path).read_bytes())
