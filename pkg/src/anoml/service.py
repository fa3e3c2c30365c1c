"""HTTP inference service over a packaged model.

POST /infer with {"window": [[...], ...]} scores one window and answers
{"label": 0|1, "score": ..., "model_id": ..., "latency_ms": ...}.
GET /health reports model metadata. The model is immutable once loaded,
so concurrent requests are safe; before a model is attached every route
answers 503.
"""

from __future__ import annotations

import json
import threading
import time
import urllib.request
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from . import artifact as artifact_mod
from .detect import (
    AutoencoderModel,
    IFOREST_THRESHOLD,
    IsolationForestModel,
    OCSVM_THRESHOLD,
    OneClassSvmModel,
    ae_score_batch,
    classify,
    if_score_batch,
    ocsvm_decision_batch,
)


@dataclass(frozen=True)
class InferenceResponse:
    label: int
    score: float
    model_id: str
    latency_ms: float


def default_threshold(model) -> float:
    if isinstance(model, IsolationForestModel):
        return IFOREST_THRESHOLD
    if isinstance(model, OneClassSvmModel):
        return OCSVM_THRESHOLD
    if isinstance(model, AutoencoderModel):
        return model.threshold
    raise TypeError(f"unknown model type {type(model).__name__}")


def score_one(model, x: np.ndarray, threshold: float | None = None) -> tuple[float, int]:
    """Score a flat feature vector and classify against the decision threshold.

    threshold=None means the model family's default; a trained
    contamination-style override (carried in artifact metadata) can
    replace it.
    """
    x = np.asarray(x, dtype=np.float64)
    scores, _ = score_batch(model, x[None, :], threshold)
    score = float(scores[0])
    cutoff = default_threshold(model) if threshold is None else threshold
    return score, classify(score, cutoff)


def score_batch(model, X: np.ndarray,
                threshold: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized scores and labels for a matrix of flat windows."""
    X = np.asarray(X, dtype=np.float64)
    if isinstance(model, IsolationForestModel):
        scores = if_score_batch(model, X)
    elif isinstance(model, OneClassSvmModel):
        scores = ocsvm_decision_batch(model, X)
    elif isinstance(model, AutoencoderModel):
        scores = ae_score_batch(model, X)
    else:
        raise TypeError(f"cannot score with a {type(model).__name__}")
    cutoff = default_threshold(model) if threshold is None else threshold
    return scores, (scores > cutoff).astype(np.int8)


def model_input_dim(model) -> int:
    if isinstance(model, IsolationForestModel):
        return model.n_features
    if isinstance(model, OneClassSvmModel):
        return model.input_dim
    if isinstance(model, AutoencoderModel):
        return model.input_dim
    raise TypeError(f"unknown model type {type(model).__name__}")


class ModelServer:
    """Threaded HTTP server wrapping one immutable model."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self.model = None
        self.metadata: dict = {}
        self.model_id = ""
        self.threshold: float | None = None
        self._httpd = ThreadingHTTPServer((host, port), _make_handler(self))
        self._thread: threading.Thread | None = None

    def attach(self, model_artifact: artifact_mod.ModelArtifact) -> None:
        model, metadata = artifact_mod.load_model(model_artifact.data)
        self.metadata = metadata
        self.model_id = model_artifact.model_id
        self.threshold = metadata.get("threshold_override")
        self.model = model  # assigned last: readiness flag for handlers

    @property
    def address(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def wait(self) -> None:
        """Block until the server thread exits (interrupt to stop)."""
        while self._thread is not None and self._thread.is_alive():
            self._thread.join(1)


def _make_handler(server: ModelServer):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # keep test output quiet
            pass

        def _send(self, status: int, body: dict) -> None:
            data = json.dumps(body).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            if self.path != "/health":
                self._send(404, {"error": "not_found"})
                return
            if server.model is None:
                self._send(503, {"status": "loading"})
                return
            self._send(200, {
                "status": "ready",
                "model_id": server.model_id,
                "metadata": server.metadata,
            })

        def do_POST(self):
            if self.path != "/infer":
                self._send(404, {"error": "not_found"})
                return
            if server.model is None:
                self._send(503, {"error": "model_not_ready"})
                return
            started = time.perf_counter()
            try:
                length = int(self.headers.get("Content-Length", "0"))
                payload = json.loads(self.rfile.read(length).decode())
                window = np.asarray(payload["window"], dtype=np.float64)
            except (ValueError, KeyError, TypeError) as exc:
                self._send(400, {"error": "malformed_payload", "detail": str(exc)})
                return
            if window.ndim == 1:
                window = window[None, :]
            if window.ndim != 2:
                self._send(400, {"error": "malformed_payload",
                                 "detail": "window must be a 2-D array"})
                return
            flat = window.reshape(-1)
            expected = model_input_dim(server.model)
            if flat.size != expected:
                self._send(400, {
                    "error": "dimension_mismatch",
                    "detail": f"model expects {expected} values, got {flat.size}",
                })
                return
            score, label = score_one(server.model, flat, server.threshold)
            self._send(200, {
                "label": int(label),
                "score": score,
                "model_id": server.model_id,
                "latency_ms": (time.perf_counter() - started) * 1000.0,
            })

    return Handler


def serve(model_artifact: artifact_mod.ModelArtifact,
          host: str = "127.0.0.1", port: int = 0) -> ModelServer:
    """Load the artifact, bind, and start answering; returns the running server."""
    server = ModelServer(host, port)
    server.attach(model_artifact)
    server.start()
    return server


def infer(endpoint: str, window) -> InferenceResponse:
    """Client helper: POST one window to a running service."""
    window = np.asarray(window, dtype=np.float64)
    body = json.dumps({"window": window.tolist()}).encode()
    request = urllib.request.Request(
        endpoint.rstrip("/") + "/infer",
        data=body,
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(request) as response:
        answer = json.loads(response.read().decode())
    return InferenceResponse(
        label=int(answer["label"]),
        score=float(answer["score"]),
        model_id=str(answer["model_id"]),
        latency_ms=float(answer["latency_ms"]),
    )
