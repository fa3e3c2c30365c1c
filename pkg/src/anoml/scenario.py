"""Detection-placement scenarios over the simulated transport.

A scenario replays a labeled dataset as wire messages through an
edge -> fog -> cloud topology and runs the packaged detector at the
configured tier. Hops upstream of the detection tier always carry raw
readings; hops downstream carry raw lines, binary verdicts, or scores
according to the forward policy.

Rows are reassembled in generation order at the detection tier (a real
gateway orders on the location/sensor identifiers), so transport jitter
affects timing only: the same artifact over the same dataset yields a
byte-identical metric block at every placement.

Replayed values ride the wire as 2-decimal floats, so detection sees the
same quantized stream a deployed gateway would.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from . import artifact as artifact_mod
from . import metrics as metrics_mod
from . import simnet, wire
from .dataset import TimeSeriesFrame
from .preprocess import TransformChain
from .service import model_input_dim, score_batch


class ForwardPolicy(Enum):
    RAW_ONLY = "raw_only"
    PROCESSED_BINARY = "processed_binary"
    PROCESSED_SCORE = "processed_score"


class PlacementUnsupported(ValueError):
    pass


# Under the realistic edge constraint microcontrollers only run the
# neural family; tree and SVM runtimes have no MCU conversion path.
EDGE_CAPABLE_DETECTORS = frozenset({"ae"})

_TIER_SEQUENCE = (simnet.Tier.EDGE, simnet.Tier.FOG, simnet.Tier.CLOUD)


@dataclass(frozen=True)
class ScenarioConfig:
    placement: simnet.Tier
    topology: simnet.Topology
    forward_policy: ForwardPolicy = ForwardPolicy.RAW_ONLY
    edge_node: str = "edge0"
    fog_node: str = "fog0"
    cloud_node: str = "cloud0"
    seed: int = 0

    def node_for(self, tier: simnet.Tier) -> str:
        return {
            simnet.Tier.EDGE: self.edge_node,
            simnet.Tier.FOG: self.fog_node,
            simnet.Tier.CLOUD: self.cloud_node,
        }[tier]


@dataclass(frozen=True)
class ScenarioReport:
    placement: str
    forward_policy: str
    report: metrics_mod.MetricReport
    link_latency_ms: float          # mean per-message path latency to the detection tier
    end_to_end_latency_ms: float    # link latency + per-window inference time
    rows_sent: int
    rows_at_detection: int
    upstream_messages: int

    def metric_block_bytes(self) -> bytes:
        return self.report.metric_block_bytes()


def default_chain_topology(edge_protocol: simnet.Protocol = simnet.Protocol.WIFI,
                           jitter_fraction: float = simnet.DEFAULT_JITTER_FRACTION) -> simnet.Topology:
    """One edge node, one fog gateway, one cloud endpoint."""
    nodes = [
        simnet.Node("edge0", simnet.Tier.EDGE),
        simnet.Node("fog0", simnet.Tier.FOG),
        simnet.Node("cloud0", simnet.Tier.CLOUD),
    ]
    links = {
        ("edge0", "fog0"): simnet.default_link(
            edge_protocol, simnet.TierPair.EDGE_FOG, jitter_fraction),
        ("fog0", "cloud0"): simnet.default_link(
            simnet.Protocol.WIFI, simnet.TierPair.FOG_CLOUD, jitter_fraction),
    }
    return simnet.build_topology(nodes, links)


_REPLAY_TYPES = tuple(wire.SensorType)


def _row_payload(values: np.ndarray, row_index: int) -> bytes:
    """Encode one dataset row as newline-joined wire lines, one per feature.

    Values always ride as floats so nothing beyond the 2-decimal wire
    quantization is lost, whatever sensor code the feature cycles onto.
    """
    lines = []
    for j, value in enumerate(values):
        reading = wire.SensorReading(
            identity=wire.NodeIdentity(location_id=0, sensor_id=j % 1000, mcu_id=0),
            sensor_type=_REPLAY_TYPES[j % len(_REPLAY_TYPES)],
            value=float(value),
            timestamp_ms=0,
        )
        lines.append(wire.encode_text(reading))
    return "\n".join(lines).encode("ascii")


def _decode_payload(payload: bytes) -> list[float]:
    return [float(wire.decode_text(line).value) for line in payload.decode("ascii").split("\n")]


def _route_to(config: ScenarioConfig, placement: simnet.Tier) -> list[tuple[str, str]]:
    hops: list[tuple[str, str]] = []
    for tier_from, tier_to in zip(_TIER_SEQUENCE, _TIER_SEQUENCE[1:]):
        if _TIER_SEQUENCE.index(placement) <= _TIER_SEQUENCE.index(tier_from):
            break
        hops.append((config.node_for(tier_from), config.node_for(tier_to)))
    return hops


def _check_route(topology: simnet.Topology, hops: Sequence[tuple[str, str]]) -> None:
    for src, dst in hops:
        if (src, dst) not in topology.links:
            raise PlacementUnsupported(
                f"topology has no {src} -> {dst} link required by this placement")


def run_scenario(config: ScenarioConfig, model_artifact: artifact_mod.ModelArtifact,
                 frame: TimeSeriesFrame, seed: int | None = None,
                 realistic_edge: bool = False,
                 timing_repetitions: int = 3) -> ScenarioReport:
    """Replay `frame` through the topology and detect at the configured tier."""
    seed = config.seed if seed is None else seed
    detector = model_artifact.metadata.get("detector", "")
    if realistic_edge and config.placement is simnet.Tier.EDGE \
            and detector not in EDGE_CAPABLE_DETECTORS:
        raise PlacementUnsupported(
            f"edge tier cannot run detector {detector!r} under the realistic-edge constraint")

    model, metadata = artifact_mod.load_model(model_artifact.data)
    chain = TransformChain.from_dict(metadata["transform"])

    hops = _route_to(config, config.placement)
    _check_route(config.topology, hops)

    n_rows = frame.n_rows
    payloads = [_row_payload(frame.features[i], i) for i in range(n_rows)]
    base_times = (frame.timestamps - frame.timestamps[0]).astype(np.float64)

    # Transport to the detection tier, hop by hop; each hop reuses the
    # previous hop's arrival time as its send time.
    current_times = base_times.copy()
    for hop_index, (src, dst) in enumerate(hops):
        packets = [
            simnet.Packet(payloads[i], src, dst, float(current_times[i]))
            for i in range(n_rows)
        ]
        events = simnet.run(config.topology, packets, seed + hop_index)
        arrival = np.empty(n_rows)
        by_identity = {id(e.packet): e for e in events}
        for i, packet in enumerate(packets):
            event = by_identity[id(packet)]
            if event.dropped:
                raise PlacementUnsupported(
                    "scenario links must not drop packets; got a dropped row")
            arrival[i] = event.deliver_time_ms
        current_times = arrival
    path_latency = current_times - base_times
    link_latency_ms = float(path_latency.mean()) if hops else 0.0

    # Reassemble rows at the detection tier from the wire image.
    decoded = np.array([_decode_payload(p) for p in payloads])
    at_tier = TimeSeriesFrame(
        timestamps=frame.timestamps,
        features=decoded,
        feature_names=frame.feature_names,
        labels=frame.labels,
    )

    scale_timing = metrics_mod.timeit(lambda: chain.apply(at_tier), timing_repetitions)
    tensor = chain.apply(at_tier)
    flat = tensor.flat()
    expected = model_input_dim(model)
    if flat.shape[1] != expected:
        raise PlacementUnsupported(
            f"artifact expects {expected}-value windows, transform produced {flat.shape[1]}")

    threshold = metadata.get("threshold_override")
    inference_timing = metrics_mod.timeit(
        lambda: score_batch(model, flat, threshold), timing_repetitions)
    scores, predictions = score_batch(model, flat, threshold)

    counts = metrics_mod.confusion(predictions, tensor.labels)
    try:
        auc_value = metrics_mod.auc(scores, tensor.labels)
    except metrics_mod.SingleClass:
        auc_value = 0.0

    per_window_ms = inference_timing.mean_ms / max(1, tensor.n_windows)
    report = metrics_mod.MetricReport(
        algorithm=detector,
        sr=metadata["transform"]["sr"],
        placement=config.placement.value,
        counts=counts,
        auc=auc_value,
        inference_time_ms=per_window_ms,
        scaling_reduction_time_s=scale_timing.mean_ms / 1000.0,
        model_size_kb=model_artifact.size_kb,
    )

    upstream = _forward_downstream(config, predictions, scores, payloads, seed)

    return ScenarioReport(
        placement=config.placement.value,
        forward_policy=config.forward_policy.value,
        report=report,
        link_latency_ms=link_latency_ms,
        end_to_end_latency_ms=link_latency_ms + per_window_ms,
        rows_sent=n_rows,
        rows_at_detection=len(decoded),
        upstream_messages=upstream,
    )


def _forward_downstream(config: ScenarioConfig, predictions: np.ndarray,
                        scores: np.ndarray, payloads: list[bytes], seed: int) -> int:
    """Ship post-detection results up the remaining tiers; returns message count."""
    start = _TIER_SEQUENCE.index(config.placement)
    remaining = [
        (config.node_for(a), config.node_for(b))
        for a, b in zip(_TIER_SEQUENCE[start:], _TIER_SEQUENCE[start + 1:])
    ]
    remaining = [(s, d) for s, d in remaining if (s, d) in config.topology.links]
    if not remaining:
        return 0
    if config.forward_policy is ForwardPolicy.RAW_ONLY:
        messages = payloads
    elif config.forward_policy is ForwardPolicy.PROCESSED_BINARY:
        messages = [str(int(p)).encode() for p in predictions]
    else:
        messages = [f"{s:.6f}".encode() for s in scores]
    total = 0
    for hop_index, (src, dst) in enumerate(remaining):
        packets = [
            simnet.Packet(m, src, dst, float(i)) for i, m in enumerate(messages)
        ]
        simnet.run(config.topology, packets, seed + 100 + hop_index)
        total += len(packets)
    return total


def scenario_from_config(cfg: Mapping) -> ScenarioConfig:
    """Build a ScenarioConfig from the shared dialect.

    Either an inline topology (``[[nodes]]``/``[[links]]`` tables) or the
    default three-tier chain tuned by `edge_protocol`/`jitter_fraction`.
    """
    if "nodes" in cfg:
        topology = simnet.topology_from_config(cfg)
    else:
        topology = default_chain_topology(
            edge_protocol=simnet.Protocol.from_token(str(cfg.get("edge_protocol", "wifi"))),
            jitter_fraction=float(cfg.get("jitter_fraction", simnet.DEFAULT_JITTER_FRACTION)),
        )
    return ScenarioConfig(
        placement=simnet.Tier(str(cfg.get("placement", "cloud"))),
        topology=topology,
        forward_policy=ForwardPolicy(str(cfg.get("forward_policy", "raw_only"))),
        edge_node=str(cfg.get("edge_node", "edge0")),
        fog_node=str(cfg.get("fog_node", "fog0")),
        cloud_node=str(cfg.get("cloud_node", "cloud0")),
        seed=int(cfg.get("seed", 0)),
    )
