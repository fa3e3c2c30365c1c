"""Discrete-event simulation of edge/fog/cloud links over four wireless protocols.

Link latency defaults come from bench measurements of single-hop
transfers (devices adjacent, no obstructions, zero observed drop); the
per-packet latency model is Normal(mean, jitter) clamped at zero, with
jitter defaulting to 10% of the mean. Runs are pure functions of
(topology, workload, seed).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np


class Protocol(Enum):
    WIFI = "wifi"
    BT_CLASSIC = "bt_classic"
    BLE = "ble"
    ZIGBEE = "zigbee"

    @classmethod
    def from_token(cls, token: str) -> "Protocol":
        aliases = {
            "wifi": cls.WIFI, "wf": cls.WIFI,
            "bt_classic": cls.BT_CLASSIC, "bluetooth_classic": cls.BT_CLASSIC, "bc": cls.BT_CLASSIC,
            "ble": cls.BLE, "bl": cls.BLE,
            "zigbee": cls.ZIGBEE, "zb": cls.ZIGBEE,
        }
        try:
            return aliases[token.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown protocol {token!r}") from None


class Tier(Enum):
    EDGE = "edge"
    FOG = "fog"
    CLOUD = "cloud"


class TierPair(Enum):
    EDGE_EDGE = "edge_edge"
    EDGE_FOG = "edge_fog"
    FOG_FOG = "fog_fog"
    FOG_CLOUD = "fog_cloud"


# Measured single-hop means in milliseconds; pairs a protocol cannot
# serve are simply absent (only Wi-Fi reaches the cloud).
LINK_LATENCY_MS: dict[tuple[Protocol, TierPair], float] = {
    (Protocol.WIFI, TierPair.EDGE_EDGE): 18.24,
    (Protocol.WIFI, TierPair.EDGE_FOG): 14.566,
    (Protocol.WIFI, TierPair.FOG_FOG): 17.25,
    (Protocol.WIFI, TierPair.FOG_CLOUD): 21.23,
    (Protocol.BT_CLASSIC, TierPair.EDGE_EDGE): 195.13,
    (Protocol.BT_CLASSIC, TierPair.EDGE_FOG): 171.15,
    (Protocol.BT_CLASSIC, TierPair.FOG_FOG): 187.15,
    (Protocol.BLE, TierPair.EDGE_EDGE): 11.23,
    (Protocol.BLE, TierPair.EDGE_FOG): 13.45,
    (Protocol.BLE, TierPair.FOG_FOG): 13.21,
    (Protocol.ZIGBEE, TierPair.EDGE_EDGE): 18.56,
    (Protocol.ZIGBEE, TierPair.EDGE_FOG): 16.66,
    (Protocol.ZIGBEE, TierPair.FOG_FOG): 14.56,
}

DEFAULT_JITTER_FRACTION = 0.1
BT_CLASSIC_MAX_PEERS = 7   # classic piconet: one master, seven slaves
BLE_MAX_PERIPHERALS = 20   # parallel connections a typical central SoC sustains


class SimError(Exception):
    pass


class UnsupportedPair(SimError):
    pass


class UnknownLink(SimError):
    pass


class EmptyTrace(SimError):
    pass


class TopologyViolation(SimError):
    pass


class BtClassicFanoutExceeded(TopologyViolation):
    pass


class BlePeripheralLimitExceeded(TopologyViolation):
    pass


class FogCloudRequiresWiFi(TopologyViolation):
    pass


class InvalidTopology(SimError):
    """Wraps the full list of structural violations found in one pass."""

    def __init__(self, violations: Sequence[TopologyViolation]):
        super().__init__("; ".join(str(v) for v in violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class LinkModel:
    protocol: Protocol
    tier_pair: TierPair
    mean_latency_ms: float
    jitter_std_ms: float = 0.0
    drop_probability: float = 0.0

    def __post_init__(self):
        if self.mean_latency_ms <= 0:
            raise ValueError("mean_latency_ms must be > 0")
        if self.jitter_std_ms < 0:
            raise ValueError("jitter_std_ms must be >= 0")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must be in [0, 1]")


@dataclass(frozen=True)
class Node:
    node_id: str
    tier: Tier


@dataclass(frozen=True)
class Topology:
    nodes: Mapping[str, Node]
    links: Mapping[tuple[str, str], LinkModel]


@dataclass(frozen=True)
class Packet:
    payload: bytes
    source: str
    destination: str
    send_time_ms: float


@dataclass(frozen=True)
class TraceEvent:
    """Delivery record; the sampled latency is stored so that
    deliver_time == send_time + latency holds without float residue."""

    packet: Packet
    latency_ms: float | None  # None means the packet was dropped

    @property
    def dropped(self) -> bool:
        return self.latency_ms is None

    @property
    def deliver_time_ms(self) -> float | None:
        if self.latency_ms is None:
            return None
        return self.packet.send_time_ms + self.latency_ms


@dataclass(frozen=True)
class LatencyStats:
    mean: float
    std: float
    min: float
    max: float
    count: int


def default_link(protocol: Protocol, tier_pair: TierPair,
                 jitter_fraction: float = DEFAULT_JITTER_FRACTION) -> LinkModel:
    """Link with the measured mean for (protocol, tier pair) and 10% jitter."""
    try:
        mean = LINK_LATENCY_MS[(protocol, tier_pair)]
    except KeyError:
        raise UnsupportedPair(
            f"{protocol.value} cannot serve a {tier_pair.value} hop"
        ) from None
    return LinkModel(protocol, tier_pair, mean, jitter_std_ms=jitter_fraction * mean)


def tier_pair_of(source: Node, dest: Node) -> TierPair:
    pair = {
        (Tier.EDGE, Tier.EDGE): TierPair.EDGE_EDGE,
        (Tier.EDGE, Tier.FOG): TierPair.EDGE_FOG,
        (Tier.FOG, Tier.FOG): TierPair.FOG_FOG,
        (Tier.FOG, Tier.CLOUD): TierPair.FOG_CLOUD,
    }.get((source.tier, dest.tier))
    if pair is None:
        raise UnsupportedPair(f"no hop kind for {source.tier.value} -> {dest.tier.value}")
    return pair


def validate_topology(nodes: Sequence[Node],
                      links: Mapping[tuple[str, str], LinkModel]) -> list[TopologyViolation]:
    """Return every structural violation (empty list means valid)."""
    violations: list[TopologyViolation] = []
    by_id = {n.node_id: n for n in nodes}

    peers: dict[tuple[str, Protocol], set[str]] = {}
    for (src, dst), link in links.items():
        if link.tier_pair is TierPair.FOG_CLOUD and link.protocol is not Protocol.WIFI:
            violations.append(FogCloudRequiresWiFi(
                f"link {src}->{dst} is fog-to-cloud but uses {link.protocol.value}"))
        if link.protocol in (Protocol.BT_CLASSIC, Protocol.BLE):
            peers.setdefault((src, link.protocol), set()).add(dst)
            peers.setdefault((dst, link.protocol), set()).add(src)
        for endpoint in (src, dst):
            if endpoint not in by_id:
                violations.append(TopologyViolation(
                    f"link {src}->{dst} references unknown node {endpoint!r}"))

    for (node_id, protocol), attached in peers.items():
        if protocol is Protocol.BT_CLASSIC and len(attached) > BT_CLASSIC_MAX_PEERS:
            violations.append(BtClassicFanoutExceeded(
                f"{node_id} has {len(attached)} Bluetooth Classic peers, max {BT_CLASSIC_MAX_PEERS}"))
        if protocol is Protocol.BLE and len(attached) > BLE_MAX_PERIPHERALS:
            violations.append(BlePeripheralLimitExceeded(
                f"{node_id} has {len(attached)} BLE peripherals, max {BLE_MAX_PERIPHERALS}"))
    return violations


def build_topology(nodes: Sequence[Node],
                   links: Mapping[tuple[str, str], LinkModel]) -> Topology:
    """Validate structure and freeze; raises InvalidTopology with all violations."""
    violations = validate_topology(nodes, links)
    if violations:
        raise InvalidTopology(violations)
    return Topology(nodes={n.node_id: n for n in nodes}, links=dict(links))


def run(topology: Topology, workload: Sequence[Packet], seed: int) -> list[TraceEvent]:
    """Simulate the workload and return delivery events.

    Deterministic in (topology, workload, seed). Per packet the latency is
    drawn from Normal(mean, jitter) and clamped at zero; with zero jitter
    no draw happens and the latency is exactly the configured mean.
    Delivered events come back ordered by (deliver time, send time,
    schedule position); dropped packets follow in schedule order.
    """
    rng = np.random.default_rng(seed)
    delivered: list[tuple[float, float, int, TraceEvent]] = []
    dropped: list[TraceEvent] = []
    for index, packet in enumerate(workload):
        link = topology.links.get((packet.source, packet.destination))
        if link is None:
            raise UnknownLink(f"no link {packet.source} -> {packet.destination}")
        if link.drop_probability > 0 and rng.random() < link.drop_probability:
            dropped.append(TraceEvent(packet, None))
            continue
        if link.jitter_std_ms > 0:
            latency = max(0.0, rng.normal(link.mean_latency_ms, link.jitter_std_ms))
        else:
            latency = link.mean_latency_ms
        event = TraceEvent(packet, latency)
        delivered.append((event.deliver_time_ms, packet.send_time_ms, index, event))
    delivered.sort(key=lambda item: item[:3])
    return [item[3] for item in delivered] + dropped


def measure_latency(trace: Iterable[TraceEvent]) -> LatencyStats:
    """Latency statistics over delivered events (drops excluded).

    Means use exactly-rounded summation so a constant-latency trace
    reports the configured constant bit-for-bit.
    """
    latencies = [e.latency_ms for e in trace if not e.dropped]
    if not latencies:
        raise EmptyTrace("no delivered packets to measure")
    n = len(latencies)
    mean = math.fsum(latencies) / n
    variance = math.fsum((l - mean) ** 2 for l in latencies) / n
    return LatencyStats(
        mean=mean,
        std=math.sqrt(variance),
        min=min(latencies),
        max=max(latencies),
        count=n,
    )


def uniform_workload(source: str, destination: str, count: int,
                     interval_ms: float = 1.0, payload: bytes = b"x",
                     start_ms: float = 0.0) -> list[Packet]:
    """Fixed-interval packet schedule over one link."""
    return [
        Packet(payload, source, destination, start_ms + i * interval_ms)
        for i in range(count)
    ]


def trace_to_lines(trace: Iterable[TraceEvent]) -> list[str]:
    """Newline-record export: source,dest,send_ms,deliver_ms|DROPPED."""
    lines = []
    for event in trace:
        status = "DROPPED" if event.dropped else f"{event.deliver_time_ms:.6f}"
        p = event.packet
        lines.append(f"{p.source},{p.destination},{p.send_time_ms:.6f},{status}")
    return lines


def write_trace_csv(trace: Iterable[TraceEvent], path) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["source", "destination", "send_time_ms", "deliver_time_ms", "dropped"])
        for event in trace:
            writer.writerow([
                event.packet.source,
                event.packet.destination,
                repr(event.packet.send_time_ms),
                "" if event.dropped else repr(event.deliver_time_ms),
                int(event.dropped),
            ])


def topology_from_config(cfg: Mapping) -> Topology:
    """Build a topology from the shared config dialect.

    Expects ``[[nodes]]`` entries with id/tier and ``[[links]]`` entries
    with source/dest/protocol plus optional mean_latency_ms,
    jitter_std_ms and drop_probability overrides.
    """
    nodes = [Node(str(n["id"]), Tier(n["tier"])) for n in cfg.get("nodes", [])]
    by_id = {n.node_id: n for n in nodes}
    links: dict[tuple[str, str], LinkModel] = {}
    for entry in cfg.get("links", []):
        src, dst = str(entry["source"]), str(entry["dest"])
        protocol = Protocol.from_token(str(entry["protocol"]))
        if src not in by_id or dst not in by_id:
            raise UnknownLink(f"link {src}->{dst} references an undeclared node")
        pair = tier_pair_of(by_id[src], by_id[dst])
        if "mean_latency_ms" in entry:
            link = LinkModel(
                protocol, pair,
                float(entry["mean_latency_ms"]),
                float(entry.get("jitter_std_ms", 0.0)),
                float(entry.get("drop_probability", 0.0)),
            )
        else:
            link = default_link(protocol, pair)
            if "jitter_std_ms" in entry or "drop_probability" in entry:
                link = replace(
                    link,
                    jitter_std_ms=float(entry.get("jitter_std_ms", link.jitter_std_ms)),
                    drop_probability=float(entry.get("drop_probability", link.drop_probability)),
                )
        links[(src, dst)] = link
    return build_topology(nodes, links)


def workload_from_config(cfg: Mapping) -> list[Packet]:
    """Workload from either explicit ``[[packets]]`` or a ``[workload]`` generator."""
    if "packets" in cfg:
        return [
            Packet(
                payload=str(p.get("payload", "x")).encode(),
                source=str(p["source"]),
                destination=str(p["dest"]),
                send_time_ms=float(p.get("send_time_ms", 0.0)),
            )
            for p in cfg["packets"]
        ]
    spec = cfg.get("workload")
    if spec is None:
        raise ValueError("config declares neither [[packets]] nor [workload]")
    return uniform_workload(
        source=str(spec["source"]),
        destination=str(spec["dest"]),
        count=int(spec.get("count", 1000)),
        interval_ms=float(spec.get("interval_ms", 1.0)),
        payload=b"x" * int(spec.get("payload_bytes", 1)),
    )
