"""Edge-node code generation from a declarative spec.

A validated NodeSpec expands deterministically into (i) a C-like
transmitter sketch for the microcontroller, (ii) a fog-side receiver
script, (iii) shell setup commands (only Bluetooth Classic needs any),
and (iv) a workflow hint for the fog dashboard. The sketch's message
construction uses plain printf-style format strings so its output is
checkable against the wire codec without a firmware toolchain.

Text inputs are whitelisted to ``[A-Za-z0-9 _.:-]`` before they can
reach generated code.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .simnet import Protocol
from .wire import BLE_MAX_PAYLOAD, MAX_LOCATION_ID, SensorType

MIN_TRANSFER_RATE_MS = 30_000
MAX_TRANSFER_RATE_MS = 300_000
SAMPLE_INTERVAL_MS = 1_000  # sensor sampled once a second inside the window
MAX_LOCATIONS = 99

TEXT_WHITELIST = re.compile(r"^[A-Za-z0-9 _.:-]*$")

# Canonical sensor order used everywhere code is emitted.
SENSOR_ORDER = (
    SensorType.TEMPERATURE,
    SensorType.HUMIDITY,
    SensorType.AIR_QUALITY,
    SensorType.LIGHT,
    SensorType.SOUND,
)


class Mcu(Enum):
    NANO33_BLE_SENSE = "nano33_ble_sense"
    NANO_RP2040_CONNECT = "nano_rp2040_connect"
    RASPBERRY_PI_PICO = "raspberry_pi_pico"

    @property
    def node_type_id(self) -> int:
        return {"nano33_ble_sense": 1, "nano_rp2040_connect": 2, "raspberry_pi_pico": 3}[self.value]

    @property
    def display_name(self) -> str:
        return {
            "nano33_ble_sense": "Arduino Nano 33 BLE Sense",
            "nano_rp2040_connect": "Arduino Nano RP2040 Connect",
            "raspberry_pi_pico": "Raspberry Pi Pico",
        }[self.value]


class Aggregation(Enum):
    LOWEST = "lowest"
    MEAN = "mean"
    HIGHEST = "highest"


@dataclass(frozen=True)
class WifiParams:
    ssid: str = "YOUR_SSID"
    password: str = "YOUR_PASSWORD"
    host_ip: str = "192.168.0.2"
    host_port: int = 9000


@dataclass(frozen=True)
class BluetoothParams:
    mac: str = ""  # obligatory; the rest have workable defaults
    module_name: str = "edge-node"
    pin: str = "1234"


@dataclass(frozen=True)
class ZigbeeParams:
    pan_id: str = "3332"
    dest_addr_high: str = "0013A200"
    dest_addr_low: str = "DEFAULT"


@dataclass(frozen=True)
class NodeSpec:
    sensors: tuple[SensorType, ...]
    protocol: Protocol
    mcu: Mcu
    location_name: str
    location_id: int
    transfer_rate_ms: int = MIN_TRANSFER_RATE_MS
    aggregation: Aggregation = Aggregation.MEAN
    wifi: WifiParams = field(default_factory=WifiParams)
    bluetooth: BluetoothParams = field(default_factory=BluetoothParams)
    zigbee: ZigbeeParams = field(default_factory=ZigbeeParams)

    def ordered_sensors(self) -> tuple[SensorType, ...]:
        return tuple(s for s in SENSOR_ORDER if s in self.sensors)


@dataclass(frozen=True)
class GeneratedBundle:
    transmitter_source: str
    receiver_source: str
    shell_commands: tuple[str, ...]
    node_red_hint: str


class ViolationCode(Enum):
    RATE_OUT_OF_RANGE = "rate_out_of_range"
    MISSING_MAC = "missing_mac"
    EMPTY_SENSOR_SET = "empty_sensor_set"
    LOCATION_OUT_OF_RANGE = "location_out_of_range"
    ILLEGAL_CHARACTERS = "illegal_characters"


@dataclass(frozen=True)
class SpecViolation:
    code: ViolationCode
    field: str
    detail: str


class InvalidSpec(ValueError):
    def __init__(self, violations: Sequence[SpecViolation]):
        super().__init__("; ".join(f"{v.field}: {v.detail}" for v in violations))
        self.violations = list(violations)


class RegistryFull(ValueError):
    pass


def validate_spec(spec: NodeSpec) -> list[SpecViolation]:
    """Every violated constraint, not just the first."""
    violations: list[SpecViolation] = []
    if not spec.sensors:
        violations.append(SpecViolation(
            ViolationCode.EMPTY_SENSOR_SET, "sensors", "select at least one sensor"))
    if not MIN_TRANSFER_RATE_MS <= spec.transfer_rate_ms <= MAX_TRANSFER_RATE_MS:
        violations.append(SpecViolation(
            ViolationCode.RATE_OUT_OF_RANGE, "transfer_rate_ms",
            f"{spec.transfer_rate_ms} outside {MIN_TRANSFER_RATE_MS}..{MAX_TRANSFER_RATE_MS}"))
    if not 0 <= spec.location_id <= MAX_LOCATION_ID:
        violations.append(SpecViolation(
            ViolationCode.LOCATION_OUT_OF_RANGE, "location_id",
            f"{spec.location_id} outside 0..{MAX_LOCATION_ID}"))
    if spec.protocol in (Protocol.BT_CLASSIC, Protocol.BLE) and not spec.bluetooth.mac:
        violations.append(SpecViolation(
            ViolationCode.MISSING_MAC, "bluetooth.mac",
            "MAC address is obligatory for Bluetooth Classic and BLE"))

    text_fields = {
        "location_name": spec.location_name,
        "wifi.ssid": spec.wifi.ssid,
        "wifi.password": spec.wifi.password,
        "wifi.host_ip": spec.wifi.host_ip,
        "bluetooth.mac": spec.bluetooth.mac,
        "bluetooth.module_name": spec.bluetooth.module_name,
        "bluetooth.pin": spec.bluetooth.pin,
        "zigbee.pan_id": spec.zigbee.pan_id,
        "zigbee.dest_addr_high": spec.zigbee.dest_addr_high,
        "zigbee.dest_addr_low": spec.zigbee.dest_addr_low,
    }
    for name, value in text_fields.items():
        if not TEXT_WHITELIST.match(value):
            violations.append(SpecViolation(
                ViolationCode.ILLEGAL_CHARACTERS, name,
                f"{value!r} contains characters outside the allowed set"))
    return violations


_AGG_BODIES = {
    Aggregation.LOWEST: "        if (samples[i] < acc) acc = samples[i];",
    Aggregation.MEAN: "        acc += samples[i];",
    Aggregation.HIGHEST: "        if (samples[i] > acc) acc = samples[i];",
}


def _sensor_id_name(sensor: SensorType) -> str:
    return f"SENSOR_ID_{sensor.code}"


def _transmitter_source(spec: NodeSpec) -> str:
    sensors = spec.ordered_sensors()
    lines: list[str] = []
    out = lines.append

    out(f"// Edge transmitter sketch for location \"{spec.location_name}\"")
    out(f"// Target: {spec.mcu.display_name} (node type id {spec.mcu.node_type_id})")
    out(f"// Protocol: {spec.protocol.value}")
    out("// Lines marked EDIT may need adjusting for your exact modules.")
    out("")
    out(f"#define MCU_ID {spec.mcu.node_type_id}")
    out(f"#define LOCATION_ID {spec.location_id}")
    for index, sensor in enumerate(sensors):
        out(f"#define {_sensor_id_name(sensor)} {index}")
    out(f"#define TRANSFER_RATE_MS {spec.transfer_rate_ms}")
    out(f"#define SAMPLE_INTERVAL_MS {SAMPLE_INTERVAL_MS}")
    out("#define SAMPLES_PER_WINDOW (TRANSFER_RATE_MS / SAMPLE_INTERVAL_MS)")
    out(f"#define WIRE_MAX {BLE_MAX_PAYLOAD}")
    out("")

    if spec.protocol is Protocol.WIFI:
        out(f'const char* WIFI_SSID = "{spec.wifi.ssid}";        // EDIT')
        out(f'const char* WIFI_PASSWORD = "{spec.wifi.password}";  // EDIT')
        out(f'const char* HOST_IP = "{spec.wifi.host_ip}";')
        out(f"const int HOST_PORT = {spec.wifi.host_port};")
    elif spec.protocol in (Protocol.BT_CLASSIC, Protocol.BLE):
        out(f'const char* PEER_MAC = "{spec.bluetooth.mac}";')
        out(f'const char* MODULE_NAME = "{spec.bluetooth.module_name}";')
        out(f'const char* MODULE_PIN = "{spec.bluetooth.pin}";')
    else:
        out(f'const char* PAN_ID = "{spec.zigbee.pan_id}";')
        out(f'const char* DEST_ADDR_HIGH = "{spec.zigbee.dest_addr_high}";')
        out(f'const char* DEST_ADDR_LOW = "{spec.zigbee.dest_addr_low}";')
    out("")

    out("// --- sensor read stubs ---")
    for sensor in sensors:
        out(f"float read_sensor_{sensor.code.lower()}() {{ /* EDIT: wire the "
            f"{sensor.name.lower().replace('_', ' ')} module read here */ return 0.0f; }}")
    out("")

    out(f"// {spec.aggregation.value} of the samples gathered during one window")
    out("float aggregate(const float* samples, int count) {")
    out("    float acc = samples[0];")
    out("    for (int i = 1; i < count; i++) {")
    out(_AGG_BODIES[spec.aggregation])
    out("    }")
    if spec.aggregation is Aggregation.MEAN:
        out("    return acc / count;")
    else:
        out("    return acc;")
    out("}")
    out("")
    out("void send_line(const char* line);  // provided by the protocol glue below")
    out("")

    out("void loop_once() {")
    out("    char line[WIRE_MAX + 1];")
    out("    float samples[SAMPLES_PER_WINDOW];")
    for sensor in sensors:
        code = sensor.code
        out("")
        out(f"    for (int i = 0; i < SAMPLES_PER_WINDOW; i++) {{ "
            f"samples[i] = read_sensor_{code.lower()}(); delay_ms(SAMPLE_INTERVAL_MS); }}")
        if sensor.reads_float:
            fmt = f"%1d%02d%03d{code}F%.2f"
            value_arg = "aggregate(samples, SAMPLES_PER_WINDOW)"
        else:
            fmt = f"%1d%02d%03d{code}I%d"
            value_arg = "(int) aggregate(samples, SAMPLES_PER_WINDOW)"
        out(f'    snprintf(line, sizeof line, "{fmt}", MCU_ID, LOCATION_ID, '
            f"{_sensor_id_name(sensor)}, {value_arg});")
        out("    send_line(line);")
    out("}")
    out("")
    return "\n".join(lines) + "\n"


def _receiver_source(spec: NodeSpec) -> str:
    lines = [
        "# Fog-side receiver: decodes incoming wire lines and appends them",
        "# to the local ingest stream. Run on the gateway next to the edge node.",
        f'# location: {spec.location_name} (id {spec.location_id:02d})',
        f'PROTOCOL = "{spec.protocol.value}"',
    ]
    if spec.protocol is Protocol.WIFI:
        lines += [
            f'LISTEN_HOST = "{spec.wifi.host_ip}"',
            f"LISTEN_PORT = {spec.wifi.host_port}",
        ]
    elif spec.protocol in (Protocol.BT_CLASSIC, Protocol.BLE):
        lines += [f'PEER_MAC = "{spec.bluetooth.mac}"']
        if spec.protocol is Protocol.BT_CLASSIC:
            lines += ['SERIAL_DEVICE = "/dev/rfcomm0"']
    else:
        lines += [
            f'PAN_ID = "{spec.zigbee.pan_id}"',
            'SERIAL_DEVICE = "/dev/ttyUSB0"',
        ]
    lines += [
        "",
        "# for each received line:",
        "#     reading = anoml.wire.decode_text(line, timestamp_ms=now_ms())",
        "#     append anoml.wire.encode_text(reading) to the ingest stream",
        "",
    ]
    return "\n".join(lines)


def _shell_commands(spec: NodeSpec) -> tuple[str, ...]:
    # Only Bluetooth Classic needs host-side serial-port plumbing.
    if spec.protocol is not Protocol.BT_CLASSIC:
        return ()
    return (
        "sudo systemctl start bluetooth",
        "sudo sdptool add --channel=1 SP",
        f"sudo rfcomm bind /dev/rfcomm0 {spec.bluetooth.mac} 1",
    )


def _node_red_hint(spec: NodeSpec) -> str:
    inbound = {
        Protocol.WIFI: f"a tcp-in node on port {spec.wifi.host_port}",
        Protocol.BT_CLASSIC: "a serial-in node reading /dev/rfcomm0",
        Protocol.BLE: f"a BLE scanner/connect pair targeting {spec.bluetooth.mac}",
        Protocol.ZIGBEE: "a serial-in node reading the coordinator tty",
    }[spec.protocol]
    return (
        f"Dashboard hint: wire {inbound} into a function node that decodes each "
        f"line per the fixed-width message layout, then into a chart grouped by "
        f"sensor id for location {spec.location_id:02d}."
    )


def generate(spec: NodeSpec) -> GeneratedBundle:
    """Expand a valid spec into its source bundle; identical specs give
    byte-identical bundles."""
    violations = validate_spec(spec)
    if violations:
        raise InvalidSpec(violations)
    return GeneratedBundle(
        transmitter_source=_transmitter_source(spec),
        receiver_source=_receiver_source(spec),
        shell_commands=_shell_commands(spec),
        node_red_hint=_node_red_hint(spec),
    )


def assign_location_id(registry: Mapping[str, int], name: str) -> tuple[dict[str, int], int]:
    """Idempotent name -> id assignment; ids start at 0, capped at 99 entries.

    Returns the (possibly new) registry and the id; the input mapping is
    never mutated.
    """
    if name in registry:
        return dict(registry), registry[name]
    if len(registry) >= MAX_LOCATIONS:
        raise RegistryFull(f"location registry is full ({MAX_LOCATIONS} entries)")
    used = set(registry.values())
    new_id = next(i for i in range(MAX_LOCATIONS) if i not in used)
    updated = dict(registry)
    updated[name] = new_id
    return updated, new_id


BUNDLE_FILES = {
    "transmitter_source": "transmitter.ino.txt",
    "receiver_source": "receiver.py.txt",
    "shell_commands": "setup.sh.txt",
}


def write_bundle(bundle: GeneratedBundle, out_dir) -> dict:
    """Write the three bundle files plus a manifest; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    contents = {
        "transmitter.ino.txt": bundle.transmitter_source,
        "receiver.py.txt": bundle.receiver_source,
        "setup.sh.txt": "\n".join(bundle.shell_commands) + ("\n" if bundle.shell_commands else ""),
    }
    manifest = {
        "files": {
            name: hashlib.sha256(text.encode()).hexdigest()
            for name, text in contents.items()
        },
        "node_red_hint": bundle.node_red_hint,
    }
    for name, text in contents.items():
        (out_dir / name).write_text(text)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def nodespec_from_config(cfg: Mapping) -> NodeSpec:
    """Build a NodeSpec from the shared config dialect."""
    sensors = tuple(SensorType.from_code(str(code).upper()) for code in cfg.get("sensors", ()))
    wifi_cfg = cfg.get("wifi", {})
    bt_cfg = cfg.get("bluetooth", {})
    zb_cfg = cfg.get("zigbee", {})
    return NodeSpec(
        sensors=sensors,
        protocol=Protocol.from_token(str(cfg.get("protocol", "wifi"))),
        mcu=Mcu(str(cfg.get("mcu", "raspberry_pi_pico"))),
        location_name=str(cfg.get("location_name", "")),
        location_id=int(cfg.get("location_id", 0)),
        transfer_rate_ms=int(cfg.get("transfer_rate_ms", MIN_TRANSFER_RATE_MS)),
        aggregation=Aggregation(str(cfg.get("aggregation", "mean"))),
        wifi=WifiParams(
            ssid=str(wifi_cfg.get("ssid", WifiParams.ssid)),
            password=str(wifi_cfg.get("password", WifiParams.password)),
            host_ip=str(wifi_cfg.get("host_ip", WifiParams.host_ip)),
            host_port=int(wifi_cfg.get("host_port", WifiParams.host_port)),
        ),
        bluetooth=BluetoothParams(
            mac=str(bt_cfg.get("mac", "")),
            module_name=str(bt_cfg.get("module_name", BluetoothParams.module_name)),
            pin=str(bt_cfg.get("pin", BluetoothParams.pin)),
        ),
        zigbee=ZigbeeParams(
            pan_id=str(zb_cfg.get("pan_id", ZigbeeParams.pan_id)),
            dest_addr_high=str(zb_cfg.get("dest_addr_high", ZigbeeParams.dest_addr_high)),
            dest_addr_low=str(zb_cfg.get("dest_addr_low", ZigbeeParams.dest_addr_low)),
        ),
    )
