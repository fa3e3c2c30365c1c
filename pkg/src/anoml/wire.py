"""Fixed-width sensor telemetry codec, in text-line and BLE-buffer form.

Every message is a single ASCII line with a delimiter-free header of
fixed-width numeric identifiers followed by the measured value:

    <MCU:1d><LOC:2d><SEN:3d><TYPE:2c><IND:1c><VALUE>

    MCU   microcontroller id, 1 digit (0-9)
    LOC   location id, 2 digits zero-padded (00-98)
    SEN   sensor id, 3 digits zero-padded (000-999)
    TYPE  two-letter sensor code: TH HU AQ LI SO
    IND   value type indicator: F (decimal, 2 fractional digits) or I (integer)
    VALUE the measurement itself

Example: ``101001THF24.45`` is temperature 24.45 from sensor 001 at
location 01 on microcontroller 1.

The identifier widths differ on purpose so the header parses without
delimiters. Timestamps are not carried on the wire; the receiver stamps
readings on arrival. The BLE form is the ASCII byte image of the text
line, capped at 20 bytes to fit a default characteristic payload.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum

BLE_MAX_PAYLOAD = 20
HEADER_LEN = 9  # 1 + 2 + 3 + 2 + 1
MAX_LOCATION_ID = 98
MAX_SENSOR_ID = 999
MAX_MCU_ID = 9

_INT_RE = re.compile(r"^-?[0-9]+$")
_FLOAT_RE = re.compile(r"^-?[0-9]+\.[0-9]+$")


class WireError(ValueError):
    """A message could not be encoded or decoded; `field` names the culprit."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class MalformedLength(WireError):
    pass


class UnknownSensorType(WireError):
    pass


class UnknownIndicator(WireError):
    pass


class NonNumericValue(WireError):
    pass


class LocationOutOfRange(WireError):
    pass


class NonAsciiByte(WireError):
    pass


class PayloadTooLong(WireError):
    pass


class SensorType(Enum):
    TEMPERATURE = "TH"
    HUMIDITY = "HU"
    AIR_QUALITY = "AQ"
    LIGHT = "LI"
    SOUND = "SO"

    @property
    def code(self) -> str:
        return self.value

    @property
    def reads_float(self) -> bool:
        """Temperature and humidity report decimals; the rest are integer counts."""
        return self in (SensorType.TEMPERATURE, SensorType.HUMIDITY)

    @classmethod
    def from_code(cls, code: str) -> "SensorType":
        for member in cls:
            if member.value == code:
                return member
        raise UnknownSensorType(f"unknown sensor type code {code!r}", field="sensor_type")


@dataclass(frozen=True)
class NodeIdentity:
    """Provenance identifiers rendered as 2/3/1 zero-padded digits."""

    location_id: int
    sensor_id: int
    mcu_id: int

    def __post_init__(self):
        if not 0 <= self.location_id <= MAX_LOCATION_ID:
            raise ValueError(f"location_id {self.location_id} outside 0..{MAX_LOCATION_ID}")
        if not 0 <= self.sensor_id <= MAX_SENSOR_ID:
            raise ValueError(f"sensor_id {self.sensor_id} outside 0..{MAX_SENSOR_ID}")
        if not 0 <= self.mcu_id <= MAX_MCU_ID:
            raise ValueError(f"mcu_id {self.mcu_id} outside 0..{MAX_MCU_ID}")


@dataclass(frozen=True)
class SensorReading:
    """One timestamped measurement.

    `value` is a plain int (wire indicator I) or float (indicator F, two
    fractional digits on the wire). Floats therefore round-trip at
    2-decimal precision; ints round-trip exactly.
    """

    identity: NodeIdentity
    sensor_type: SensorType
    value: int | float
    timestamp_ms: int = 0

    def __post_init__(self):
        if isinstance(self.value, bool) or not isinstance(self.value, (int, float)):
            raise ValueError(f"value must be int or float, got {type(self.value).__name__}")
        if isinstance(self.value, float) and not math.isfinite(self.value):
            raise ValueError("float values must be finite")
        if self.timestamp_ms < 0:
            raise ValueError("timestamp_ms must be >= 0")

    @property
    def is_float(self) -> bool:
        return isinstance(self.value, float)


def encode_text(reading: SensorReading) -> str:
    """Render a reading as one wire line. Deterministic; decode_text inverts it."""
    ident = reading.identity
    if reading.is_float:
        value_part = f"{reading.value:.2f}"
        indicator = "F"
    else:
        value_part = str(reading.value)
        indicator = "I"
    return (
        f"{ident.mcu_id:1d}{ident.location_id:02d}{ident.sensor_id:03d}"
        f"{reading.sensor_type.code}{indicator}{value_part}"
    )


def decode_text(line: str, timestamp_ms: int = 0) -> SensorReading:
    """Parse one wire line back into a SensorReading.

    The wire carries no timestamp, so the caller supplies one (arrival
    time); it defaults to 0.
    """
    if len(line) < HEADER_LEN + 1:
        raise MalformedLength(
            f"line has {len(line)} chars, need at least {HEADER_LEN + 1}", field="line"
        )
    mcu_part, loc_part, sen_part = line[0], line[1:3], line[3:6]
    type_part, indicator, value_part = line[6:8], line[8], line[9:]

    if not mcu_part.isdigit():
        raise NonNumericValue(f"mcu id {mcu_part!r} is not a digit", field="mcu_id")
    if not loc_part.isdigit():
        raise NonNumericValue(f"location id {loc_part!r} is not numeric", field="location_id")
    if not sen_part.isdigit():
        raise NonNumericValue(f"sensor id {sen_part!r} is not numeric", field="sensor_id")

    location_id = int(loc_part)
    if location_id > MAX_LOCATION_ID:
        raise LocationOutOfRange(
            f"location id {location_id} exceeds {MAX_LOCATION_ID}", field="location_id"
        )

    if type_part not in (m.value for m in SensorType):
        raise UnknownSensorType(f"unknown sensor type code {type_part!r}", field="sensor_type")
    sensor_type = SensorType.from_code(type_part)

    if indicator == "F":
        if not _FLOAT_RE.match(value_part):
            raise NonNumericValue(f"value {value_part!r} is not a decimal", field="value")
        value: int | float = float(value_part)
    elif indicator == "I":
        if not _INT_RE.match(value_part):
            raise NonNumericValue(f"value {value_part!r} is not an integer", field="value")
        value = int(value_part)
    else:
        raise UnknownIndicator(f"indicator {indicator!r} not F or I", field="indicator")

    identity = NodeIdentity(location_id=location_id, sensor_id=int(sen_part), mcu_id=int(mcu_part))
    return SensorReading(identity, sensor_type, value, timestamp_ms)


def encode_ble(reading: SensorReading) -> bytes:
    """ASCII byte image of the text line; must fit a 20-byte BLE payload."""
    text = encode_text(reading)
    if len(text) > BLE_MAX_PAYLOAD:
        raise PayloadTooLong(
            f"encoded form is {len(text)} bytes, BLE payload caps at {BLE_MAX_PAYLOAD}",
            field="value",
        )
    return text.encode("ascii")


def decode_ble(buffer: bytes, timestamp_ms: int = 0) -> SensorReading:
    for i, byte in enumerate(buffer):
        if byte > 0x7F:
            raise NonAsciiByte(f"non-ASCII byte 0x{byte:02X} at offset {i}", field="buffer")
    return decode_text(buffer.decode("ascii"), timestamp_ms)
