"""Canonical 228-byte telemetry record and the binary session-log file format.

The record packs every sensor snapshot (wheel/motor speeds, orientation,
acceleration, GPS, temperatures, power rails, PWM, status flags) into a
fixed little-endian layout: 140 content bytes, a CRC-32 over those bytes,
then zero padding up to 228 bytes total.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field

from .errors import BadLength, BadLogFile, CorruptRecord, InvalidRecord, SequenceError

RECORD_SIZE = 228
CONTENT_SIZE = 140          # bytes covered by the CRC
CRC_OFFSET = CONTENT_SIZE
PADDING_OFFSET = CONTENT_SIZE + 4

# seq, timestamp, 4 wheel rpm, motor rpm, quat, euler, accel,
# lat, lon, gps speed, 4 temps, 3 rail V, 3 rail A,
# servo us, throttle us, flags, fix, sats
_CONTENT_FMT = "<IQ4ff4f3f3fddf4f3f3fHHHBB"
assert struct.calcsize(_CONTENT_FMT) == CONTENT_SIZE

MAGIC = b"TRGYDAQ1"
LOG_FORMAT_VERSION = 1
_HEADER_FMT = "<8sHHH32s"
HEADER_SIZE = struct.calcsize(_HEADER_FMT)

# status_flags bits
FLAG_GPS_FIX = 1 << 0
FLAG_THERMAL_ALARM = 1 << 1
FLAG_BATTERY_LOW = 1 << 2
FLAG_CRASH_DETECTED = 1 << 3
FLAG_DIFF_FAILURE = 1 << 4


def _f32(x: float) -> float:
    """Round a python float to the nearest binary32 value."""
    return struct.unpack("<f", struct.pack("<f", x))[0]


@dataclass(frozen=True)
class TelemetryRecord:
    """One immutable sensor snapshot.

    Float fields are quantized to binary32 (binary64 for lat/lon) at
    construction so that serialize/deserialize round-trips compare equal
    field-for-field.
    """

    seq: int = 0
    timestamp_ms: int = 0
    wheel_speed_rpm: tuple = (0.0, 0.0, 0.0, 0.0)   # fl, fr, rl, rr
    motor_speed_rpm: float = 0.0
    quat: tuple = (1.0, 0.0, 0.0, 0.0)              # a, b, c, d (scalar first)
    euler_deg: tuple = (0.0, 0.0, 0.0)              # yaw, pitch, roll
    accel_mps2: tuple = (0.0, 0.0, 0.0)
    gps_lat: float = 0.0
    gps_lon: float = 0.0
    gps_speed_kmh: float = 0.0
    temps_c: tuple = (0.0, 0.0, 0.0, 0.0)           # t_ss, t_esc1, t_m1, t_bp
    rail_v: tuple = (0.0, 0.0, 0.0)                 # 16.8 V, 5.1 V, 3.3 V
    rail_i: tuple = (0.0, 0.0, 0.0)
    servo_pwm_us: int = 1500
    throttle_pwm_us: int = 1500
    status_flags: int = 0
    gps_fix: int = 0
    gps_sats: int = 0

    def __post_init__(self):
        object.__setattr__(self, "wheel_speed_rpm",
                           tuple(_f32(v) for v in self.wheel_speed_rpm))
        object.__setattr__(self, "motor_speed_rpm", _f32(self.motor_speed_rpm))
        object.__setattr__(self, "quat", tuple(_f32(v) for v in self.quat))
        object.__setattr__(self, "euler_deg", tuple(_f32(v) for v in self.euler_deg))
        object.__setattr__(self, "accel_mps2", tuple(_f32(v) for v in self.accel_mps2))
        object.__setattr__(self, "gps_speed_kmh", _f32(self.gps_speed_kmh))
        object.__setattr__(self, "temps_c", tuple(_f32(v) for v in self.temps_c))
        object.__setattr__(self, "rail_v", tuple(_f32(v) for v in self.rail_v))
        object.__setattr__(self, "rail_i", tuple(_f32(v) for v in self.rail_i))

    def _float_values(self):
        yield from self.wheel_speed_rpm
        yield self.motor_speed_rpm
        yield from self.quat
        yield from self.euler_deg
        yield from self.accel_mps2
        yield self.gps_lat
        yield self.gps_lon
        yield self.gps_speed_kmh
        yield from self.temps_c
        yield from self.rail_v
        yield from self.rail_i


def serialize_record(rec: TelemetryRecord) -> bytes:
    """Pack a record into its 228-byte wire/log form, filling the CRC."""
    for v in rec._float_values():
        if not math.isfinite(v):
            raise InvalidRecord("non-finite field value %r" % (v,))
    content = struct.pack(
        _CONTENT_FMT,
        rec.seq & 0xFFFFFFFF,
        rec.timestamp_ms,
        *rec.wheel_speed_rpm,
        rec.motor_speed_rpm,
        *rec.quat,
        *rec.euler_deg,
        *rec.accel_mps2,
        rec.gps_lat,
        rec.gps_lon,
        rec.gps_speed_kmh,
        *rec.temps_c,
        *rec.rail_v,
        *rec.rail_i,
        rec.servo_pwm_us,
        rec.throttle_pwm_us,
        rec.status_flags,
        rec.gps_fix,
        rec.gps_sats,
    )
    crc = zlib.crc32(content) & 0xFFFFFFFF
    return content + struct.pack("<I", crc) + bytes(RECORD_SIZE - PADDING_OFFSET)


def deserialize_record(buf: bytes) -> TelemetryRecord:
    """Unpack and verify a 228-byte buffer."""
    if len(buf) != RECORD_SIZE:
        raise BadLength("expected %d bytes, got %d" % (RECORD_SIZE, len(buf)))
    content = buf[:CONTENT_SIZE]
    (stored_crc,) = struct.unpack_from("<I", buf, CRC_OFFSET)
    if zlib.crc32(content) & 0xFFFFFFFF != stored_crc:
        raise CorruptRecord("CRC mismatch")
    if any(buf[PADDING_OFFSET:]):
        raise CorruptRecord("nonzero padding")
    vals = struct.unpack(_CONTENT_FMT, content)
    return TelemetryRecord(
        seq=vals[0],
        timestamp_ms=vals[1],
        wheel_speed_rpm=vals[2:6],
        motor_speed_rpm=vals[6],
        quat=vals[7:11],
        euler_deg=vals[11:14],
        accel_mps2=vals[14:17],
        gps_lat=vals[17],
        gps_lon=vals[18],
        gps_speed_kmh=vals[19],
        temps_c=vals[20:24],
        rail_v=vals[24:27],
        rail_i=vals[27:30],
        servo_pwm_us=vals[30],
        throttle_pwm_us=vals[31],
        status_flags=vals[32],
        gps_fix=vals[33],
        gps_sats=vals[34],
    )


@dataclass
class SessionLog:
    """In-memory session log: a small header plus consecutive 228-byte records.

    Single writer; records must arrive with strictly increasing seq.
    """

    scenario_name: str = ""
    tick_rate_hz: int = 10
    records: list = field(default_factory=list)

    def append(self, rec: TelemetryRecord) -> None:
        if self.records and rec.seq <= self.records[-1].seq:
            raise SequenceError(
                "seq %d not greater than last %d" % (rec.seq, self.records[-1].seq))
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def duration_ms(self) -> int:
        """Covered wall time: one tick interval per record."""
        return len(self.records) * round(1000 / self.tick_rate_hz)

    def write(self, path) -> None:
        name = self.scenario_name.encode()[:32]
        header = struct.pack(_HEADER_FMT, MAGIC, LOG_FORMAT_VERSION,
                             RECORD_SIZE, self.tick_rate_hz, name)
        with open(path, "wb") as f:
            f.write(header)
            for rec in self.records:
                f.write(serialize_record(rec))

    @classmethod
    def read(cls, path) -> "SessionLog":
        with open(path, "rb") as f:
            data = f.read()
        if len(data) < HEADER_SIZE:
            raise BadLogFile("file too short for header")
        magic, version, rec_size, tick_rate, name = struct.unpack_from(_HEADER_FMT, data)
        if magic != MAGIC:
            raise BadLogFile("bad magic %r" % magic)
        if rec_size != RECORD_SIZE:
            raise BadLogFile("unsupported record size %d" % rec_size)
        body = data[HEADER_SIZE:]
        if len(body) % RECORD_SIZE:
            raise BadLogFile("truncated record region")
        log = cls(scenario_name=name.rstrip(b"\x00").decode(errors="replace"),
                  tick_rate_hz=tick_rate)
        last_seq = None
        for off in range(0, len(body), RECORD_SIZE):
            rec = deserialize_record(body[off:off + RECORD_SIZE])
            if last_seq is not None and rec.seq <= last_seq:
                raise BadLogFile("non-monotonic seq at offset %d" % off)
            last_seq = rec.seq
            log.records.append(rec)
        return log
