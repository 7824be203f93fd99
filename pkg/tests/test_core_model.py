import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from truggydaq.core_model import (CONTENT_SIZE, RECORD_SIZE, SessionLog,
                                  TelemetryRecord, deserialize_record,
                                  serialize_record)
from truggydaq.errors import (BadLength, BadLogFile, CorruptRecord,
                              InvalidRecord, SequenceError)


def sample_record(seq=1, t_ms=100):
    return TelemetryRecord(
        seq=seq, timestamp_ms=t_ms,
        wheel_speed_rpm=(410.0, 415.5, 398.25, 402.0),
        motor_speed_rpm=4100.0,
        quat=(0.9, 0.1, -0.2, 0.39),
        euler_deg=(45.0, -3.5, 1.25),
        accel_mps2=(0.5, -0.25, 9.81),
        gps_lat=51.000123, gps_lon=4.200456, gps_speed_kmh=14.4,
        temps_c=(25.0, 31.5, 48.25, 29.0),
        rail_v=(16.1, 5.1, 3.3), rail_i=(12.5, 0.8, 0.25),
        servo_pwm_us=1545, throttle_pwm_us=1650,
        status_flags=0b1, gps_fix=2, gps_sats=9)


def test_serialized_size_is_228():
    assert len(serialize_record(sample_record())) == RECORD_SIZE


def test_zero_record_padding_is_zero():
    buf = serialize_record(TelemetryRecord())
    assert len(buf) == RECORD_SIZE
    assert buf[CONTENT_SIZE + 4:] == bytes(RECORD_SIZE - CONTENT_SIZE - 4)


def test_round_trip_identity():
    rec = sample_record()
    assert deserialize_record(serialize_record(rec)) == rec


def test_serialize_deterministic():
    rec = sample_record()
    assert serialize_record(rec) == serialize_record(rec)


def test_non_finite_rejected():
    rec = sample_record()
    object.__setattr__(rec, "motor_speed_rpm", float("nan"))
    with pytest.raises(InvalidRecord):
        serialize_record(rec)


def test_bad_length():
    with pytest.raises(BadLength):
        deserialize_record(b"\x00" * 227)


@pytest.mark.parametrize("offset", [0, 17, 77, CONTENT_SIZE - 1])
def test_single_byte_corruption_detected(offset):
    buf = bytearray(serialize_record(sample_record()))
    buf[offset] ^= 0x01
    with pytest.raises(CorruptRecord):
        deserialize_record(bytes(buf))


def test_nonzero_padding_rejected():
    buf = bytearray(serialize_record(sample_record()))
    buf[-1] = 1
    with pytest.raises(CorruptRecord):
        deserialize_record(bytes(buf))


@settings(max_examples=200, deadline=None)
@given(
    seq=st.integers(0, 2**32 - 1),
    t=st.integers(0, 2**48),
    floats=st.lists(st.floats(-1e6, 1e6, allow_nan=False, width=32),
                    min_size=30, max_size=30),
    servo=st.integers(1000, 2000),
    flags=st.integers(0, 0xFFFF),
)
def test_round_trip_property(seq, t, floats, servo, flags):
    rec = TelemetryRecord(
        seq=seq, timestamp_ms=t,
        wheel_speed_rpm=tuple(floats[0:4]), motor_speed_rpm=floats[4],
        quat=tuple(floats[5:9]), euler_deg=tuple(floats[9:12]),
        accel_mps2=tuple(floats[12:15]),
        gps_lat=floats[15], gps_lon=floats[16], gps_speed_kmh=floats[17],
        temps_c=tuple(floats[18:22]), rail_v=tuple(floats[22:25]),
        rail_i=tuple(floats[25:28]),
        servo_pwm_us=servo, throttle_pwm_us=servo,
        status_flags=flags, gps_fix=2, gps_sats=10)
    buf = serialize_record(rec)
    assert len(buf) == RECORD_SIZE
    assert deserialize_record(buf) == rec


def test_session_log_round_trip(tmp_path):
    log = SessionLog(scenario_name="bench", tick_rate_hz=10)
    for i in range(1, 6):
        log.append(sample_record(seq=i, t_ms=i * 100))
    path = tmp_path / "session.bin"
    log.write(path)
    back = SessionLog.read(path)
    assert back.scenario_name == "bench"
    assert back.tick_rate_hz == 10
    assert back.records == log.records


def test_session_log_file_length(tmp_path):
    from truggydaq.core_model import HEADER_SIZE
    log = SessionLog()
    for i in range(1, 4):
        log.append(sample_record(seq=i))
    path = tmp_path / "s.bin"
    log.write(path)
    assert path.stat().st_size == HEADER_SIZE + 3 * RECORD_SIZE


def test_append_rejects_non_monotonic_seq():
    log = SessionLog()
    log.append(sample_record(seq=5))
    with pytest.raises(SequenceError):
        log.append(sample_record(seq=5))
    with pytest.raises(SequenceError):
        log.append(sample_record(seq=4))


def test_read_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOTMAGIC" + bytes(100))
    with pytest.raises(BadLogFile):
        SessionLog.read(path)


def test_duration_bookkeeping():
    log = SessionLog(tick_rate_hz=10)
    for i in range(1, 11):
        log.append(sample_record(seq=i, t_ms=i * 100))
    assert log.duration_ms == 1000
