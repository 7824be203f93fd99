import random

import pytest

from truggydaq.errors import BusConfigError, InsufficientData, OverloadEvent
from truggydaq.power_thermal import (BatteryState, RailSpec, TempSensor,
                                     default_rails, measure_current,
                                     read_temp_bus, step_battery, thermal_alarm)

SHUNT = RailSpec("5v1", 5.1, 4.0, sensing="shunt")
HALL = RailSpec("main", 16.8, 300.0, sensing="hall")


def test_shunt_zero_current_within_3_sigma():
    rng = random.Random(1)
    for _ in range(200):
        r = measure_current(SHUNT, 0.0, rng)
        assert abs(r.amps) < 0.003
        assert not r.overcurrent


def test_hall_peak_current_within_3_percent():
    rng = random.Random(2)
    r = measure_current(HALL, 300.0, rng)
    assert abs(r.amps - 300.0) / 300.0 < 0.03
    readings = [measure_current(HALL, 300.0, rng).amps for _ in range(1000)]
    assert abs(sum(readings) / 1000.0 - 300.0) / 300.0 < 0.005


def test_hall_low_current_error_floor():
    rng = random.Random(3)
    errs = [abs(measure_current(HALL, 1.0, rng).amps - 1.0) for _ in range(1000)]
    mean_err = sum(errs) / len(errs)
    # expected |N(0, 0.5)| = 0.5 * sqrt(2/pi) ~ 0.399
    assert 0.3 < mean_err < 0.5


def test_shunt_beats_hall_at_low_current():
    rng_s = random.Random(4)
    rng_h = random.Random(5)
    shunt_err = sum(abs(measure_current(SHUNT, 0.1, rng_s).amps - 0.1)
                    for _ in range(1000))
    hall_err = sum(abs(measure_current(HALL, 0.1, rng_h).amps - 0.1)
                   for _ in range(1000))
    assert shunt_err < hall_err


def test_overcurrent_flagged_but_returned():
    rng = random.Random(6)
    r = measure_current(SHUNT, 4.0 * 1.5 + 1.0, rng)
    assert r.overcurrent
    assert r.amps == pytest.approx(7.0, abs=0.5)


def test_default_rails():
    rails = default_rails()
    assert [r.nominal_v for r in rails] == [16.8, 5.1, 3.3]
    assert rails[0].sensing == "hall"
    assert rails[1].sensing == "shunt"


def test_battery_idle_unchanged():
    st = BatteryState()
    st2 = step_battery(st, 0.0, 10.0)
    assert st2.depleted_mah == st.depleted_mah
    assert not st2.low


def test_battery_full_discharge_exact_integral():
    st = BatteryState()
    for _ in range(3600):
        st = step_battery(st, 5.0, 1.0)
    assert st.depleted_mah == pytest.approx(5000.0, rel=1e-9)
    assert st.open_circuit_v == pytest.approx(13.2)
    assert st.low


def test_battery_depletion_matches_integral():
    rng = random.Random(11)
    st = BatteryState()
    total = 0.0
    for _ in range(500):
        i = rng.uniform(0.0, 40.0)
        dt = rng.uniform(0.05, 0.2)
        total += i * dt / 3.6
        st = step_battery(st, i, dt)
    assert st.depleted_mah == pytest.approx(total, rel=1e-9)


def test_battery_voltage_monotone_under_load():
    st = BatteryState()
    prev_v = st.open_circuit_v
    for _ in range(100):
        st = step_battery(st, 20.0, 10.0)
        assert st.open_circuit_v <= prev_v
        prev_v = st.open_circuit_v


def test_battery_overload():
    with pytest.raises(OverloadEvent):
        step_battery(BatteryState(), 301.0, 0.1)


def make_sensors(n):
    return [TempSensor(id=0x28000000 + k, location="m1", last_c=20.0 + k)
            for k in range(n)]


def test_bus_single_sensor_latency():
    r = read_temp_bus(make_sensors(1), now_ms=0.0)
    assert len(r.readings) == 1
    assert r.latency_ms == pytest.approx(94.0)


def test_bus_four_sensor_latency():
    r = read_temp_bus(make_sensors(4), now_ms=0.0)
    assert len(r.readings) == 4
    assert r.latency_ms == pytest.approx(376.0)


def test_bus_latency_linear():
    lat = [read_temp_bus(make_sensors(n), 0.0).latency_ms for n in range(1, 6)]
    diffs = {round(b - a, 6) for a, b in zip(lat, lat[1:])}
    assert diffs == {94.0}


def test_bus_duplicate_ids():
    sensors = make_sensors(2)
    sensors[1].id = sensors[0].id
    with pytest.raises(BusConfigError):
        read_temp_bus(sensors, 0.0)


def test_alarm_flat_nominal():
    hist = [(t, 25.0) for t in range(0, 120)]
    assert thermal_alarm(hist) == "nominal"


def test_alarm_critical_ramp():
    hist = [(t, 25.0 + 11.0 * t / 60.0) for t in range(0, 61)]
    assert thermal_alarm(hist) == "critical"


def test_alarm_tiny_oscillation_nominal():
    hist = [(t, 25.0 + (0.1 if t % 2 else -0.1)) for t in range(0, 120)]
    assert thermal_alarm(hist) == "nominal"


def test_alarm_insufficient_history():
    with pytest.raises(InsufficientData):
        thermal_alarm([(0.0, 25.0), (30.0, 26.0)])
