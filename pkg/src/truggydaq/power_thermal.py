"""Power-rail, battery and temperature-bus models.

High currents are sensed with a hall-effect model (imprecise at the low
end), low currents with a shunt model; the battery is a simple coulomb
counter over a piecewise-linear open-circuit curve; the temperature bus
serializes sensor reads and an alarm watches for large shifts.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from .errors import BusConfigError, InsufficientData, OverloadEvent

HALL_FLOOR_A = 5.0            # below this a hall sensor "lacks precision"
HALL_FLOOR_SIGMA_A = 0.5
HALL_SCALE_SIGMA = 0.01
SHUNT_SCALE_SIGMA = 0.005
SHUNT_OFFSET_SIGMA_A = 0.001
BUS_LATENCY_PER_SENSOR_MS = 94.0

# open-circuit volts per cell at depth-of-discharge knots
_OCV_DOD = (0.0, 0.1, 0.5, 0.8, 1.0)
_OCV_V = (4.2, 4.0, 3.7, 3.55, 3.3)


@dataclass(frozen=True)
class RailSpec:
    name: str
    nominal_v: float
    max_i: float
    sensing: str = "shunt"            # "hall" | "shunt"
    shunt_ohms: float = 0.01
    hall_floor_a: float = HALL_FLOOR_A

    def __post_init__(self):
        if self.nominal_v <= 0:
            raise ValueError("nominal_v must be > 0")
        if self.sensing not in ("hall", "shunt"):
            raise ValueError("sensing must be 'hall' or 'shunt'")


def default_rails() -> Tuple[RailSpec, RailSpec, RailSpec]:
    return (
        RailSpec("main", 16.8, 300.0, sensing="hall"),
        RailSpec("5v1", 5.1, 4.0, sensing="shunt"),
        RailSpec("3v3", 3.3, 1.0, sensing="shunt"),
    )


@dataclass(frozen=True)
class CurrentReading:
    amps: float
    overcurrent: bool = False


def measure_current(rail: RailSpec, true_i: float,
                    rng: random.Random) -> CurrentReading:
    """Simulate one current measurement on a rail.

    Shunt: tight proportional noise plus a 1 mA offset floor.
    Hall: a fixed 0.5 A sigma below the imprecision floor, proportional above.
    An overcurrent reading is flagged but still returned.
    """
    if true_i < 0:
        raise ValueError("true_i must be >= 0")
    if rail.sensing == "shunt":
        sigma = SHUNT_SCALE_SIGMA * true_i + SHUNT_OFFSET_SIGMA_A
    else:
        if true_i < rail.hall_floor_a:
            sigma = HALL_FLOOR_SIGMA_A
        else:
            sigma = HALL_SCALE_SIGMA * true_i
    measured = true_i + rng.gauss(0.0, sigma)
    return CurrentReading(measured, overcurrent=true_i > rail.max_i * 1.5)


@dataclass(frozen=True)
class BatteryState:
    cells: int = 4
    capacity_mah: float = 5000.0
    c_rating: float = 60.0
    depleted_mah: float = 0.0
    internal_ohms: float = 0.01
    low_threshold_v: float = 13.2     # 3.3 V per cell
    last_i_a: float = 0.0

    @property
    def open_circuit_v(self) -> float:
        dod = min(1.0, self.depleted_mah / self.capacity_mah)
        return self.cells * float(np.interp(dod, _OCV_DOD, _OCV_V))

    @property
    def voltage_v(self) -> float:
        return self.open_circuit_v - self.last_i_a * self.internal_ohms

    @property
    def low(self) -> bool:
        return self.voltage_v < self.low_threshold_v

    @property
    def max_i_a(self) -> float:
        return self.c_rating * self.capacity_mah / 1000.0


def step_battery(state: BatteryState, i_draw_a: float, dt_s: float) -> BatteryState:
    """Advance the coulomb counter by dt seconds of constant draw."""
    if dt_s <= 0:
        raise ValueError("dt_s must be > 0")
    if i_draw_a > state.max_i_a:
        raise OverloadEvent("%.1f A exceeds the %.0f A pack limit"
                            % (i_draw_a, state.max_i_a))
    depleted = min(state.capacity_mah,
                   state.depleted_mah + i_draw_a * dt_s / 3.6)
    return replace(state, depleted_mah=depleted, last_i_a=i_draw_a)


@dataclass
class TempSensor:
    id: int                  # unique 64-bit bus identifier
    location: str            # ss | esc1 | m1 | bp
    last_c: float = 20.0
    last_read_ms: float = 0.0


@dataclass(frozen=True)
class BusRead:
    readings: Tuple[Tuple[int, float], ...]
    latency_ms: float


def read_temp_bus(sensors: Sequence[TempSensor], now_ms: float,
                  per_sensor_latency_ms: float = BUS_LATENCY_PER_SENSOR_MS,
                  ) -> BusRead:
    """Read every sensor on a shared bus; access is serialized, so the
    total latency grows linearly with the sensor count."""
    ids = [s.id for s in sensors]
    if len(set(ids)) != len(ids):
        raise BusConfigError("duplicate sensor ids on bus: %r" % (ids,))
    readings = []
    for k, s in enumerate(sensors):
        s.last_read_ms = now_ms + (k + 1) * per_sensor_latency_ms
        readings.append((s.id, s.last_c))
    return BusRead(tuple(readings), len(sensors) * per_sensor_latency_ms)


def thermal_alarm(history: Iterable[Tuple[float, float]],
                  window_s: float = 60.0,
                  critical_shift_c: float = 10.0) -> str:
    """Classify a (t_s, temp_c) series: 'critical' when the spread over the
    trailing window reaches the critical shift, else 'nominal'."""
    samples = sorted(history)
    if not samples or samples[-1][0] - samples[0][0] < window_s:
        raise InsufficientData("history must span >= %.0f s" % window_s)
    t_end = samples[-1][0]
    temps = [c for t, c in samples if t >= t_end - window_s]
    if max(temps) - min(temps) >= critical_shift_c:
        return "critical"
    return "nominal"
