"""Hall-encoder speed estimation.

Two estimators are provided: a period-based one working on the interval
between two pulses (low latency at speed) and a count-based one working on
the pulse count inside a fixed task window (well defined at standstill).
A stream tracker arbitrates between them at a fixed tick rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .errors import BadWindow, NonMonotonicPulse

DEFAULT_MAGNET_COUNT = 14
DEFAULT_MIN_PULSE_INTERVAL_S = 10e-6
DEFAULT_ZERO_TIMEOUT_S = 0.5


@dataclass(frozen=True)
class EncoderConfig:
    magnet_count: int = DEFAULT_MAGNET_COUNT
    wheel_diameter_m: float = 0.1
    min_pulse_interval_s: float = DEFAULT_MIN_PULSE_INTERVAL_S

    def __post_init__(self):
        if self.magnet_count < 1:
            raise ValueError("magnet_count must be >= 1")
        if self.wheel_diameter_m <= 0:
            raise ValueError("wheel_diameter_m must be > 0")


@dataclass(frozen=True)
class PulseEvent:
    t: float  # seconds since session start


@dataclass(frozen=True)
class SpeedEstimate:
    t_delta_s: float = 0.0
    pulse_freq_hz: float = 0.0
    wheel_freq_hz: float = 0.0
    omega_rpm: float = 0.0
    linear_kmh: float = 0.0
    pulse_count: Optional[int] = None  # set on the count-based path
    valid: bool = True


def linear_speed_kmh(omega_rpm: float, wheel_diameter_m: float) -> float:
    """Wheel rpm to linear speed in km/h (circumference = d*pi)."""
    return wheel_diameter_m * math.pi * omega_rpm * 60.0 / 1000.0


def speed_from_pulse_pair(prev: PulseEvent, cur: PulseEvent,
                          cfg: EncoderConfig) -> SpeedEstimate:
    """Period-based estimate from two consecutive pulses."""
    t_delta = cur.t - prev.t
    if t_delta <= 0:
        raise NonMonotonicPulse("pulse at %r not after %r" % (cur.t, prev.t))
    if t_delta < cfg.min_pulse_interval_s:
        # glitch: interval shorter than any physical pulse pair
        return SpeedEstimate(t_delta_s=t_delta, valid=False)
    f_p = 1.0 / t_delta
    f_w = f_p / cfg.magnet_count
    omega = f_w * 60.0
    return SpeedEstimate(
        t_delta_s=t_delta,
        pulse_freq_hz=f_p,
        wheel_freq_hz=f_w,
        omega_rpm=omega,
        linear_kmh=linear_speed_kmh(omega, cfg.wheel_diameter_m),
    )


def speed_from_window(n_p: int, window_s: float, cfg: EncoderConfig) -> SpeedEstimate:
    """Count-based estimate: n_p pulses observed over a task window.

    A window with zero pulses is a valid zero-speed estimate, which is the
    whole point of this estimator: a stationary wheel produces no pulses.
    """
    if window_s <= 0:
        raise BadWindow("window_s must be > 0, got %r" % (window_s,))
    if n_p < 0:
        raise ValueError("n_p must be >= 0")
    omega = n_p / (cfg.magnet_count * window_s) * 60.0
    f_w = omega / 60.0
    return SpeedEstimate(
        t_delta_s=window_s,
        pulse_freq_hz=f_w * cfg.magnet_count,
        wheel_freq_hz=f_w,
        omega_rpm=omega,
        linear_kmh=linear_speed_kmh(omega, cfg.wheel_diameter_m),
        pulse_count=n_p,
    )


class PulseStreamTracker:
    """Per-wheel tracker turning a pulse stream into tick-rate speed estimates.

    Policy: period-based when at least two pulses arrived within the last
    tick interval, count-based otherwise; decays to zero once no pulse has
    been seen for ``zero_timeout_s``.
    """

    def __init__(self, cfg: EncoderConfig, tick_hz: float = 10.0,
                 zero_timeout_s: float = DEFAULT_ZERO_TIMEOUT_S):
        if tick_hz <= 0:
            raise BadWindow("tick_hz must be > 0")
        self.cfg = cfg
        self.tick_interval_s = 1.0 / tick_hz
        self.zero_timeout_s = zero_timeout_s
        self._last_pulse: Optional[PulseEvent] = None
        self._prev_pulse: Optional[PulseEvent] = None
        self._count_in_tick = 0

    def add_pulse(self, t: float) -> None:
        ev = PulseEvent(t)
        if self._last_pulse is not None:
            if t <= self._last_pulse.t:
                raise NonMonotonicPulse("pulse at %r not after %r"
                                        % (t, self._last_pulse.t))
            if t - self._last_pulse.t < self.cfg.min_pulse_interval_s:
                return  # glitch, drop
        self._prev_pulse = self._last_pulse
        self._last_pulse = ev
        self._count_in_tick += 1

    def tick(self, now: float) -> SpeedEstimate:
        count = self._count_in_tick
        self._count_in_tick = 0
        last, prev = self._last_pulse, self._prev_pulse
        if last is None or now - last.t >= self.zero_timeout_s:
            return speed_from_window(0, self.tick_interval_s, self.cfg)
        if (count >= 2 and prev is not None
                and now - prev.t <= self.tick_interval_s * 2):
            est = speed_from_pulse_pair(prev, last, self.cfg)
            if est.valid:
                return est
        return speed_from_window(count, self.tick_interval_s, self.cfg)


def track_pulse_stream(events: Iterable[PulseEvent], cfg: EncoderConfig,
                       tick_hz: float = 10.0, duration_s: Optional[float] = None,
                       zero_timeout_s: float = DEFAULT_ZERO_TIMEOUT_S,
                       ) -> Iterator[SpeedEstimate]:
    """Run the tracker over a finite pulse stream, one estimate per tick.

    Ticks run from 1/tick_hz up to ``duration_s`` (defaults to the last
    pulse time plus the zero timeout, so the decay to zero is observable).
    """
    events = list(events)
    tracker = PulseStreamTracker(cfg, tick_hz, zero_timeout_s)
    if duration_s is None:
        last_t = events[-1].t if events else 0.0
        duration_s = last_t + zero_timeout_s
    dt = 1.0 / tick_hz
    i = 0
    n_ticks = int(math.floor(duration_s / dt + 1e-9))
    for k in range(1, n_ticks + 1):
        now = k * dt
        while i < len(events) and events[i].t <= now:
            tracker.add_pulse(events[i].t)
            i += 1
        yield tracker.tick(now)
