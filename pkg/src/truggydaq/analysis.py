"""Offline/streaming analysis of telemetry record streams.

Everything here consumes TelemetryRecord sequences only, so it runs the
same on a fresh simulation log, a replayed file, or records reassembled
from the radio link.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core_model import FLAG_BATTERY_LOW, FLAG_GPS_FIX, SessionLog, TelemetryRecord
from .encoder import linear_speed_kmh
from .errors import IncomparableRuns, NoGps

TEMP_NAMES = ("ss", "esc1", "m1", "bp")
METERS_PER_DEG_LAT = 111320.0

CSV_COLUMNS = ("t_ms", "v_fl", "v_fr", "v_rl", "v_rr", "yaw", "pitch", "roll",
               "diff_lr_norm", "diff_fr_norm", "t_ss", "t_esc1", "t_m1", "t_bp",
               "servo_us", "throttle_us", "lap")


@dataclass(frozen=True)
class DetectionEvent:
    kind: str                 # diff_failure | crash | thermal_critical | battery_low
    t_ms: int
    detail: dict = field(default_factory=dict)


CRITICAL_KINDS = ("crash", "diff_failure", "thermal_critical")


class Series:
    """Per-tick numpy views over a record sequence."""

    def __init__(self, records: Sequence[TelemetryRecord]):
        n = len(records)
        self.n = n
        self.t_ms = np.array([r.timestamp_ms for r in records], dtype=np.int64)
        self.wheels = np.array([r.wheel_speed_rpm for r in records],
                               dtype=float).reshape(n, 4)
        self.yaw = np.array([r.euler_deg[0] for r in records])
        self.pitch = np.array([r.euler_deg[1] for r in records])
        self.roll = np.array([r.euler_deg[2] for r in records])
        self.temps = np.array([r.temps_c for r in records], dtype=float).reshape(n, 4)
        self.servo = np.array([r.servo_pwm_us for r in records], dtype=float)
        self.throttle = np.array([r.throttle_pwm_us for r in records], dtype=float)
        self.lat = np.array([r.gps_lat for r in records])
        self.lon = np.array([r.gps_lon for r in records])
        self.fix = np.array([bool(r.status_flags & FLAG_GPS_FIX) for r in records])
        self.gps_speed = np.array([r.gps_speed_kmh for r in records])
        self.flags = np.array([r.status_flags for r in records], dtype=np.int64)
        if n >= 2:
            dt = np.diff(self.t_ms) / 1000.0
            dt[dt <= 0] = np.nan
            dyaw = np.diff(np.unwrap(np.radians(self.yaw)))
            self.yaw_rate = np.concatenate(([0.0], dyaw / dt))
            self.yaw_rate = np.nan_to_num(self.yaw_rate)
        else:
            self.yaw_rate = np.zeros(n)
        mean = self.wheels.mean(axis=1)
        safe = np.where(mean > 1e-6, mean, 1.0)
        left = (self.wheels[:, 0] + self.wheels[:, 2]) / 2.0
        right = (self.wheels[:, 1] + self.wheels[:, 3]) / 2.0
        front = (self.wheels[:, 0] + self.wheels[:, 1]) / 2.0
        rear = (self.wheels[:, 2] + self.wheels[:, 3]) / 2.0
        moving = mean > 1e-6
        self.diff_lr_norm = np.where(moving, (left - right) / safe, 0.0)
        self.diff_fr_norm = np.where(moving, (front - rear) / safe, 0.0)
        self.dt_s = (1.0 if n < 2 else
                     float(np.median(np.diff(self.t_ms))) / 1000.0)


def straight_mask(series: Series, yaw_rate_max: float = 0.35) -> np.ndarray:
    return np.abs(series.yaw_rate) < yaw_rate_max


# -------------------------------------------------------------- detectors

@dataclass(frozen=True)
class DiffFailureConfig:
    threshold: float = 0.25       # normalized front-rear speed difference
    sustain_s: float = 2.0
    yaw_rate_max: float = 0.35
    throttle_min_us: int = 1500   # strictly above = throttled


def detect_diff_failure(records: Sequence[TelemetryRecord],
                        cfg: DiffFailureConfig = DiffFailureConfig(),
                        ) -> List[DetectionEvent]:
    """Fire once per sustained episode of the front wheels outrunning the
    rears on straight, throttled driving. Ticks that do not qualify
    (turning or coasting) pause the sustain clock without resetting it."""
    s = Series(records)
    events: List[DetectionEvent] = []
    mask = straight_mask(s, cfg.yaw_rate_max)
    above_s = 0.0
    fired = False
    for i in range(s.n):
        qualifies = (mask[i] and s.throttle[i] > cfg.throttle_min_us
                     and s.wheels[i].mean() > 1e-6)
        if not qualifies:
            continue
        if s.diff_fr_norm[i] > cfg.threshold:
            above_s += s.dt_s
            if above_s >= cfg.sustain_s and not fired:
                fired = True
                events.append(DetectionEvent(
                    "diff_failure", int(s.t_ms[i]),
                    {"diff_fr_norm": float(s.diff_fr_norm[i])}))
        else:
            above_s = 0.0
            fired = False
    return events


@dataclass(frozen=True)
class CrashConfig:
    pitch_threshold_deg: float = 60.0
    stable_s: float = 1.0


def detect_crash(records: Sequence[TelemetryRecord],
                 cfg: CrashConfig = CrashConfig()) -> List[DetectionEvent]:
    """Detect tumbling: pitch excursions beyond the threshold whose sign
    flips at least once. Tumble count = number of sign flips between
    consecutive excursions; the episode closes after the pitch has stayed
    inside the threshold for ``stable_s``."""
    s = Series(records)
    events: List[DetectionEvent] = []
    episode_signs: List[int] = []
    episode_start: Optional[int] = None
    calm_s = 0.0
    for i in range(s.n):
        p = s.pitch[i]
        if abs(p) >= cfg.pitch_threshold_deg:
            sign = 1 if p > 0 else -1
            if not episode_signs or episode_signs[-1] != sign:
                episode_signs.append(sign)
            if episode_start is None:
                episode_start = int(s.t_ms[i])
            calm_s = 0.0
        elif episode_start is not None:
            calm_s += s.dt_s
            if calm_s >= cfg.stable_s:
                flips = len(episode_signs) - 1
                if flips >= 1:
                    events.append(DetectionEvent(
                        "crash", episode_start, {"tumbles": flips}))
                episode_signs = []
                episode_start = None
                calm_s = 0.0
    if episode_start is not None and len(episode_signs) >= 2:
        events.append(DetectionEvent("crash", episode_start,
                                     {"tumbles": len(episode_signs) - 1}))
    return events


def detect_thermal_critical(records: Sequence[TelemetryRecord],
                            window_s: float = 60.0,
                            shift_c: float = 10.0) -> List[DetectionEvent]:
    """One event per component whose temperature spread inside a trailing
    window reaches the critical shift."""
    s = Series(records)
    events: List[DetectionEvent] = []
    win = max(1, int(round(window_s / s.dt_s)))
    for c, name in enumerate(TEMP_NAMES):
        col = s.temps[:, c]
        for i in range(win, s.n):
            w = col[i - win:i + 1]
            if w.max() - w.min() >= shift_c:
                events.append(DetectionEvent(
                    "thermal_critical", int(s.t_ms[i]), {"component": name}))
                break
    return events


def detect_battery_low(records: Sequence[TelemetryRecord]) -> List[DetectionEvent]:
    for r in records:
        if r.status_flags & FLAG_BATTERY_LOW:
            return [DetectionEvent("battery_low", r.timestamp_ms, {})]
    return []


def run_all_detectors(records: Sequence[TelemetryRecord]) -> List[DetectionEvent]:
    events = (detect_diff_failure(records) + detect_crash(records)
              + detect_thermal_critical(records) + detect_battery_low(records))
    return sorted(events, key=lambda e: e.t_ms)


# ------------------------------------------------- steering corrections

@dataclass(frozen=True)
class CorrectionStats:
    count: int
    magnitudes_us: Tuple[float, ...]


def steering_correction_stats(records: Sequence[TelemetryRecord],
                              mask: Optional[np.ndarray] = None,
                              deadband_us: float = 40.0,
                              center_us: float = 1500.0) -> CorrectionStats:
    """Count servo excursions beyond the deadband on straight segments;
    consecutive out-of-band ticks merge into one correction episode."""
    s = Series(records)
    if mask is None:
        mask = straight_mask(s)
    out = mask & (np.abs(s.servo - center_us) > deadband_us)
    count = 0
    mags: List[float] = []
    cur_mag = 0.0
    prev = False
    for i in range(s.n):
        if out[i]:
            if not prev:
                count += 1
                cur_mag = 0.0
            cur_mag = max(cur_mag, abs(s.servo[i] - center_us))
        elif prev:
            mags.append(cur_mag)
        prev = bool(out[i])
    if prev:
        mags.append(cur_mag)
    return CorrectionStats(count, tuple(mags))


# ------------------------------------------------------------ summaries

def _gps_xy(s: Series) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Local meters relative to the first fix, equirectangular."""
    fix = s.fix & (np.abs(s.lat) > 1e-9)
    if not fix.any():
        raise NoGps("no GPS fix in the record stream")
    lat0 = float(s.lat[fix][0])
    lon0 = float(s.lon[fix][0])
    x = (s.lon - lon0) * METERS_PER_DEG_LAT * math.cos(math.radians(lat0))
    y = (s.lat - lat0) * METERS_PER_DEG_LAT
    return x, y, fix


def mean_gps_spacing_m(records: Sequence[TelemetryRecord]) -> float:
    s = Series(records)
    x, y, fix = _gps_xy(s)
    xs, ys = x[fix], y[fix]
    if len(xs) < 2:
        return 0.0
    return float(np.mean(np.hypot(np.diff(xs), np.diff(ys))))


@dataclass
class RunSummary:
    scenario_name: str
    laps: int
    duration_s: float
    mean_speed_kmh: float
    max_speed_kmh: float
    correction_count: int
    temp_delta_c: Dict[str, float]
    wheel_diff_by_class: Dict[str, float]   # straight / left / right mean diff_lr
    gps_spacing_m: float

    def lines(self) -> List[str]:
        out = [
            "scenario:          %s" % self.scenario_name,
            "laps:              %d" % self.laps,
            "duration_s:        %.2f" % self.duration_s,
            "mean_speed_kmh:    %.2f" % self.mean_speed_kmh,
            "max_speed_kmh:     %.2f" % self.max_speed_kmh,
            "corrections:       %d" % self.correction_count,
            "gps_spacing_m:     %.3f" % self.gps_spacing_m,
        ]
        for k in TEMP_NAMES:
            out.append("temp_delta_%s:%s %.2f" % (k, " " * (5 - len(k)),
                                                  self.temp_delta_c[k]))
        for k, v in self.wheel_diff_by_class.items():
            out.append("diff_lr_%s:%s %.4f" % (k, " " * (9 - len(k)), v))
        return out


def summarize(log: SessionLog, lap_count: Optional[int] = None) -> RunSummary:
    s = Series(log.records)
    mask = straight_mask(s)
    turning_left = s.yaw_rate >= 0.35
    turning_right = s.yaw_rate <= -0.35
    corr = steering_correction_stats(log.records, mask)
    temp_delta = {}
    for c, name in enumerate(TEMP_NAMES):
        temp_delta[name] = (float(s.temps[-1, c] - s.temps[0, c])
                            if s.n else 0.0)
    diff_by_class = {
        "straight": float(s.diff_lr_norm[mask].mean()) if mask.any() else 0.0,
        "left": float(s.diff_lr_norm[turning_left].mean())
                if turning_left.any() else 0.0,
        "right": float(s.diff_lr_norm[turning_right].mean())
                 if turning_right.any() else 0.0,
    }
    try:
        spacing = mean_gps_spacing_m(log.records)
    except NoGps:
        spacing = 0.0
    return RunSummary(
        scenario_name=log.scenario_name,
        laps=lap_count if lap_count is not None else 0,
        duration_s=log.duration_ms / 1000.0,
        mean_speed_kmh=float(s.gps_speed[s.fix].mean()) if s.fix.any() else 0.0,
        max_speed_kmh=float(s.gps_speed.max()) if s.n else 0.0,
        correction_count=corr.count,
        temp_delta_c=temp_delta,
        wheel_diff_by_class=diff_by_class,
        gps_spacing_m=spacing,
    )


def compare_runs(a: SessionLog, b: SessionLog,
                 ) -> Tuple[RunSummary, RunSummary, Dict[str, float]]:
    """Summaries of both logs plus first-minus-second deltas."""
    if a.tick_rate_hz != b.tick_rate_hz:
        raise IncomparableRuns("tick rates differ: %d vs %d"
                               % (a.tick_rate_hz, b.tick_rate_hz))
    sa, sb = summarize(a), summarize(b)
    deltas = {
        "duration_s": sa.duration_s - sb.duration_s,
        "mean_speed_kmh": sa.mean_speed_kmh - sb.mean_speed_kmh,
        "correction_count": float(sa.correction_count - sb.correction_count),
        "gps_spacing_m": sa.gps_spacing_m - sb.gps_spacing_m,
    }
    for k in TEMP_NAMES:
        deltas["temp_delta_" + k] = sa.temp_delta_c[k] - sb.temp_delta_c[k]
    return sa, sb, deltas


# ------------------------------------------------------------------ laps

@dataclass(frozen=True)
class StartLine:
    x: float
    y: float
    dir_x: float          # one-way travel direction (unit)
    dir_y: float
    half_width_m: float = 5.0


def lap_segmentation(records: Sequence[TelemetryRecord], start_line: StartLine,
                     origin_lat: float, origin_lon: float,
                     debounce_s: float = 5.0) -> List[int]:
    """Timestamps (ms) of start-line crossings in the track direction.

    Positions come from the GPS fields; re-crossings within the debounce
    window are suppressed.
    """
    s = Series(records)
    fix = s.fix & (np.abs(s.lat) > 1e-9)
    if not fix.any():
        raise NoGps("no GPS fix in the record stream")
    x = (s.lon - origin_lon) * METERS_PER_DEG_LAT * math.cos(math.radians(origin_lat))
    y = (s.lat - origin_lat) * METERS_PER_DEG_LAT
    along = (x - start_line.x) * start_line.dir_x + (y - start_line.y) * start_line.dir_y
    lateral = -(x - start_line.x) * start_line.dir_y + (y - start_line.y) * start_line.dir_x
    boundaries: List[int] = []
    last_cross_ms = -1e18
    gate = start_line.half_width_m
    arm_m = 2.0     # must approach from this far behind the line (noise margin)
    armed = False
    for i in range(s.n):
        if not fix[i]:
            continue
        near = abs(lateral[i]) <= gate and abs(along[i]) <= gate
        if near and along[i] < -arm_m:
            armed = True
        elif (armed and near and along[i] >= 0
                and s.t_ms[i] - last_cross_ms >= debounce_s * 1000.0):
            boundaries.append(int(s.t_ms[i]))
            last_cross_ms = s.t_ms[i]
            armed = False
    return boundaries


# ------------------------------------------------------------ CSV export

def lap_column(t_ms: Sequence[int], boundaries: Sequence[int]) -> List[int]:
    out = []
    for t in t_ms:
        out.append(sum(1 for b in boundaries if b <= t))
    return out


def export_csv(log: SessionLog, path, wheel_diameter_m: float = 0.1,
               lap_boundaries: Optional[Sequence[int]] = None) -> None:
    """Write the documented per-tick derived series."""
    s = Series(log.records)
    laps = lap_column(s.t_ms, lap_boundaries or [])
    with open(path, "w") as f:
        f.write(",".join(CSV_COLUMNS) + "\n")
        for i in range(s.n):
            v = [linear_speed_kmh(s.wheels[i, k], wheel_diameter_m)
                 for k in range(4)]
            f.write("%d,%.4f,%.4f,%.4f,%.4f,%.3f,%.3f,%.3f,%.5f,%.5f,"
                    "%.2f,%.2f,%.2f,%.2f,%d,%d,%d\n" % (
                        s.t_ms[i], v[0], v[1], v[2], v[3],
                        s.yaw[i], s.pitch[i], s.roll[i],
                        s.diff_lr_norm[i], s.diff_fr_norm[i],
                        s.temps[i, 0], s.temps[i, 1], s.temps[i, 2], s.temps[i, 3],
                        int(s.servo[i]), int(s.throttle[i]), laps[i]))
