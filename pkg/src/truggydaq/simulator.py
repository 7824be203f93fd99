"""Scenario simulator: ground-truth vehicle motion on a closed-loop track
plus synthesis of every sensor stream into telemetry records.

The vehicle is a kinematic bicycle following the track centerline with
pure-pursuit steering; per-wheel speeds come from the turn geometry plus a
throttle-driven slip term on the driven front wheels. Four scenarios are
supported: slow_lap, fast_lap, locked_rear_diff and crash.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

from .core_model import (FLAG_BATTERY_LOW, FLAG_GPS_FIX, FLAG_THERMAL_ALARM,
                         SessionLog, TelemetryRecord)
from .encoder import EncoderConfig, PulseStreamTracker
from .orientation import EulerAngles, euler_to_quat, quat_to_euler
from .power_thermal import BatteryState, default_rails, measure_current, step_battery

SCENARIO_NAMES = ("slow_lap", "fast_lap", "locked_rear_diff", "crash")

METERS_PER_DEG_LAT = 111320.0
PWM_CENTER_US = 1500
PWM_SPAN_US = 500
CRASH_WINDOW_S = 2.0
CRASH_PITCH_DEG = 95.0


# ---------------------------------------------------------------- track

@dataclass
class Track:
    """Closed-loop centerline: waypoints (x, y, z, roughness) in meters.

    The loop direction is the waypoint order; the start line sits at
    waypoint 0, perpendicular to the local tangent.
    """

    xs: List[float]
    ys: List[float]
    zs: List[float]
    roughness: List[float]

    def __post_init__(self):
        n = len(self.xs)
        if n < 4:
            raise ValueError("track needs at least 4 waypoints")
        self._seg_len = []
        for i in range(n):
            j = (i + 1) % n
            d = math.hypot(self.xs[j] - self.xs[i], self.ys[j] - self.ys[i])
            if d <= 0:
                raise ValueError("zero-length segment at waypoint %d" % i)
            self._seg_len.append(d)
        self._cum = [0.0]
        for d in self._seg_len:
            self._cum.append(self._cum[-1] + d)
        self.total_length = self._cum[-1]

    def _locate(self, s: float) -> Tuple[int, float]:
        s = s % self.total_length
        # binary search over cumulative lengths
        lo, hi = 0, len(self._seg_len)
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if self._cum[mid] <= s:
                lo = mid
            else:
                hi = mid
        return lo, (s - self._cum[lo]) / self._seg_len[lo]

    def point_at(self, s: float) -> Tuple[float, float]:
        i, f = self._locate(s)
        j = (i + 1) % len(self.xs)
        return (self.xs[i] + f * (self.xs[j] - self.xs[i]),
                self.ys[i] + f * (self.ys[j] - self.ys[i]))

    def elevation_at(self, s: float) -> float:
        i, f = self._locate(s)
        j = (i + 1) % len(self.xs)
        return self.zs[i] + f * (self.zs[j] - self.zs[i])

    def grade_at(self, s: float) -> float:
        """dz/ds at arclength s (positive climbing)."""
        i, _ = self._locate(s)
        j = (i + 1) % len(self.xs)
        return (self.zs[j] - self.zs[i]) / self._seg_len[i]

    def roughness_at(self, s: float) -> float:
        i, _ = self._locate(s)
        return self.roughness[i]

    def tangent_at(self, s: float) -> Tuple[float, float]:
        i, _ = self._locate(s)
        j = (i + 1) % len(self.xs)
        d = self._seg_len[i]
        return ((self.xs[j] - self.xs[i]) / d, (self.ys[j] - self.ys[i]) / d)

    def start_line(self) -> Tuple[float, float, float, float]:
        """(x, y, tangent_x, tangent_y) of the start line at waypoint 0."""
        tx, ty = self.tangent_at(0.0)
        return self.xs[0], self.ys[0], tx, ty

    def project(self, x: float, y: float, s_hint: float,
                search_m: float = 8.0) -> float:
        """Arclength of the closest centerline point near s_hint.

        Returns an unwrapped (monotonically growing) arclength so laps can
        be counted as multiples of the loop length.
        """
        best_s, best_d = s_hint, float("inf")
        n = len(self.xs)
        i0, _ = self._locate(s_hint)
        span = max(2, int(search_m / (self.total_length / n)))
        for di in range(-span, span + 1):
            i = (i0 + di) % n
            j = (i + 1) % n
            ax, ay = self.xs[i], self.ys[i]
            bx, by = self.xs[j], self.ys[j]
            vx, vy = bx - ax, by - ay
            L2 = vx * vx + vy * vy
            f = max(0.0, min(1.0, ((x - ax) * vx + (y - ay) * vy) / L2))
            px, py = ax + f * vx, ay + f * vy
            d = math.hypot(x - px, y - py)
            if d < best_d:
                best_d = d
                s_seg = self._cum[i] + f * self._seg_len[i]
                # unwrap relative to the hint
                base = s_hint - (s_hint % self.total_length)
                cand = base + s_seg
                if cand < s_hint - self.total_length / 2:
                    cand += self.total_length
                elif cand > s_hint + self.total_length / 2:
                    cand -= self.total_length
                best_s = cand
        return best_s

    def write(self, path) -> None:
        with open(path, "w") as f:
            for x, y, z, r in zip(self.xs, self.ys, self.zs, self.roughness):
                f.write("%.4f %.4f %.4f %.4f\n" % (x, y, z, r))

    @classmethod
    def load(cls, path) -> "Track":
        xs, ys, zs, rs = [], [], [], []
        with open(path) as f:
            for line in f:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 4:
                    raise ValueError("track line must be 'x y z roughness': %r" % line)
                x, y, z, r = map(float, parts)
                xs.append(x)
                ys.append(y)
                zs.append(z)
                rs.append(r)
        return cls(xs, ys, zs, rs)


def default_track(n: int = 240) -> Track:
    """Synthetic closed loop with corners of both directions, a hill and a
    rough section (polar wobble curve, ~130 m around)."""
    xs, ys, zs, rs = [], [], [], []
    for k in range(n):
        th = 2.0 * math.pi * k / n
        r = 20.0 + 5.0 * math.cos(2.0 * th) + 2.5 * math.sin(3.0 * th)
        xs.append(r * math.cos(th))
        ys.append(r * math.sin(th))
        zs.append(1.2 * math.sin(th) ** 2 if th < math.pi else 0.0)
        rs.append(0.8 if 3.5 < th < 4.5 else 0.2)
    return Track(xs, ys, zs, rs)


# ------------------------------------------------------------- scenario

@dataclass(frozen=True)
class Scenario:
    name: str = "slow_lap"
    laps: int = 3
    tick_rate_hz: int = 10
    seed: int = 0
    target_speed_mps: Optional[float] = None
    duration_s: Optional[float] = None       # overrides lap-based stopping
    failure_onset_s: float = 30.0            # locked_rear_diff
    crash_time_s: float = 20.0               # crash
    crash_tumbles: int = 2                   # 1..3
    gps_origin_lat: float = 51.0
    gps_origin_lon: float = 4.2
    gps_sigma_m: float = 0.5
    gps_dropout_prob: float = 0.0

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ValueError("unknown scenario %r" % self.name)
        if self.tick_rate_hz <= 0 or self.laps < 1:
            raise ValueError("tick_rate_hz must be > 0 and laps >= 1")
        if not 1 <= self.crash_tumbles <= 3:
            raise ValueError("crash_tumbles must be 1..3")

    @property
    def target_speed(self) -> float:
        if self.target_speed_mps is not None:
            return self.target_speed_mps
        return {"slow_lap": 4.0, "fast_lap": 9.0,
                "locked_rear_diff": 5.0, "crash": 5.0}[self.name]


@dataclass(frozen=True)
class VehicleParams:
    wheelbase_m: float = 0.35
    track_width_m: float = 0.30
    wheel_diameter_m: float = 0.10
    max_accel_mps2: float = 8.0
    drag_per_v: float = 0.35
    max_steer_rad: float = 0.45
    slip_gain: float = 0.04          # nominal front slip vs accel demand
    fail_slip_gain: float = 2.0      # front slip vs throttle when rear drive lost
    speed_kp: float = 1.5
    gear_ratio: float = 10.0
    corr_yaw_coupling: float = 0.1   # how much of a steer correction reaches the tires


@dataclass
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    s: float = 0.0                   # unwrapped centerline arclength
    heading: float = 0.0
    speed: float = 0.0
    yaw_rate: float = 0.0
    pitch_deg: float = 0.0
    roll_deg: float = 0.0
    wheel_speed_mps: Tuple[float, float, float, float] = (0.0,) * 4  # fl fr rl rr
    throttle: float = 0.0
    steer: float = 0.0
    accel_long: float = 0.0
    corr_us: float = 0.0             # active steering-correction offset
    corr_ticks_left: int = 0
    failure_active: bool = False
    crash_active: bool = False


def _wrap_pi(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _correction_prob(throttle: float) -> float:
    return max(0.0, min(0.5, 0.35 * (throttle - 0.12)))


def step_vehicle(state: VehicleState, track: Track, params: VehicleParams,
                 target_speed: float, dt: float, rng: random.Random) -> None:
    """Advance the pose one tick: pure-pursuit steering toward the track,
    proportional speed control against linear drag, wheel speeds from the
    turn geometry."""
    v = state.speed
    lookahead = max(1.5, 0.6 * v)
    tx, ty = track.point_at(state.s + lookahead)
    eta = _wrap_pi(math.atan2(ty - state.y, tx - state.x) - state.heading)
    delta = math.atan2(2.0 * params.wheelbase_m * math.sin(eta), lookahead)

    # driver micro-corrections: occasional counter-steer impulses whose rate
    # grows with drive power demand; mostly cancelled at the tires
    if state.corr_ticks_left > 0:
        state.corr_ticks_left -= 1
        if state.corr_ticks_left == 0:
            state.corr_us = 0.0
    elif rng.random() < _correction_prob(state.throttle):
        state.corr_ticks_left = rng.randint(2, 4)
        state.corr_us = rng.choice((-1.0, 1.0)) * rng.uniform(50.0, 130.0)
    jitter_us = rng.gauss(0.0, 6.0)
    corr_rad = ((state.corr_us * params.corr_yaw_coupling + jitter_us)
                / PWM_SPAN_US * params.max_steer_rad)
    delta = max(-params.max_steer_rad, min(params.max_steer_rad, delta + corr_rad))
    state.steer = delta / params.max_steer_rad

    a_cmd = params.speed_kp * (target_speed - v)
    drag = params.drag_per_v * v
    throttle = max(-1.0, min(1.0, (a_cmd + drag) / params.max_accel_mps2))
    accel = throttle * params.max_accel_mps2 - drag
    state.throttle = throttle
    state.accel_long = accel
    new_v = max(0.0, v + accel * dt)

    state.yaw_rate = v * math.tan(delta) / params.wheelbase_m
    state.heading = _wrap_pi(state.heading + state.yaw_rate * dt)
    state.x += new_v * math.cos(state.heading) * dt
    state.y += new_v * math.sin(state.heading) * dt
    state.speed = new_v
    state.s = track.project(state.x, state.y, state.s + new_v * dt)
    state.z = track.elevation_at(state.s)

    rough = track.roughness_at(state.s)
    state.pitch_deg = (math.degrees(math.atan(track.grade_at(state.s)))
                       + rng.gauss(0.0, 1.5 * rough * min(v, 8.0) / 8.0))
    state.roll_deg = (-math.degrees(math.atan2(v * state.yaw_rate, 9.81)) * 0.3
                      + rng.gauss(0.0, 1.0 * rough * min(v, 8.0) / 8.0))

    _update_wheel_speeds(state, params, delta, a_cmd)


def _update_wheel_speeds(state: VehicleState, params: VehicleParams,
                         delta: float, a_cmd: float) -> None:
    v = state.speed
    L, w = params.wheelbase_m, params.track_width_m
    tan_d = math.tan(delta)
    if abs(tan_d) < 1e-4 or v < 1e-6:
        base = [v, v, v, v]
    else:
        R = L / tan_d                      # signed turn radius, + = left turn
        omega = v / R
        r_fl = math.hypot(L, R - w / 2.0)
        r_fr = math.hypot(L, R + w / 2.0)
        r_rl = abs(R - w / 2.0)
        r_rr = abs(R + w / 2.0)
        base = [abs(omega) * r for r in (r_fl, r_fr, r_rl, r_rr)]
    fl, fr, rl, rr = base
    if state.failure_active:
        # rear drive lost + rear differential locked: both rears freewheel
        # at the mean ground speed, fronts carry all drive torque
        rear = (rl + rr) / 2.0
        rl = rr = rear
        slip = 1.0 + params.fail_slip_gain * max(0.0, state.throttle)
        fl *= slip
        fr *= slip
    else:
        slip = 1.0 + params.slip_gain * max(0.0, a_cmd) / params.max_accel_mps2
        fl *= slip
        fr *= slip
    state.wheel_speed_mps = (fl, fr, rl, rr)


def apply_failure(state: VehicleState, scenario: Scenario, t: float) -> None:
    """Mark the locked-rear-differential failure active from its onset."""
    state.failure_active = (scenario.name == "locked_rear_diff"
                            and t >= scenario.failure_onset_s)


def apply_crash(state: VehicleState, scenario: Scenario, t: float) -> None:
    """Override the pose during the crash window: the pitch angle plateaus
    alternate sign once per tumble, speed collapses, and the vehicle ends
    inverted (roll 180)."""
    if scenario.name != "crash" or t < scenario.crash_time_s:
        return
    state.crash_active = True
    rel = t - scenario.crash_time_s
    decay = 0.6 if rel < 1.0 else 0.0     # per-tick collapse factor
    state.speed *= decay
    state.wheel_speed_mps = tuple(ws * decay for ws in state.wheel_speed_mps)
    state.yaw_rate = 0.0
    state.throttle = 0.0
    state.accel_long = 0.0
    lobes = scenario.crash_tumbles + 1
    lobe_s = CRASH_WINDOW_S / lobes
    if rel < CRASH_WINDOW_S:
        k = int(rel / lobe_s)
        state.pitch_deg = CRASH_PITCH_DEG * (1 if k % 2 == 0 else -1)
        state.roll_deg = 0.0
    else:
        state.pitch_deg = 0.0
        state.roll_deg = 180.0


# ----------------------------------------------------------- simulation

@dataclass
class GroundTruthTick:
    t_ms: int
    x: float
    y: float
    speed_mps: float
    yaw_rate: float
    turn_sign: int           # +1 clockwise, -1 counterclockwise, 0 straight
    throttle: float
    failure_active: bool
    crash_active: bool
    lap: int

    CSV_HEADER = ("t_ms,x,y,speed_mps,yaw_rate,turn_sign,throttle,"
                  "failure_active,crash_active,lap")

    def csv_row(self) -> str:
        return "%d,%.4f,%.4f,%.4f,%.5f,%d,%.4f,%d,%d,%d" % (
            self.t_ms, self.x, self.y, self.speed_mps, self.yaw_rate,
            self.turn_sign, self.throttle, int(self.failure_active),
            int(self.crash_active), self.lap)


@dataclass
class SimRun:
    log: SessionLog
    truth: List[GroundTruthTick]
    lap_ticks: List[int]
    scenario: Scenario
    track: Track

    def write_truth_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(GroundTruthTick.CSV_HEADER + "\n")
            for gt in self.truth:
                f.write(gt.csv_row() + "\n")


class _ThermalModel:
    """First-order component temperatures; the ESC cools much faster than
    the motor (it has a dedicated fan)."""

    AMBIENT = 20.0
    # (heat coefficient, cooling rate 1/s)
    COEFFS = {"ss": (0.5, 0.05), "esc1": (0.5, 0.15),
              "m1": (0.8, 0.005), "bp": (3.0e-4, 0.003)}

    def __init__(self):
        self.temps = {k: self.AMBIENT for k in self.COEFFS}

    def step(self, throttle: float, steer: float, batt_i: float, dt: float) -> None:
        drive = {"ss": steer * steer, "esc1": throttle * throttle,
                 "m1": throttle * throttle, "bp": batt_i * batt_i}
        for k, (q, cool) in self.COEFFS.items():
            t = self.temps[k]
            self.temps[k] = t + (q * drive[k] - cool * (t - self.AMBIENT)) * dt

    def ordered(self) -> Tuple[float, float, float, float]:
        return (self.temps["ss"], self.temps["esc1"],
                self.temps["m1"], self.temps["bp"])


class Simulation:
    """One scenario run: tick loop, sensor synthesis and bookkeeping."""

    MAX_TICKS = 50_000

    def __init__(self, scenario: Scenario, track: Track,
                 params: VehicleParams = VehicleParams()):
        self.scenario = scenario
        self.track = track
        self.params = params
        self.rng = random.Random(scenario.seed)
        self.dt = 1.0 / scenario.tick_rate_hz
        self.enc_cfg = EncoderConfig(wheel_diameter_m=params.wheel_diameter_m)
        self.trackers = [PulseStreamTracker(self.enc_cfg, scenario.tick_rate_hz)
                         for _ in range(4)]
        self.phases = [self.rng.uniform(0.0, 1.0) for _ in range(4)]
        self.thermal = _ThermalModel()
        self.battery = BatteryState()
        self.rails = default_rails()
        self.temp_histories = {k: deque() for k in ("ss", "esc1", "m1", "bp")}
        x0, y0, tx, ty = track.start_line()
        self.state = VehicleState(x=x0, y=y0, heading=math.atan2(ty, tx))
        self._thermal_alarm = False

    # pulse synthesis: uniform pulse spacing within a tick at the current rate
    def _encoder_rpms(self, t_now: float) -> List[float]:
        rpms = []
        for i in range(4):
            rev_per_s = self.state.wheel_speed_mps[i] / (
                math.pi * self.params.wheel_diameter_m)
            rate = rev_per_s * self.enc_cfg.magnet_count
            tracker = self.trackers[i]
            if rate > 1e-9:
                phase = self.phases[i]
                t0 = t_now - self.dt
                k = math.floor(phase) + 1
                while (k - phase) / rate <= self.dt + 1e-12:
                    tracker.add_pulse(t0 + (k - phase) / rate)
                    k += 1
                self.phases[i] = phase + rate * self.dt
            est = tracker.tick(t_now)
            rpms.append(est.omega_rpm)
        return rpms

    def _track_temp_alarm(self, t_s: float) -> bool:
        alarm = False
        for k, hist in self.temp_histories.items():
            hist.append((t_s, self.thermal.temps[k]))
            while hist and hist[0][0] < t_s - 60.0:
                hist.popleft()
            if hist[-1][0] - hist[0][0] >= 59.0:
                temps = [c for _, c in hist]
                if max(temps) - min(temps) >= 10.0:
                    alarm = True
        return alarm

    def _synthesize_record(self, seq: int, t_ms: int) -> TelemetryRecord:
        st, rng = self.state, self.rng
        d = self.params.wheel_diameter_m
        rpms = self._encoder_rpms(t_ms / 1000.0)
        motor_rpm = (sum(rpms[:2]) / 2.0) * self.params.gear_ratio \
            + rng.gauss(0.0, 2.0)

        euler_in = EulerAngles(math.degrees(st.heading), st.pitch_deg, st.roll_deg)
        quat = euler_to_quat(euler_in)
        euler = quat_to_euler(quat)

        batt_i = 2.0 + 38.0 * max(0.0, st.throttle)
        self.battery = step_battery(self.battery, batt_i, self.dt)
        self.thermal.step(st.throttle, st.steer, batt_i, self.dt)
        alarm = self._track_temp_alarm(t_ms / 1000.0)

        rail_true_i = (batt_i, 0.8, 0.25)
        rail_i = tuple(measure_current(r, i, rng).amps
                       for r, i in zip(self.rails, rail_true_i))
        rail_v = (self.battery.voltage_v,
                  5.1 + rng.gauss(0.0, 0.01),
                  3.3 + rng.gauss(0.0, 0.005))

        has_fix = rng.random() >= self.scenario.gps_dropout_prob
        lat = lon = 0.0
        gps_speed = 0.0
        if has_fix:
            gx = st.x + rng.gauss(0.0, self.scenario.gps_sigma_m)
            gy = st.y + rng.gauss(0.0, self.scenario.gps_sigma_m)
            lat = self.scenario.gps_origin_lat + gy / METERS_PER_DEG_LAT
            lon = self.scenario.gps_origin_lon + gx / (
                METERS_PER_DEG_LAT * math.cos(
                    math.radians(self.scenario.gps_origin_lat)))
            gps_speed = max(0.0, st.speed * 3.6 + rng.gauss(0.0, 0.2))

        flags = 0
        if has_fix:
            flags |= FLAG_GPS_FIX
        if alarm:
            flags |= FLAG_THERMAL_ALARM
        if self.battery.low:
            flags |= FLAG_BATTERY_LOW

        a_lat = st.speed * st.yaw_rate
        accel = (st.accel_long + rng.gauss(0.0, 0.05),
                 a_lat + rng.gauss(0.0, 0.05),
                 9.81 * math.cos(math.radians(st.pitch_deg)) + rng.gauss(0.0, 0.1))

        servo = int(round(PWM_CENTER_US + st.steer * PWM_SPAN_US + st.corr_us
                          + rng.gauss(0.0, 2.0)))
        throttle_us = int(round(PWM_CENTER_US + st.throttle * PWM_SPAN_US))
        return TelemetryRecord(
            seq=seq,
            timestamp_ms=t_ms,
            wheel_speed_rpm=tuple(rpms),
            motor_speed_rpm=motor_rpm,
            quat=(quat.a, quat.b, quat.c, quat.d),
            euler_deg=(euler.yaw_deg, euler.pitch_deg, euler.roll_deg),
            accel_mps2=accel,
            gps_lat=lat,
            gps_lon=lon,
            gps_speed_kmh=gps_speed,
            temps_c=self.thermal.ordered(),
            rail_v=rail_v,
            rail_i=rail_i,
            servo_pwm_us=max(1000, min(2000, servo)),
            throttle_pwm_us=max(1000, min(2000, throttle_us)),
            status_flags=flags,
            gps_fix=2 if has_fix else 0,
            gps_sats=rng.randint(8, 12) if has_fix else 0,
        )

    def _done(self, tick: int, t: float) -> bool:
        sc = self.scenario
        if sc.duration_s is not None:
            return t >= sc.duration_s
        if sc.name == "crash":
            return t >= sc.crash_time_s + 10.0
        # small overrun so the final start-line crossing is fully recorded
        return self.state.s >= sc.laps * self.track.total_length + 5.0

    def run(self) -> SimRun:
        sc = self.scenario
        log = SessionLog(scenario_name=sc.name, tick_rate_hz=sc.tick_rate_hz)
        truth: List[GroundTruthTick] = []
        lap_ticks: List[int] = []
        laps_done = 0
        tick = 0
        while tick < self.MAX_TICKS:
            tick += 1
            t = tick * self.dt
            apply_failure(self.state, sc, t)
            crashing = sc.name == "crash" and t >= sc.crash_time_s
            if not crashing:
                step_vehicle(self.state, self.track, self.params,
                             sc.target_speed, self.dt, self.rng)
            apply_crash(self.state, sc, t)

            t_ms = tick * round(1000 / sc.tick_rate_hz)
            log.append(self._synthesize_record(tick, t_ms))

            new_laps = int(self.state.s // self.track.total_length)
            if new_laps > laps_done:
                laps_done = new_laps
                lap_ticks.append(tick)
            turn = 0
            if abs(self.state.yaw_rate) > 1e-9:
                turn = -1 if self.state.yaw_rate > 0 else 1
            truth.append(GroundTruthTick(
                t_ms=t_ms, x=self.state.x, y=self.state.y,
                speed_mps=self.state.speed, yaw_rate=self.state.yaw_rate,
                turn_sign=turn, throttle=self.state.throttle,
                failure_active=self.state.failure_active,
                crash_active=self.state.crash_active, lap=laps_done))
            if self._done(tick, t):
                break
        return SimRun(log, truth, lap_ticks, sc, self.track)


def run_scenario(scenario: Scenario, track: Optional[Track] = None,
                 params: VehicleParams = VehicleParams()) -> SimRun:
    """Run one scenario to completion; deterministic for a given seed."""
    if track is None:
        track = default_track()
    return Simulation(scenario, track, params).run()
