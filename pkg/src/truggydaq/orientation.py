"""Quaternion and Euler-angle handling.

Scalar-first quaternions (a, b, c, d) with b, c, d on the i, j, k basis.
Euler angles follow the intrinsic ZYX (yaw, pitch, roll) convention in
degrees; the conversion pair is locked in by round-trip tests rather than
any single formula transcription.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateQuaternion, NotNormalized

GIMBAL_GUARD_DEG = 85.0
_NORM_TOLERANCE = 1e-3


@dataclass(frozen=True)
class Quaternion:
    a: float
    b: float
    c: float
    d: float

    def norm(self) -> float:
        return math.sqrt(self.a ** 2 + self.b ** 2 + self.c ** 2 + self.d ** 2)


@dataclass(frozen=True)
class EulerAngles:
    yaw_deg: float
    pitch_deg: float
    roll_deg: float


def normalize(q: Quaternion) -> Quaternion:
    n = q.norm()
    if n == 0.0 or not math.isfinite(n):
        raise DegenerateQuaternion("cannot normalize %r" % (q,))
    return Quaternion(q.a / n, q.b / n, q.c / n, q.d / n)


def quat_to_euler(q: Quaternion) -> EulerAngles:
    """Unit quaternion to ZYX Euler angles in degrees."""
    if abs(q.norm() - 1.0) > _NORM_TOLERANCE:
        raise NotNormalized("|q| = %g, expected 1" % q.norm())
    a, b, c, d = q.a, q.b, q.c, q.d
    yaw = math.atan2(2.0 * (b * c + d * a), a * a + b * b - c * c - d * d)
    # clamp absorbs floating-point overshoot near gimbal lock
    sinp = max(-1.0, min(1.0, 2.0 * (a * c - b * d)))
    pitch = math.asin(sinp)
    roll = math.atan2(2.0 * (c * d + b * a), a * a - b * b - c * c + d * d)
    return EulerAngles(math.degrees(yaw), math.degrees(pitch), math.degrees(roll))


def euler_to_quat(e: EulerAngles) -> Quaternion:
    """ZYX Euler angles in degrees to a unit quaternion."""
    hy = math.radians(e.yaw_deg) / 2.0
    hp = math.radians(e.pitch_deg) / 2.0
    hr = math.radians(e.roll_deg) / 2.0
    cy, sy = math.cos(hy), math.sin(hy)
    cp, sp = math.cos(hp), math.sin(hp)
    cr, sr = math.cos(hr), math.sin(hr)
    return Quaternion(
        cr * cp * cy + sr * sp * sy,
        sr * cp * cy - cr * sp * sy,
        cr * sp * cy + sr * cp * sy,
        cr * cp * sy - sr * sp * cy,
    )


def gimbal_guard(e: EulerAngles, threshold_deg: float = GIMBAL_GUARD_DEG) -> bool:
    """True when pitch is close enough to +/-90 deg that Euler output is
    unreliable and consumers should fall back to the quaternion."""
    return abs(e.pitch_deg) > threshold_deg
