"""Rigid-transform algebra: unit quaternions, 3-vectors, and poses.

Convention:
  - Quaternions are scalar-first Hamilton quaternions (w, x, y, z),
    right-handed rotations.
  - A RigidTransform maps points from its local frame into the parent
    frame: p_parent = R * p_local + t.
  - Serialized pose order on every wire and file: [tx, ty, tz, qw, qx, qy, qz].

All values are immutable; every operation is a pure function and safe to
call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

# Integer nanoseconds on a process-monotonic clock.
TimestampNs = int

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class Vec3:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __add__(self, other: Vec3) -> Vec3:
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: Vec3) -> Vec3:
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, s: float) -> Vec3:
        return Vec3(self.x * s, self.y * s, self.z * s)

    __rmul__ = __mul__

    def __neg__(self) -> Vec3:
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: Vec3) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: Vec3) -> Vec3:
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> Vec3:
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def is_finite(self) -> bool:
        return all(math.isfinite(c) for c in (self.x, self.y, self.z))

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.z]

    @staticmethod
    def from_seq(seq: Sequence[float]) -> Vec3:
        x, y, z = seq
        return Vec3(float(x), float(y), float(z))


@dataclass(frozen=True)
class UnitQuaternion:
    """Scalar-first unit quaternion. Constructors normalize; |norm - 1| <= 1e-9 holds."""

    w: float = 1.0
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self) -> None:
        n = math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)
        if not math.isfinite(n) or n == 0.0:
            raise ValueError(f"quaternion norm is {n}; cannot normalize")
        if abs(n - 1.0) > _NORM_TOL:
            object.__setattr__(self, "w", self.w / n)
            object.__setattr__(self, "x", self.x / n)
            object.__setattr__(self, "y", self.y / n)
            object.__setattr__(self, "z", self.z / n)

    def norm(self) -> float:
        return math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)

    def conjugate(self) -> UnitQuaternion:
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def dot(self, other: UnitQuaternion) -> float:
        return self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z

    def multiply(self, other: UnitQuaternion) -> UnitQuaternion:
        """Hamilton product self * other (apply `other` first, then self)."""
        a, b = self, other
        return UnitQuaternion(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )

    def rotate(self, v: Vec3) -> Vec3:
        # q v q* expanded to avoid building intermediate quaternions.
        tx = 2.0 * (self.y * v.z - self.z * v.y)
        ty = 2.0 * (self.z * v.x - self.x * v.z)
        tz = 2.0 * (self.x * v.y - self.y * v.x)
        return Vec3(
            v.x + self.w * tx + (self.y * tz - self.z * ty),
            v.y + self.w * ty + (self.z * tx - self.x * tz),
            v.z + self.w * tz + (self.x * ty - self.y * tx),
        )

    def angle_to(self, other: UnitQuaternion) -> float:
        """Geodesic rotation angle between two orientations, in [0, pi]."""
        # atan2 form stays accurate near zero where acos(dot) loses ~1e-8.
        r = self.conjugate().multiply(other)
        vec = math.sqrt(r.x * r.x + r.y * r.y + r.z * r.z)
        return 2.0 * math.atan2(vec, abs(r.w))

    def to_matrix(self) -> list[list[float]]:
        """3x3 rotation matrix, row-major."""
        w, x, y, z = self.w, self.x, self.y, self.z
        return [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]

    @staticmethod
    def from_matrix(m: Sequence[Sequence[float]]) -> UnitQuaternion:
        """Quaternion for a 3x3 proper rotation matrix (row-major).

        Picks the largest diagonal pivot so the square root never sits near
        zero, then lets __post_init__ renormalize away matrix round-off.
        """
        t = m[0][0] + m[1][1] + m[2][2]
        if t > m[0][0] and t > m[1][1] and t > m[2][2]:
            s = math.sqrt(1.0 + t) * 2.0
            return UnitQuaternion(0.25 * s,
                                  (m[2][1] - m[1][2]) / s,
                                  (m[0][2] - m[2][0]) / s,
                                  (m[1][0] - m[0][1]) / s)
        if m[0][0] >= m[1][1] and m[0][0] >= m[2][2]:
            s = math.sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0
            return UnitQuaternion((m[2][1] - m[1][2]) / s,
                                  0.25 * s,
                                  (m[0][1] + m[1][0]) / s,
                                  (m[0][2] + m[2][0]) / s)
        if m[1][1] >= m[2][2]:
            s = math.sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0
            return UnitQuaternion((m[0][2] - m[2][0]) / s,
                                  (m[0][1] + m[1][0]) / s,
                                  0.25 * s,
                                  (m[1][2] + m[2][1]) / s)
        s = math.sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0
        return UnitQuaternion((m[1][0] - m[0][1]) / s,
                              (m[0][2] + m[2][0]) / s,
                              (m[1][2] + m[2][1]) / s,
                              0.25 * s)

    @staticmethod
    def identity() -> UnitQuaternion:
        return UnitQuaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis: Vec3, angle: float) -> UnitQuaternion:
        u = axis.normalized()
        half = 0.5 * angle
        s = math.sin(half)
        return UnitQuaternion(math.cos(half), u.x * s, u.y * s, u.z * s)

    @staticmethod
    def from_rpy(roll: float, pitch: float, yaw: float) -> UnitQuaternion:
        """Z·Y·X intrinsic convention: yaw about z, then pitch about y, then roll about x."""
        qz = UnitQuaternion.from_axis_angle(Vec3(0, 0, 1), yaw)
        qy = UnitQuaternion.from_axis_angle(Vec3(0, 1, 0), pitch)
        qx = UnitQuaternion.from_axis_angle(Vec3(1, 0, 0), roll)
        return qz.multiply(qy).multiply(qx)

    def to_rpy(self) -> tuple[float, float, float]:
        """Inverse of from_rpy: (roll, pitch, yaw) radians, Z·Y·X intrinsic."""
        w, x, y, z = self.w, self.x, self.y, self.z
        sin_pitch = -2.0 * (x * z - w * y)
        sin_pitch = max(-1.0, min(1.0, sin_pitch))
        pitch = math.asin(sin_pitch)
        if abs(sin_pitch) > 1.0 - 1e-12:
            # Gimbal lock: roll and yaw are degenerate; fold everything into yaw.
            roll = 0.0
            yaw = math.atan2(2.0 * (x * y - w * z), 1.0 - 2.0 * (y * y + z * z))
            if sin_pitch > 0:
                yaw = -yaw
        else:
            roll = math.atan2(2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y))
            yaw = math.atan2(2.0 * (x * y + w * z), 1.0 - 2.0 * (y * y + z * z))
        return roll, pitch, yaw


@dataclass(frozen=True)
class RigidTransform:
    rotation: UnitQuaternion = UnitQuaternion()
    translation: Vec3 = Vec3()

    @staticmethod
    def identity() -> RigidTransform:
        return RigidTransform()

    @staticmethod
    def from_parts(
        xyz: Sequence[float] = (0.0, 0.0, 0.0), rpy: Sequence[float] = (0.0, 0.0, 0.0)
    ) -> RigidTransform:
        return RigidTransform(
            UnitQuaternion.from_rpy(float(rpy[0]), float(rpy[1]), float(rpy[2])),
            Vec3.from_seq(xyz),
        )

    def to_list(self) -> list[float]:
        """Serialized form [tx, ty, tz, qw, qx, qy, qz]."""
        t, q = self.translation, self.rotation
        return [t.x, t.y, t.z, q.w, q.x, q.y, q.z]

    @staticmethod
    def from_list(values: Iterable[float]) -> RigidTransform:
        vals = [float(v) for v in values]
        if len(vals) != 7:
            raise ValueError(f"pose list must have 7 numbers, got {len(vals)}")
        tx, ty, tz, qw, qx, qy, qz = vals
        return RigidTransform(UnitQuaternion(qw, qx, qy, qz), Vec3(tx, ty, tz))


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """a ∘ b: apply b first, then a. Quaternion is renormalized to bound drift."""
    q = a.rotation.multiply(b.rotation)
    n = q.norm()
    if abs(n - 1.0) > 1e-15:
        q = UnitQuaternion(q.w / n, q.x / n, q.y / n, q.z / n)
    return RigidTransform(q, a.translation + a.rotation.rotate(b.translation))


def invert(t: RigidTransform) -> RigidTransform:
    qc = t.rotation.conjugate()
    return RigidTransform(qc, -qc.rotate(t.translation))


def interpolate(a: RigidTransform, b: RigidTransform, alpha: float) -> RigidTransform:
    """Shortest-arc slerp for rotation, lerp for translation; alpha must be in [0, 1]."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"interpolation parameter must be in [0, 1], got {alpha}")
    if alpha == 0.0:
        return a
    if alpha == 1.0:
        return b
    qa, qb = a.rotation, b.rotation
    dot = qa.dot(qb)
    if dot < 0.0:
        qb = UnitQuaternion(-qb.w, -qb.x, -qb.y, -qb.z)
        dot = -dot
    dot = min(1.0, dot)
    theta = math.acos(dot)
    if theta < 1e-12:
        q = UnitQuaternion(
            qa.w + (qb.w - qa.w) * alpha,
            qa.x + (qb.x - qa.x) * alpha,
            qa.y + (qb.y - qa.y) * alpha,
            qa.z + (qb.z - qa.z) * alpha,
        )
    else:
        s = math.sin(theta)
        ka = math.sin((1.0 - alpha) * theta) / s
        kb = math.sin(alpha * theta) / s
        q = UnitQuaternion(
            ka * qa.w + kb * qb.w,
            ka * qa.x + kb * qb.x,
            ka * qa.y + kb * qb.y,
            ka * qa.z + kb * qb.z,
        )
    lerped = a.translation + (b.translation - a.translation) * alpha
    return RigidTransform(q, lerped)


def transform_point(t: RigidTransform, p: Vec3) -> Vec3:
    return t.rotation.rotate(p) + t.translation
