"""Geometric primitives, timestamped sample types, and the robot DoF model.

Rotations are stored as unit quaternions (w, x, y, z) and converted to Euler
angles only at decomposition boundaries, so long compose chains do not drift.
The Euler convention is intrinsic Z-Y-X (yaw, then pitch, then roll): it
matches the torso joint stack (yaw above pitch) and makes the planar heading
the first decomposed angle.  Every angle-valued output is wrapped to
(-pi, pi].

All types here are immutable values and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateOrientationError, InvalidInputError, ShapeError

TWO_PI = 2.0 * math.pi

# Pitch must stay this far (radians) below +/-pi/2 unless overridden.
DEFAULT_GIMBAL_GUARD = 1e-6


def wrap_angle(a: float) -> float:
    """Return the unique value in (-pi, pi] congruent to ``a`` modulo 2*pi."""
    if not math.isfinite(a):
        raise InvalidInputError(f"cannot wrap non-finite angle {a!r}")
    r = math.remainder(a, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True, slots=True)
class RigidTransform:
    """SE(3) element: unit quaternion (w, x, y, z) plus translation in meters.

    The constructor renormalizes the quaternion, so the unit-norm invariant
    holds within 1e-9 after every construction and composition.
    """

    rotation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        w, x, y, z = self.rotation
        tx, ty, tz = self.translation
        # norm2 is finite iff every quaternion component is; the translation
        # sum is NaN/inf iff some component is non-finite
        norm2 = w * w + x * x + y * y + z * z
        if not (math.isfinite(norm2) and math.isfinite(tx + ty + tz)):
            raise InvalidInputError("transform has non-finite components")
        if norm2 < 1e-24:
            raise InvalidInputError("zero-norm quaternion")
        if abs(norm2 - 1.0) > 1e-15:
            norm = math.sqrt(norm2)
            object.__setattr__(
                self, "rotation", (w / norm, x / norm, y / norm, z / norm)
            )
        if not (type(tx) is float and type(ty) is float and type(tz) is float):
            object.__setattr__(self, "translation", (float(tx), float(ty), float(tz)))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform()

    @staticmethod
    def from_translation(x: float, y: float, z: float) -> "RigidTransform":
        return RigidTransform(translation=(x, y, z))

    @staticmethod
    def from_rot_z(angle: float) -> "RigidTransform":
        h = 0.5 * angle
        return RigidTransform(rotation=(math.cos(h), 0.0, 0.0, math.sin(h)))

    @staticmethod
    def from_rot_y(angle: float) -> "RigidTransform":
        h = 0.5 * angle
        return RigidTransform(rotation=(math.cos(h), 0.0, math.sin(h), 0.0))

    @staticmethod
    def from_rot_x(angle: float) -> "RigidTransform":
        h = 0.5 * angle
        return RigidTransform(rotation=(math.cos(h), math.sin(h), 0.0, 0.0))

    def rotation_matrix(self) -> tuple[tuple[float, float, float], ...]:
        """3x3 rotation matrix as nested tuples (row-major)."""
        w, x, y, z = self.rotation
        xx, yy, zz = x * x, y * y, z * z
        xy, xz, yz = x * y, x * z, y * z
        wx, wy, wz = w * x, w * y, w * z
        return (
            (1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)),
            (2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)),
            (2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)),
        )

    def rotate_vector(
        self, v: tuple[float, float, float]
    ) -> tuple[float, float, float]:
        """Apply the rotation part to a 3-vector."""
        w, x, y, z = self.rotation
        vx, vy, vz = v
        # v' = v + 2*q_vec x (q_vec x v + w*v)
        cx = y * vz - z * vy + w * vx
        cy = z * vx - x * vz + w * vy
        cz = x * vy - y * vx + w * vz
        return (
            vx + 2.0 * (y * cz - z * cy),
            vy + 2.0 * (z * cx - x * cz),
            vz + 2.0 * (x * cy - y * cx),
        )

    def apply(self, p: tuple[float, float, float]) -> tuple[float, float, float]:
        """Transform a point: rotation then translation."""
        rx, ry, rz = self.rotate_vector(p)
        tx, ty, tz = self.translation
        return (rx + tx, ry + ty, rz + tz)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Product a∘b: apply ``b`` first, then ``a``."""
    aw, ax, ay, az = a.rotation
    bw, bx, by, bz = b.rotation
    rot = (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )
    rbx, rby, rbz = a.rotate_vector(b.translation)
    atx, aty, atz = a.translation
    return RigidTransform(rot, (rbx + atx, rby + aty, rbz + atz))


def invert(t: RigidTransform) -> RigidTransform:
    """Inverse transform: compose(t, invert(t)) is identity within 1e-9."""
    w, x, y, z = t.rotation
    conj = RigidTransform((w, -x, -y, -z))
    rx, ry, rz = conj.rotate_vector(t.translation)
    return RigidTransform(conj.rotation, (-rx, -ry, -rz))


@dataclass(frozen=True, slots=True)
class PoseComponents:
    """Decomposed pose: position (m) plus yaw/pitch/roll (rad) in (-pi, pi]."""

    x: float
    y: float
    z: float
    yaw: float
    pitch: float
    roll: float

    def __post_init__(self):
        # NaN/inf angles fail the range comparison; positions checked via sum
        if not (
            -math.pi < self.yaw <= math.pi
            and -math.pi < self.pitch <= math.pi
            and -math.pi < self.roll <= math.pi
        ):
            raise InvalidInputError(
                f"angles ({self.yaw!r}, {self.pitch!r}, {self.roll!r}) "
                "outside (-pi, pi]"
            )
        if not math.isfinite(self.x + self.y + self.z):
            raise InvalidInputError("pose position must be finite")


def decompose_pose(
    t: RigidTransform,
    gimbal_guard: float = DEFAULT_GIMBAL_GUARD,
    timestamp: float | None = None,
) -> PoseComponents:
    """Split a transform into (x, y, z, yaw, pitch, roll) under intrinsic Z-Y-X.

    Raises :class:`DegenerateOrientationError` when the pitch magnitude comes
    within ``gimbal_guard`` radians of pi/2, where yaw and roll are no longer
    separable.  ``timestamp`` is attached to the error so stream processors
    can name the offending sample.
    """
    qw, qx, qy, qz = t.rotation
    # only the five rotation-matrix entries the Z-Y-X extraction needs
    r20 = 2.0 * (qx * qz - qw * qy)
    sin_pitch = max(-1.0, min(1.0, -r20))
    pitch = math.asin(sin_pitch)
    if abs(pitch) >= math.pi / 2.0 - gimbal_guard:
        raise DegenerateOrientationError(
            f"pitch {pitch!r} within gimbal guard of +/-pi/2", timestamp
        )
    yaw = math.atan2(
        2.0 * (qx * qy + qw * qz), 1.0 - 2.0 * (qy * qy + qz * qz)
    )
    roll = math.atan2(
        2.0 * (qy * qz + qw * qx), 1.0 - 2.0 * (qx * qx + qy * qy)
    )
    # atan2 lands in [-pi, pi]; only the open lower boundary needs mapping
    if yaw <= -math.pi:
        yaw = math.pi
    if roll <= -math.pi:
        roll = math.pi
    x, y, z = t.translation
    return PoseComponents(x, y, z, yaw, pitch, roll)


def compose_from(c: PoseComponents) -> RigidTransform:
    """Rebuild the transform described by decomposed pose components."""
    hy, hp, hr = 0.5 * c.yaw, 0.5 * c.pitch, 0.5 * c.roll
    cy, sy = math.cos(hy), math.sin(hy)
    cp, sp = math.cos(hp), math.sin(hp)
    cr, sr = math.cos(hr), math.sin(hr)
    # qz(yaw) * qy(pitch) * qx(roll), expanded
    rot = (
        cy * cp * cr + sy * sp * sr,
        cy * cp * sr - sy * sp * cr,
        cy * sp * cr + sy * cp * sr,
        sy * cp * cr - cy * sp * sr,
    )
    return RigidTransform(rot, (c.x, c.y, c.z))


@dataclass(frozen=True, slots=True)
class TrackerSample:
    """One timestamped tracker pose (tracker frame expressed in world)."""

    timestamp: float
    pose: RigidTransform

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise InvalidInputError("tracker sample timestamp must be finite")


@dataclass(frozen=True, slots=True)
class JointSpec:
    """One robot joint: name, limits, and group tag."""

    name: str
    lower: float
    upper: float
    group: str  # left_arm | right_arm | left_gripper | right_gripper | torso | base


@dataclass(frozen=True)
class RobotModel:
    """Joint inventory for the target platform, grouped by subsystem.

    The reference platform is a 22-DoF wheeled bimanual humanoid: 7+7 arm
    joints, 1+1 grippers, a 3-DoF torso (lift, yaw, pitch), and a 3-DoF
    planar base.  The arm+gripper ordering (left arm, right arm, left
    gripper, right gripper) defines the joint-vector layout name.
    """

    name: str
    joints: tuple[JointSpec, ...]

    def group(self, tag: str) -> tuple[JointSpec, ...]:
        return tuple(j for j in self.joints if j.group == tag)

    @property
    def arm_gripper_joints(self) -> tuple[JointSpec, ...]:
        return (
            self.group("left_arm")
            + self.group("right_arm")
            + self.group("left_gripper")
            + self.group("right_gripper")
        )

    @property
    def arm_gripper_count(self) -> int:
        return len(self.arm_gripper_joints)

    @property
    def layout(self) -> str:
        return f"{self.name}/arm{self.arm_gripper_count}"

    @property
    def arm_indices(self) -> tuple[int, ...]:
        """Indices of arm joints (grippers excluded) within the layout."""
        return tuple(
            i
            for i, j in enumerate(self.arm_gripper_joints)
            if j.group in ("left_arm", "right_arm")
        )

    def arm_gripper_limits(self) -> tuple[tuple[float, float], ...]:
        return tuple((j.lower, j.upper) for j in self.arm_gripper_joints)

    def torso_limits(self) -> dict[str, tuple[float, float]]:
        lift, yaw, pitch = self.group("torso")
        return {
            "lift": (lift.lower, lift.upper),
            "yaw": (yaw.lower, yaw.upper),
            "pitch": (pitch.lower, pitch.upper),
        }


def default_model() -> RobotModel:
    """Reference 22-DoF model: 7+7 arm, 1+1 gripper, 3 torso, 3 base."""
    joints: list[JointSpec] = []
    for side in ("left", "right"):
        for i in range(1, 8):
            joints.append(JointSpec(f"{side}_arm_j{i}", -3.05, 3.05, f"{side}_arm"))
    joints.append(JointSpec("left_gripper", 0.0, 1.0, "left_gripper"))
    joints.append(JointSpec("right_gripper", 0.0, 1.0, "right_gripper"))
    joints.append(JointSpec("torso_lift", 0.0, 0.6, "torso"))
    joints.append(JointSpec("torso_yaw", -2.0, 2.0, "torso"))
    joints.append(JointSpec("torso_pitch", -1.2, 1.2, "torso"))
    joints.append(JointSpec("base_vx", -1.5, 1.5, "base"))
    joints.append(JointSpec("base_vy", -1.5, 1.5, "base"))
    joints.append(JointSpec("base_wz", -2.0, 2.0, "base"))
    return RobotModel("wheeled-bimanual-22", tuple(joints))


@dataclass(frozen=True, slots=True)
class JointVector:
    """Ordered arm+gripper joint values tied to a named layout.

    Arm joints are radians; gripper entries are normalized aperture in [0, 1].
    """

    values: tuple[float, ...]
    layout: str

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not _finite(*self.values):
            raise InvalidInputError("joint vector has non-finite values")

    def __len__(self) -> int:
        return len(self.values)


def check_same_layout(a: JointVector, b: JointVector) -> None:
    if a.layout != b.layout or len(a) != len(b):
        raise ShapeError(
            f"joint layout mismatch: {a.layout}[{len(a)}] vs {b.layout}[{len(b)}]"
        )


@dataclass(frozen=True, slots=True)
class JointSample:
    """One timestamped arm+gripper joint reading."""

    timestamp: float
    joints: JointVector

    def __post_init__(self):
        if not math.isfinite(self.timestamp):
            raise InvalidInputError("joint sample timestamp must be finite")


DEFAULT_GRIPPER_THRESHOLD = 0.5


@dataclass(frozen=True, slots=True)
class GripperSample:
    """Per-hand gripper state: continuous aperture plus thresholded binary.

    Aperture is normalized to [0, 1] (1 = fully open); the binary open/closed
    state is the aperture compared against ``threshold``.
    """

    timestamp: float
    left: float
    right: float
    threshold: float = DEFAULT_GRIPPER_THRESHOLD

    def __post_init__(self):
        if not _finite(self.timestamp, self.left, self.right, self.threshold):
            raise InvalidInputError("gripper sample has non-finite values")
        for name in ("left", "right"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise InvalidInputError(f"{name} aperture {v!r} outside [0, 1]")

    @property
    def left_open(self) -> bool:
        return self.left >= self.threshold

    @property
    def right_open(self) -> bool:
        return self.right >= self.threshold
