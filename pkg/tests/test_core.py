import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    ANGLES,
    homogeneous,
    mat_rot_x,
    mat_rot_y,
    mat_rot_z,
    rigid_transforms,
    transform_as_matrix,
)
from teleopkit.core import (
    GripperSample,
    JointVector,
    PoseComponents,
    RigidTransform,
    TrackerSample,
    compose,
    compose_from,
    decompose_pose,
    default_model,
    invert,
    wrap_angle,
)
from teleopkit.errors import (
    DegenerateOrientationError,
    InvalidInputError,
    ShapeError,
)

IDENTITY = RigidTransform.identity()


def assert_close(t: RigidTransform, m: np.ndarray, tol=1e-9):
    np.testing.assert_allclose(transform_as_matrix(t), m, atol=tol)


class TestElementaryRotations:
    """Pin the quaternion-to-matrix path against hand-written matrices."""

    @given(ANGLES)
    def test_rot_z_matches_closed_form(self, a):
        assert_close(RigidTransform.from_rot_z(a), homogeneous(mat_rot_z(a), (0, 0, 0)))

    @given(ANGLES)
    def test_rot_y_matches_closed_form(self, a):
        assert_close(RigidTransform.from_rot_y(a), homogeneous(mat_rot_y(a), (0, 0, 0)))

    @given(ANGLES)
    def test_rot_x_matches_closed_form(self, a):
        assert_close(RigidTransform.from_rot_x(a), homogeneous(mat_rot_x(a), (0, 0, 0)))


class TestCompose:
    def test_identity_left(self):
        t = compose(RigidTransform.from_rot_z(0.3), RigidTransform.from_translation(1, 2, 3))
        assert transform_as_matrix(compose(IDENTITY, t)) == pytest.approx(
            transform_as_matrix(t)
        )

    def test_inverse_gives_identity(self):
        t = compose(RigidTransform.from_rot_z(0.3), RigidTransform.from_translation(1, 2, 3))
        assert_close(compose(t, invert(t)), np.eye(4))

    def test_rotz_then_translate_matches_matrix_oracle(self):
        # rotZ(pi/2) ∘ translate(1,0,0): translation lands on (0,1,0)
        got = compose(
            RigidTransform.from_rot_z(math.pi / 2),
            RigidTransform.from_translation(1, 0, 0),
        )
        expected = homogeneous(mat_rot_z(math.pi / 2), (0, 0, 0)) @ homogeneous(
            np.eye(3), (1, 0, 0)
        )
        assert_close(got, expected)
        assert got.translation == pytest.approx((0.0, 1.0, 0.0))

    def test_rejects_non_finite(self):
        with pytest.raises(InvalidInputError):
            RigidTransform((math.nan, 0, 0, 0), (0, 0, 0))
        with pytest.raises(InvalidInputError):
            RigidTransform((1, 0, 0, 0), (math.inf, 0, 0))

    @given(rigid_transforms(), rigid_transforms())
    def test_matches_homogeneous_product(self, a, b):
        assert_close(
            compose(a, b), transform_as_matrix(a) @ transform_as_matrix(b), tol=1e-9
        )

    @given(rigid_transforms(), rigid_transforms(), rigid_transforms())
    @settings(max_examples=200)
    def test_associative(self, a, b, c):
        left = transform_as_matrix(compose(compose(a, b), c))
        right = transform_as_matrix(compose(a, compose(b, c)))
        np.testing.assert_allclose(left, right, atol=1e-9)

    @given(rigid_transforms())
    def test_quaternion_stays_unit(self, t):
        w, x, y, z = compose(t, t).rotation
        assert abs(math.sqrt(w * w + x * x + y * y + z * z) - 1.0) < 1e-9


class TestInvert:
    def test_identity(self):
        assert_close(invert(IDENTITY), np.eye(4))

    def test_pure_translation(self):
        inv = invert(RigidTransform.from_translation(1, 2, 3))
        assert inv.translation == pytest.approx((-1.0, -2.0, -3.0))

    def test_matches_matrix_inverse_oracle(self):
        t = compose(RigidTransform.from_rot_z(0.3), RigidTransform.from_translation(1, 0, 0))
        assert_close(invert(t), np.linalg.inv(transform_as_matrix(t)))

    @given(rigid_transforms())
    def test_roundtrip_identity(self, t):
        assert_close(compose(t, invert(t)), np.eye(4))
        assert_close(compose(invert(t), t), np.eye(4))


class TestDecompose:
    def test_identity(self):
        c = decompose_pose(IDENTITY)
        assert (c.x, c.y, c.z, c.yaw, c.pitch, c.roll) == (0, 0, 0, 0, 0, 0)

    def test_single_axis_yaw_with_lift(self):
        t = compose(
            RigidTransform.from_rot_z(0.7), RigidTransform.from_translation(0, 0, 0.3)
        )
        c = decompose_pose(t)
        assert (c.x, c.y) == pytest.approx((0.0, 0.0))
        assert c.z == pytest.approx(0.3)
        assert (c.yaw, c.pitch, c.roll) == pytest.approx((0.7, 0.0, 0.0))

    def test_zyx_composition_recovers_angles(self):
        # oracle: Euler extraction from the hand-built Z-Y-X matrix product
        m = mat_rot_z(0.4) @ mat_rot_y(0.2) @ mat_rot_x(-0.1)
        psi = math.atan2(m[1][0], m[0][0])
        theta = math.asin(-m[2][0])
        phi = math.atan2(m[2][1], m[2][2])
        assert (psi, theta, phi) == pytest.approx((0.4, 0.2, -0.1))

        t = compose(
            compose(RigidTransform.from_rot_z(0.4), RigidTransform.from_rot_y(0.2)),
            RigidTransform.from_rot_x(-0.1),
        )
        c = decompose_pose(t)
        assert (c.yaw, c.pitch, c.roll) == pytest.approx((0.4, 0.2, -0.1))

    def test_gimbal_guard_raises_with_timestamp(self):
        t = RigidTransform.from_rot_y(math.pi / 2)
        with pytest.raises(DegenerateOrientationError) as exc:
            decompose_pose(t, timestamp=1.25)
        assert "1.25" in str(exc.value)

    @given(
        st.floats(-math.pi + 1e-3, math.pi - 1e-3),
        st.floats(-math.pi / 2 + 2e-3, math.pi / 2 - 2e-3),
        st.floats(-math.pi + 1e-3, math.pi - 1e-3),
    )
    def test_roundtrip_away_from_gimbal(self, yaw, pitch, roll):
        c = PoseComponents(0.0, 0.0, 0.0, yaw, pitch, roll)
        d = decompose_pose(compose_from(c), gimbal_guard=1e-3)
        assert (d.yaw, d.pitch, d.roll) == pytest.approx(
            (yaw, pitch, roll), abs=1e-9
        )

    @given(rigid_transforms())
    @settings(max_examples=300)
    def test_recompose_reproduces_rotation(self, t):
        try:
            c = decompose_pose(t, gimbal_guard=1e-3)
        except DegenerateOrientationError:
            return
        frob = np.linalg.norm(
            np.array(compose_from(c).rotation_matrix()) - np.array(t.rotation_matrix())
        )
        assert frob < 1e-9
        for a in (c.yaw, c.pitch, c.roll):
            assert -math.pi < a <= math.pi


class TestWrapAngle:
    def test_zero(self):
        assert wrap_angle(0.0) == 0.0

    def test_two_pi(self):
        assert wrap_angle(2 * math.pi) == 0.0

    def test_positive_overflow(self):
        # subtract-2pi-until-in-range: 3.5 - 2pi
        assert wrap_angle(3.5) == pytest.approx(3.5 - 2 * math.pi, abs=1e-12)
        assert wrap_angle(3.5) == pytest.approx(-2.7831853071795862, abs=1e-9)

    def test_boundary_maps_to_pi(self):
        assert wrap_angle(math.pi) == math.pi
        assert wrap_angle(-math.pi) == math.pi
        assert wrap_angle(3 * math.pi) == math.pi

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            wrap_angle(math.nan)

    @given(st.floats(-math.pi + 1e-9, math.pi), st.integers(-3, 3))
    def test_periodicity(self, a, n):
        assert wrap_angle(a + 2 * math.pi * n) == pytest.approx(a, abs=1e-9)
        assert -math.pi < wrap_angle(a + 2 * math.pi * n) <= math.pi


class TestSampleTypes:
    def test_tracker_sample_rejects_nan_timestamp(self):
        with pytest.raises(InvalidInputError):
            TrackerSample(math.nan, IDENTITY)

    def test_joint_vector_layout_mismatch(self):
        from teleopkit.core import check_same_layout

        a = JointVector((0.0, 1.0), "m/arm2")
        b = JointVector((0.0, 1.0, 2.0), "m/arm3")
        with pytest.raises(ShapeError):
            check_same_layout(a, b)

    def test_gripper_threshold(self):
        g = GripperSample(0.0, left=0.7, right=0.2)
        assert g.left_open and not g.right_open
        g2 = GripperSample(0.0, left=0.7, right=0.2, threshold=0.8)
        assert not g2.left_open

    def test_gripper_range_validated(self):
        with pytest.raises(InvalidInputError):
            GripperSample(0.0, left=1.5, right=0.0)


class TestRobotModel:
    def test_reference_cardinalities(self):
        m = default_model()
        assert len(m.group("left_arm")) == 7
        assert len(m.group("right_arm")) == 7
        assert len(m.group("left_gripper")) == 1
        assert len(m.group("right_gripper")) == 1
        assert len(m.group("torso")) == 3
        assert len(m.group("base")) == 3
        assert len(m.joints) == 22
        assert m.arm_gripper_count == 16

    def test_arm_indices_exclude_grippers(self):
        m = default_model()
        assert len(m.arm_indices) == 14
        assert 14 not in m.arm_indices and 15 not in m.arm_indices
