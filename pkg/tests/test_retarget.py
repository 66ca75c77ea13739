import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import homogeneous, mat_rot_z, transform_as_matrix
from teleopkit.core import (
    PoseComponents,
    RigidTransform,
    TrackerSample,
    compose,
    decompose_pose,
    default_model,
)
from teleopkit.errors import (
    ConfigError,
    InvalidInputError,
    StreamOrderError,
    UnwrapAmbiguityError,
)
from teleopkit.retarget import (
    BaseVelocityCommand,
    CalibrationRecord,
    DeadbandGainConfig,
    FilterState,
    PlanarVelocityRaw,
    RetargetConfig,
    RetargetSession,
    YawRouting,
    alpha_from_cutoff,
    apply_deadband,
    calibrate_single_pose,
    lowpass_step,
    map_torso,
    planar_velocities,
    torso_referenced_pose,
)
from teleopkit.retarget import SaturationStats

IDENTITY = RigidTransform.identity()
LIMITS = default_model().torso_limits()


def tracker(t, pose):
    return TrackerSample(t, pose)


def translate(x, y, z):
    return RigidTransform.from_translation(x, y, z)


class TestCalibration:
    def test_identity_pair(self):
        rec = calibrate_single_pose(IDENTITY, IDENTITY)
        assert rec.method == "single_pose"
        np.testing.assert_allclose(transform_as_matrix(rec.t_cal), np.eye(4), atol=1e-12)

    def test_pure_translation_cancellation(self):
        rec = calibrate_single_pose(translate(0, 0, 1.6), IDENTITY)
        assert rec.t_cal.translation == pytest.approx((0.0, 0.0, -1.6))

    def test_matrix_oracle(self):
        neutral = compose(RigidTransform.from_rot_z(0.2), translate(0.1, 0, 1.5))
        reference = translate(0, 0, 0.9)
        rec = calibrate_single_pose(neutral, reference)
        oracle = transform_as_matrix(reference) @ np.linalg.inv(
            transform_as_matrix(neutral)
        )
        np.testing.assert_allclose(transform_as_matrix(rec.t_cal), oracle, atol=1e-9)
        # defining property: t_cal maps the neutral posture onto the reference
        np.testing.assert_allclose(
            transform_as_matrix(compose(rec.t_cal, neutral)),
            transform_as_matrix(reference),
            atol=1e-9,
        )


class TestLowpass:
    def test_alpha_one_is_passthrough(self):
        state = FilterState(alpha=1.0)
        s0 = tracker(0.0, compose(RigidTransform.from_rot_z(0.4), translate(1, 2, 3)))
        state, out = lowpass_step(state, s0)
        assert out is s0
        s1 = tracker(0.1, compose(RigidTransform.from_rot_z(0.5), translate(2, 2, 3)))
        state, out = lowpass_step(state, s1)
        np.testing.assert_allclose(
            transform_as_matrix(out.pose), transform_as_matrix(s1.pose), atol=1e-12
        )

    def test_half_alpha_position_average(self):
        state = FilterState(alpha=0.5)
        state, _ = lowpass_step(state, tracker(0.0, translate(0, 0, 0)))
        state, out = lowpass_step(state, tracker(0.1, translate(1, 0, 0)))
        assert out.pose.translation == pytest.approx((0.5, 0.0, 0.0))

    def test_constant_input_converges_geometric(self):
        # after n steps at constant input, remaining error is (1-alpha)^n
        alpha = 0.2
        target = translate(0.7, -0.3, 0.2)
        state = FilterState(alpha=alpha)
        state, _ = lowpass_step(state, tracker(0.0, translate(0, 0, 0)))
        out = None
        for i in range(1, 51):
            state, out = lowpass_step(state, tracker(i * 0.1, target))
        expected = tuple(0.8**50 * (0.0 - v) + v for v in (0.7, -0.3, 0.2))
        assert out.pose.translation == pytest.approx(expected, abs=1e-12)
        assert abs(out.pose.translation[0] - 0.7) < 1e-4

    def test_non_monotone_timestamp_rejected(self):
        state = FilterState(alpha=0.5)
        state, _ = lowpass_step(state, tracker(1.0, IDENTITY))
        with pytest.raises(StreamOrderError):
            lowpass_step(state, tracker(1.0, IDENTITY))

    def test_pi_jump_is_ambiguous(self):
        state = FilterState(alpha=1.0)
        state, _ = lowpass_step(state, tracker(0.0, IDENTITY))
        with pytest.raises(UnwrapAmbiguityError):
            lowpass_step(state, tracker(0.1, RigidTransform.from_rot_z(math.pi)))

    def test_smooth_crossing_of_pi_unwraps(self):
        # heading ramps through +pi without a seam in the filtered output
        state = FilterState(alpha=1.0)
        yaws = [3.10, 3.13, -3.12, -3.09]  # continuous turn, wrapped samples
        out = []
        for i, y in enumerate(yaws):
            state, filt = lowpass_step(state, tracker(i * 0.1, RigidTransform.from_rot_z(y)))
            out.append(decompose_pose(filt.pose).yaw)
        assert out == pytest.approx(yaws, abs=1e-12)
        assert state.input_euler_unwrapped[0] == pytest.approx(
            2 * math.pi - 3.09, abs=1e-12
        )

    def test_alpha_validation(self):
        with pytest.raises(InvalidInputError):
            FilterState(alpha=0.0)
        with pytest.raises(InvalidInputError):
            FilterState(alpha=1.5)

    def test_alpha_from_cutoff(self):
        a = alpha_from_cutoff(5.0, 30.0)
        assert a == pytest.approx(1.0 - math.exp(-2 * math.pi * 5.0 / 30.0))


class TestTorsoReferencedPose:
    def test_identity(self):
        c = torso_referenced_pose(CalibrationRecord(IDENTITY), tracker(0.0, IDENTITY))
        assert (c.x, c.y, c.z, c.yaw, c.pitch, c.roll) == (0, 0, 0, 0, 0, 0)

    def test_translation_sum(self):
        cal = CalibrationRecord(translate(0, 0, -1.6))
        c = torso_referenced_pose(cal, tracker(0.0, translate(0, 0, 1.9)))
        assert c.z == pytest.approx(0.3)
        assert (c.x, c.y, c.yaw, c.pitch, c.roll) == pytest.approx((0,) * 5)

    def test_matrix_oracle(self):
        cal = CalibrationRecord(RigidTransform.from_rot_z(0.1))
        filt = tracker(0.0, compose(RigidTransform.from_rot_z(0.2), translate(1, 0, 0)))
        c = torso_referenced_pose(cal, filt)
        m = homogeneous(mat_rot_z(0.1), (0, 0, 0)) @ transform_as_matrix(filt.pose)
        assert (c.x, c.y, c.z) == pytest.approx(tuple(m[:3, 3]), abs=1e-9)
        assert c.yaw == pytest.approx(math.atan2(m[1, 0], m[0, 0]), abs=1e-9)


class TestMapTorso:
    POSE = PoseComponents(0.0, 0.0, 0.35, 0.2, -0.1, 0.0)

    def test_direct_mapping(self):
        t = map_torso(self.POSE, LIMITS, YawRouting.TO_TORSO)
        assert (t.lift, t.yaw, t.pitch) == pytest.approx((0.35, 0.2, -0.1))

    def test_yaw_rerouted_to_base(self):
        t = map_torso(self.POSE, LIMITS, YawRouting.TO_BASE)
        assert (t.lift, t.yaw, t.pitch) == pytest.approx((0.35, 0.0, -0.1))

    def test_clamp_counts_saturation(self):
        stats = SaturationStats()
        pose = PoseComponents(0.0, 0.0, 2.0, 0.0, 0.0, 0.0)
        t = map_torso(pose, LIMITS, YawRouting.TO_TORSO, stats=stats)
        assert t.lift == 0.6
        assert stats.counts == {"torso_lift": 1}

    def test_offsets(self):
        t = map_torso(
            self.POSE, LIMITS, YawRouting.TO_TORSO, lift_offset=0.1, pitch_offset=0.05
        )
        assert t.lift == pytest.approx(0.45)
        assert t.pitch == pytest.approx(-0.05)


class TestPlanarVelocities:
    def test_linear_arithmetic(self):
        prev = PoseComponents(0.100, 0.0, 0.0, 0.0, 0.0, 0.0)
        curr = PoseComponents(0.102, 0.0, 0.0, 0.0, 0.0, 0.0)
        v = planar_velocities(prev, 0.0, curr, 0.02, YawRouting.TO_BASE)
        assert v.v_hx == pytest.approx(0.1)
        assert v.valid

    def test_heading_crossing_has_no_spike(self):
        prev = PoseComponents(0, 0, 0, 3.10, 0, 0)
        curr = PoseComponents(0, 0, 0, -3.10, 0, 0)
        v = planar_velocities(prev, 0.0, curr, 0.1, YawRouting.TO_BASE)
        # wrap(-6.20) = 2*pi - 6.20 = 0.0831853...; divided by dt
        assert v.omega_h == pytest.approx((2 * math.pi - 6.20) / 0.1)
        assert v.omega_h == pytest.approx(0.8318530717958605)

    def test_yaw_routed_to_torso_zeroes_omega(self):
        prev = PoseComponents(0, 0, 0, 0.5, 0, 0)
        curr = PoseComponents(0, 0, 0, 1.0, 0, 0)
        v = planar_velocities(prev, 0.0, curr, 0.1, YawRouting.TO_TORSO)
        assert v.omega_h == 0.0

    def test_non_positive_dt_rejected(self):
        p = PoseComponents(0, 0, 0, 0, 0, 0)
        with pytest.raises(StreamOrderError):
            planar_velocities(p, 1.0, p, 1.0, YawRouting.TO_BASE)

    def test_gap_invalidates(self):
        p0 = PoseComponents(0, 0, 0, 0, 0, 0)
        p1 = PoseComponents(5, 0, 0, 0, 0, 0)
        v = planar_velocities(p0, 0.0, p1, 1.0, YawRouting.TO_BASE, max_gap=0.5)
        assert not v.valid and v.reason == "gap"

    def test_constant_offset_cancels_bitwise(self):
        # positions on an encoder-like dyadic grid: differencing then is exact,
        # so a constant world offset leaves the velocities bit-identical
        rng = np.random.default_rng(7)
        q = 2.0**-16
        xs = np.round(rng.uniform(-2, 2, 50) / q) * q
        ys = np.round(rng.uniform(-2, 2, 50) / q) * q
        c = (np.round(0.77 / q) * q, np.round(-1.21 / q) * q)
        for i in range(1, 50):
            base_prev = PoseComponents(xs[i - 1], ys[i - 1], 0, 0, 0, 0)
            base_curr = PoseComponents(xs[i], ys[i], 0, 0, 0, 0)
            off_prev = PoseComponents(xs[i - 1] + c[0], ys[i - 1] + c[1], 0, 0, 0, 0)
            off_curr = PoseComponents(xs[i] + c[0], ys[i] + c[1], 0, 0, 0, 0)
            a = planar_velocities(base_prev, 0.0, base_curr, 0.02, YawRouting.TO_BASE)
            b = planar_velocities(off_prev, 0.0, off_curr, 0.02, YawRouting.TO_BASE)
            assert (a.v_hx, a.v_hy) == (b.v_hx, b.v_hy)


class TestDeadband:
    CFG = DeadbandGainConfig()

    def test_suppressed_inside_threshold(self):
        raw = PlanarVelocityRaw(0.004, 0.0, 0.0, valid=True)
        assert apply_deadband(raw, self.CFG).v_x == 0.0

    def test_passthrough_unchanged(self):
        raw = PlanarVelocityRaw(0.25, 0.0, 0.0, valid=True)
        assert apply_deadband(raw, self.CFG).v_x == 0.25

    def test_per_axis_with_gains(self):
        cfg = DeadbandGainConfig(0.01, 0.01, 0.08, 1.0, 2.0, 1.0)
        raw = PlanarVelocityRaw(0.004, 0.30, 0.05, valid=True)
        cmd = apply_deadband(raw, cfg)
        assert (cmd.v_x, cmd.v_y, cmd.omega_z) == (0.0, 0.60, 0.0)

    def test_invalid_source_yields_flagged_zero(self):
        raw = PlanarVelocityRaw(1.0, 1.0, 1.0, valid=False, reason="gap")
        cmd = apply_deadband(raw, self.CFG)
        assert cmd.is_zero and not cmd.source_valid

    def test_config_validation(self):
        with pytest.raises(InvalidInputError):
            DeadbandGainConfig(epsilon_x=-0.1)
        with pytest.raises(InvalidInputError):
            DeadbandGainConfig(gain_x=0.0)

    @given(
        st.floats(-5, 5, allow_nan=False),
        st.floats(0, 1, allow_nan=False),
        st.floats(0.1, 3, allow_nan=False),
    )
    @settings(max_examples=500)
    def test_law_zero_or_exact_gain(self, v, eps, k):
        cfg = DeadbandGainConfig(eps, eps, eps, k, k, k)
        cmd = apply_deadband(PlanarVelocityRaw(v, v, v, valid=True), cfg)
        assert cmd.v_x == 0.0 or cmd.v_x == k * v
        # odd symmetry, bitwise
        neg = apply_deadband(PlanarVelocityRaw(-v, -v, -v, valid=True), cfg)
        assert neg.v_x == -cmd.v_x

    @given(st.floats(-5, 5, allow_nan=False), st.floats(0, 1, allow_nan=False))
    def test_idempotent_under_unit_gain(self, v, eps):
        cfg = DeadbandGainConfig(eps, eps, eps, 1.0, 1.0, 1.0)
        once = apply_deadband(PlanarVelocityRaw(v, v, v, valid=True), cfg)
        twice = apply_deadband(
            PlanarVelocityRaw(once.v_x, once.v_y, once.omega_z, valid=True), cfg
        )
        assert (twice.v_x, twice.v_y, twice.omega_z) == (once.v_x, once.v_y, once.omega_z)


class TestSessionPipeline:
    def test_stationary_stream_commands_exact_zero(self):
        cfg = RetargetConfig(sample_rate_hz=30.0)
        session = RetargetSession(cfg)
        pose = compose(RigidTransform.from_rot_z(0.3), translate(0.5, -0.2, 1.5))
        for i in range(100):
            torso, cmd = session.step(tracker(i / 30.0, pose))
            assert (cmd.v_x, cmd.v_y, cmd.omega_z) == (0.0, 0.0, 0.0)
        assert session.stats.commanded_zero_fraction == 1.0

    def test_vertical_bob_decouples_from_base(self):
        cfg = RetargetConfig(sample_rate_hz=30.0)
        session = RetargetSession(cfg)
        alpha = cfg.effective_alpha
        filtered_z = None
        for i in range(200):
            t = i / 30.0
            z = 0.3 + 0.05 * math.sin(2 * math.pi * 0.5 * t)
            torso, cmd = session.step(tracker(t, translate(0.0, 0.0, z)))
            assert (cmd.v_x, cmd.v_y, cmd.omega_z) == (0.0, 0.0, 0.0)
            # lift follows the exponentially smoothed z
            filtered_z = z if filtered_z is None else filtered_z + alpha * (z - filtered_z)
            assert torso.lift == pytest.approx(filtered_z, abs=1e-12)

    def test_walk_converges_to_exponential_lag_oracle(self):
        # constant-velocity walk: commanded speed follows v*(1-(1-alpha)^n)
        v = 0.3
        rate = 30.0
        cfg = RetargetConfig(sample_rate_hz=rate)
        alpha = cfg.effective_alpha
        session = RetargetSession(cfg)
        for n in range(150):
            t = n / rate
            torso, cmd = session.step(tracker(t, translate(v * t, 0.0, 0.0)))
            if n == 0:
                assert cmd.is_zero and not cmd.source_valid
                continue
            expected = v * (1.0 - (1.0 - alpha) ** n)
            if abs(expected) > cfg.deadband.epsilon_x:
                assert cmd.v_x == pytest.approx(expected, abs=1e-9)
        assert abs(cmd.v_x - v) < 1e-6

    def test_first_sample_zero_command(self):
        session = RetargetSession(RetargetConfig())
        _, cmd = session.step(tracker(0.0, translate(3.0, 1.0, 1.4)))
        assert cmd.is_zero and not cmd.source_valid

    def test_exact_differencing_with_identity_filter(self):
        # alpha=1, eps=0, K=1 reduces the step to finite differencing
        cfg = RetargetConfig(
            alpha=1.0,
            deadband=DeadbandGainConfig(0.0, 0.0, 0.0, 1.0, 1.0, 1.0),
        )
        session = RetargetSession(cfg)
        dt = 1.0 / 30.0
        xs = [0.0, 0.013, 0.031, 0.031, 0.02]
        cmds = []
        for i, x in enumerate(xs):
            _, cmd = session.step(tracker(i * dt, translate(x, 0, 1.5)))
            cmds.append(cmd)
        for i in range(1, len(xs)):
            assert cmds[i].v_x == pytest.approx((xs[i] - xs[i - 1]) / dt, rel=1e-12)

    def test_differencing_follows_the_calibrated_frame(self):
        # a quarter-turn calibration maps tracker +x motion onto pose +y
        cfg = RetargetConfig(
            alpha=1.0,
            deadband=DeadbandGainConfig(0.0, 0.0, 0.0, 1.0, 1.0, 1.0),
            calibration=CalibrationRecord(RigidTransform.from_rot_z(math.pi / 2)),
        )
        session = RetargetSession(cfg)
        dt = 1.0 / 30.0
        for i in range(5):
            _, cmd = session.step(tracker(i * dt, translate(0.3 * i * dt, 0, 1.5)))
        assert cmd.v_x == pytest.approx(0.0, abs=1e-12)
        assert cmd.v_y == pytest.approx(0.3, rel=1e-9)

    def test_error_carries_sample_timestamp(self):
        session = RetargetSession(RetargetConfig())
        session.step(tracker(3.20, IDENTITY))
        with pytest.raises(StreamOrderError) as exc:
            session.step(tracker(3.15, IDENTITY))
        assert "3.15" in str(exc.value)


class TestConfigLoading:
    def test_toml_roundtrip(self, tmp_path):
        text = """
[session]
sample_rate_hz = 60.0
yaw_routing = "to_torso"

[calibration]
quaternion = [1.0, 0.0, 0.0, 0.0]
translation = [0.0, 0.0, -1.6]

[filter]
cutoff_hz = 4.0

[deadband]
epsilon = [0.02, 0.02, 0.1]
gain = [1.5, 1.5, 1.0]

[torso]
lift_offset = 0.1
lift_limits = [0.0, 0.5]

[action]
k = 8
"""
        p = tmp_path / "session.toml"
        p.write_text(text)
        cfg = RetargetConfig.from_file(p)
        assert cfg.sample_rate_hz == 60.0
        assert cfg.yaw_routing is YawRouting.TO_TORSO
        assert cfg.calibration.t_cal.translation == (0.0, 0.0, -1.6)
        assert cfg.deadband.gain_x == 1.5
        assert cfg.resolved_torso_limits()["lift"] == (0.0, 0.5)
        assert cfg.resolved_torso_limits()["yaw"] == LIMITS["yaw"]
        assert cfg.chunk_k == 8

    def test_json_accepted(self, tmp_path):
        p = tmp_path / "session.json"
        p.write_text('{"session": {"sample_rate_hz": 15.0}}')
        assert RetargetConfig.from_file(p).sample_rate_hz == 15.0

    def test_bad_file_raises_config_error(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            RetargetConfig.from_file(p)

    def test_bad_value_raises_config_error(self):
        with pytest.raises(ConfigError):
            RetargetConfig.from_dict({"session": {"yaw_routing": "sideways"}})

    def test_deadband_schedule(self):
        cfg = RetargetConfig.from_dict(
            {
                "deadband": {
                    "epsilon": [0.01, 0.01, 0.05],
                    "schedule": [{"start_s": 10.0, "epsilon": [0.05, 0.05, 0.2]}],
                }
            }
        )
        assert cfg.deadband_at(5.0).epsilon_x == 0.01
        assert cfg.deadband_at(12.0).epsilon_x == 0.05
