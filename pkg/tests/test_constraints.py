import numpy as np
from numpy.testing import assert_allclose

from doormpc import constraints as cns
from doormpc import kinematics as kin
from doormpc.params import ALPHA, ALPHA_DOT, ARM, ArmParams
from util import TARGET_ARM, random_attitude, random_planner_state, rel_err


def scenario_start_state():
    """Level attitude, quarter-open door, arm stretched to the target pose."""
    x = np.zeros(9)
    x[ALPHA] = np.pi / 2
    x[ARM] = TARGET_ARM
    return x


class TestSelfCollision:
    def test_target_pose_feasible(self, arm):
        values = cns.self_collision(TARGET_ARM, arm)
        assert np.all(values < 0.0)
        # stretched pose keeps all three points at the mount depth
        assert_allclose(values, -(arm.link_lengths[0] + arm.mount_offset) * np.ones(3))

    def test_folded_up_violates(self, arm):
        values = cns.self_collision([0.0, np.pi, -np.pi / 2, 0.0], arm)
        assert np.max(values) > 0.0

    def test_base_yaw_invariance(self, arm, rng):
        for _ in range(50):
            joints = rng.uniform(-1.5, 1.5, 4)
            base = cns.self_collision(joints, arm)
            spun = joints.copy()
            spun[0] += rng.uniform(-np.pi, np.pi)
            assert_allclose(cns.self_collision(spun, arm), base, atol=1e-15)


class TestDoorClearance:
    def test_level_quarter_open_needs_forward_reach(self, geom, arm):
        """Facing the quarter-open door level, the tip must stick out at
        least the airframe radius."""
        phi = np.zeros(3)
        value = cns.door_clearance(phi, TARGET_ARM, np.pi / 2, geom, arm)
        reach = np.sum(arm.link_lengths[1:])
        assert_allclose(value, geom.vehicle_radius - reach, atol=1e-14)
        assert value < 0.0
        # arm folded in: the airframe cannot clear the door plane
        folded = cns.door_clearance(phi, [0.0, 0.0, -np.pi / 2, 0.0], np.pi / 2, geom, arm)
        assert folded > 0.0

    def test_degenerate_arm_always_violates(self, geom):
        no_arm = ArmParams(link_lengths=np.zeros(4), mount_offset=0.0)
        for alpha in (0.0, 0.9, -2.0):
            value = cns.door_clearance(np.zeros(3), np.zeros(4), alpha, geom, no_arm)
            assert value > 0.0
            assert_allclose(value, geom.vehicle_radius, atol=1e-14)

    def test_against_sampled_disc_maximization(self, geom, arm, rng):
        """Closed form equals the brute-force max of the disc-rim projection."""
        thetas = np.linspace(0.0, 2 * np.pi, 720, endpoint=False)
        rim = np.stack([np.cos(thetas), np.sin(thetas), np.zeros_like(thetas)], axis=-1)
        for _ in range(50):
            phi = random_attitude(rng)
            alpha = rng.uniform(-np.pi, np.pi)
            joints = rng.uniform(-1.5, 1.5, 4)
            R = kin.euler_to_rot(phi)
            n_body = R.T @ kin.door_normal(alpha)
            brute = geom.vehicle_radius * np.max(rim @ n_body) - n_body @ kin.arm_fk(
                joints, arm
            ).ee
            value = cns.door_clearance(phi, joints, alpha, geom, arm)
            assert abs(value - brute) < 1e-3

    def test_yaw_door_corotation_invariance(self, geom, arm, rng):
        for _ in range(50):
            phi = random_attitude(rng)
            alpha = rng.uniform(-np.pi, np.pi)
            joints = rng.uniform(-1.5, 1.5, 4)
            delta = rng.uniform(-np.pi, np.pi)
            shifted = phi + [0.0, 0.0, delta]
            assert_allclose(
                cns.door_clearance(shifted, joints, alpha + delta, geom, arm),
                cns.door_clearance(phi, joints, alpha, geom, arm),
                atol=1e-12,
            )


class TestDoorframeClearance:
    def test_quarter_open_margins(self, geom):
        """lever 0.8 inside [0.35, 0.85]: feasible with 0.05 upper margin."""
        no_arm = ArmParams(link_lengths=np.zeros(4), mount_offset=0.0)
        rows = cns.doorframe_clearance(np.zeros(3), np.zeros(4), np.pi / 2, geom, no_arm)
        assert_allclose(rows, [0.35 - 0.8, 0.8 - 0.85], atol=1e-14)
        assert np.all(rows <= 0.0)

    def test_active_lower_boundary(self, geom):
        no_arm = ArmParams(link_lengths=np.zeros(4), mount_offset=0.0)
        alpha = np.arcsin(geom.vehicle_radius / geom.lever)
        rows = cns.doorframe_clearance(np.zeros(3), np.zeros(4), alpha, geom, no_arm)
        assert abs(rows[0]) < 1e-12

    def test_upper_violation_when_tip_swings_negative_y(self, geom, arm):
        """Yawing the stretched arm toward -y pushes the CoM past the far jamb."""
        phi = np.array([0.0, 0.0, -np.pi / 2])
        rows = cns.doorframe_clearance(phi, TARGET_ARM, np.pi / 2, geom, arm)
        offset = geom.lever + np.sum(arm.link_lengths[1:])
        assert_allclose(rows[1], offset - (geom.width - geom.vehicle_radius), atol=1e-12)
        assert rows[1] > 0.0


class TestStack:
    def test_feasible_interior_at_scenario_start(self, geom, arm):
        values = cns.stack_values(scenario_start_state(), geom, arm)
        assert values.shape == (6,)
        assert np.all(values < 0.0)

    def test_jacobian_matches_finite_differences(self, geom, arm, rng):
        """Module Jacobian (h=1e-6) against an independent h=1e-5 stencil."""
        h = 1e-5
        for _ in range(30):
            x = random_planner_state(rng)
            J = cns.stack_jacobian(x, geom, arm)
            fd = np.empty((6, 9))
            for k in range(9):
                e = np.zeros(9)
                e[k] = h
                fd[:, k] = (
                    cns.stack_values(x + e, geom, arm)
                    - cns.stack_values(x - e, geom, arm)
                ) / (2 * h)
            assert rel_err(J, fd) < 1e-4

    def test_rate_column_identically_zero(self, geom, arm, rng):
        x = random_planner_state(rng, n=64)
        J = cns.stack_jacobian(x, geom, arm)
        assert np.all(J[..., ALPHA_DOT] == 0.0)

    def test_values_are_rate_independent(self, geom, arm, rng):
        x = random_planner_state(rng)
        y = x.copy()
        y[ALPHA_DOT] += 10.0
        assert_allclose(
            cns.stack_values(y, geom, arm), cns.stack_values(x, geom, arm)
        )

    def test_stack_object(self, geom, arm):
        stack = cns.constraint_stack(scenario_start_state(), geom, arm)
        assert stack.values.shape == (6,)
        assert stack.jacobian.shape == (6, 9)
        assert len(stack.labels) == 6
        assert stack.max_violation < 0.0

    def test_batched_matches_scalar(self, geom, arm, rng):
        X = random_planner_state(rng, n=17)
        batched = cns.stack_values(X, geom, arm)
        for i in range(17):
            assert_allclose(batched[i], cns.stack_values(X[i], geom, arm))
