"""Receding-horizon runtime around the trajectory optimizer.

Converts the observable vehicle quantities (position, velocity, attitude,
body rates, joint angles and rates) into the planner state, solves the
finite-horizon problem each tick with a shifted warm start, converts the
plan back into position/velocity setpoints through the door attachment,
and tracks them with a PD position / proportional attitude stand-in for
the robust position controller used on the real platform.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import constraints as cns
from . import kinematics as kin
from . import planner_model
from .ddp import OcpProblem, SolveResult, SolverSettings, solve
from .params import (
    ALPHA,
    ALPHA_DOT,
    ARM,
    ARM_RATE,
    N_INPUT,
    OMEGA,
    P_ALPHA,
    P_ALPHA_DOT,
    P_ARM,
    P_PHI,
    P_PHI_DOT,
    PHI,
    THRUST,
    TORQUE,
    ArmParams,
    DoorGeometry,
    VehicleParams,
    wrap_angle,
)

logger = logging.getLogger(__name__)

# attachment residual beyond which a measurement is flagged [m]
ATTACH_WARN = 0.05

# |sin(alpha)| band selecting which row of the rate formula is used
RATE_BRANCH_BAND = 0.1


@dataclass(frozen=True)
class Measurement:
    """Observable vehicle quantities (world frame unless noted)."""

    position: np.ndarray  # (3,) [m]
    velocity: np.ndarray  # (3,) [m/s]
    attitude: np.ndarray  # (3,) Euler [rad]
    body_rates: np.ndarray  # (3,) body frame [rad/s]
    joints: np.ndarray  # (4,) [rad]
    joint_rates: np.ndarray  # (4,) [rad/s]


@dataclass(frozen=True)
class Setpoint:
    """Position/velocity/yaw command handed to the tracking controller."""

    position: np.ndarray
    velocity: np.ndarray
    yaw: float
    joint_rates: np.ndarray


@dataclass
class TargetSpec:
    """Final desired planner state and the initial door state."""

    x_final: np.ndarray
    alpha0: float = 0.5 * np.pi
    alpha_rate0: float = 0.0

    def __post_init__(self):
        self.x_final = np.asarray(self.x_final, dtype=float)
        if self.x_final.shape != (9,):
            raise ValueError("x_final must be a 9-vector")


def _door_rate_rows(motion, alpha, geom: DoorGeometry):
    """Both row candidates for the door rate and their denominators.

    motion is the world-frame time derivative of (position + R @ d); the x
    row divides by -lever*sin(alpha), the y row by lever*cos(alpha).
    """
    den_x = -geom.lever * np.sin(alpha)
    den_y = geom.lever * np.cos(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        return motion[0] / den_x, motion[1] / den_y, den_x, den_y


def planner_state_from_measurement(
    m: Measurement, geom: DoorGeometry, arm: ArmParams
):
    """Recover the planner state from observables through the attachment.

    The door angle comes from the two-argument arctangent of the
    end-effector's world position relative to the hinge; the door rate from
    the time-differentiated attachment equation, using whichever row has a
    usable denominator. Warns (but still converts) when the attachment
    residual exceeds 5 cm.
    """
    R = kin.euler_to_rot(m.attitude)
    ee = kin.arm_fk(m.joints, arm).ee
    rel = m.position + R @ ee - geom.hinge
    alpha = float(np.arctan2(rel[1], rel[0]))

    residual = np.linalg.norm(
        rel - np.array([
            geom.lever * np.cos(alpha),
            geom.lever * np.sin(alpha),
            geom.contact_height,
        ])
    )
    if residual > ATTACH_WARN:
        logger.warning(
            "attachment residual %.3f m exceeds %.2f m: measurement dubious",
            residual,
            ATTACH_WARN,
        )

    ee_rate = R @ (np.cross(m.body_rates, ee)) + R @ kin.arm_tip_velocity(
        m.joints, m.joint_rates, arm
    )
    motion = m.velocity + ee_rate
    rate_x, rate_y, _, _ = _door_rate_rows(motion, alpha, geom)
    alpha_rate = rate_x if abs(np.sin(alpha)) > RATE_BRANCH_BAND else rate_y

    x = np.empty(9)
    x[PHI] = m.attitude
    x[ALPHA] = wrap_angle(alpha)
    x[ALPHA_DOT] = alpha_rate
    x[ARM] = m.joints
    return x


def setpoints_from_plan(states, inputs, geom: DoorGeometry, arm: ArmParams):
    """Position/velocity/yaw setpoints along a planned trajectory.

    One setpoint per node: positions from the attachment equation,
    velocities from its time derivative along the planned rates.
    """
    states = np.asarray(states, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    if states.ndim != 2 or inputs.ndim != 2 or inputs.shape[0] < 1:
        raise ValueError("expected stacked state and input trajectories")
    setpoints = []
    for i in range(states.shape[0]):
        x = states[i]
        u = inputs[min(i, inputs.shape[0] - 1)]
        phi, alpha, joints = x[PHI], x[ALPHA], x[ARM]
        pos = kin.vehicle_position_from_door(alpha, phi, joints, geom, arm)
        euler_rates = kin.euler_rate_matrix(phi) @ u[OMEGA]
        q_dot = np.append(euler_rates, x[ALPHA_DOT])
        J = kin.configuration_jacobians(np.append(phi, alpha), joints, geom, arm)
        ee_vel = kin.arm_tip_velocity(joints, u[ARM_RATE], arm)
        vel = J.translational @ q_dot - kin.euler_to_rot(phi) @ ee_vel
        setpoints.append(
            Setpoint(
                position=pos,
                velocity=vel,
                yaw=float(phi[2]),
                joint_rates=u[ARM_RATE].copy(),
            )
        )
    return setpoints


class TickResult(NamedTuple):
    """Outcome of one receding-horizon tick."""

    setpoint: Setpoint
    result: SolveResult
    planner_state: np.ndarray
    degraded: bool


class MpcController:
    """Receding-horizon wrapper owning the warm-start state.

    Each tick shifts the previous input sequence (and constraint
    multipliers) one step, re-solves from the measured state and emits the
    first future setpoint of the plan. On solver non-convergence the
    previous setpoint is re-emitted and the stored plan keeps shifting.
    """

    def __init__(
        self,
        target: TargetSpec,
        geom: DoorGeometry,
        arm: ArmParams,
        vehicle: VehicleParams,
        horizon: int = 20,
        dt: float = 0.05,
        q_diag=None,
        r_diag=None,
        terminal_diag=None,
        settings: Optional[SolverSettings] = None,
        use_constraints: bool = True,
        constraint_margin: float = 0.0,
    ):
        q_diag = np.array([5, 5, 3, 9, 8, 0.05, 0.1, 0.1, 0.1], dtype=float) \
            if q_diag is None else np.asarray(q_diag, dtype=float)
        r_diag = np.array([0.1, 5, 5, 13.5, 10, 10, 10, 10], dtype=float) \
            if r_diag is None else np.asarray(r_diag, dtype=float)
        terminal_diag = q_diag if terminal_diag is None else np.asarray(
            terminal_diag, dtype=float
        )
        u_ref = np.zeros(N_INPUT)
        u_ref[THRUST] = vehicle.hover_thrust
        self.u_ref = u_ref
        self.geom = geom
        self.arm = arm
        self.settings = settings if settings is not None else SolverSettings()
        # the planner sees the stack tightened by a small margin so the plant,
        # which deviates slightly from the plan, still clears the true rows
        self.constraint_margin = float(constraint_margin)
        self.problem = OcpProblem(
            horizon=horizon,
            dt=dt,
            dynamics=lambda x, u: planner_model.step(x, u, dt, geom),
            dynamics_jacobians=lambda x, u: planner_model.linearize(x, u, dt, geom),
            q_diag=q_diag,
            r_diag=r_diag,
            terminal_diag=terminal_diag,
            x_ref=target.x_final,
            u_ref=u_ref,
            constraints=(
                (lambda X: cns.stack_values(X, geom, arm) + self.constraint_margin)
                if use_constraints
                else None
            ),
            constraints_jacobian=(
                (lambda X: cns.stack_jacobian(X, geom, arm))
                if use_constraints
                else None
            ),
            n_constraints=cns.N_CONSTRAINTS if use_constraints else 0,
        )
        self._warm_inputs = None
        self._warm_multipliers = None
        self._warm_penalty = None
        self._last_setpoint = None

    def cold_inputs(self):
        """Reference-hold input sequence used when no warm start exists."""
        return np.tile(self.u_ref, (self.problem.horizon, 1))

    def _shift_warm(self, inputs, multipliers):
        shifted_u = np.vstack([inputs[1:], inputs[-1:]])
        if multipliers is None:
            return shifted_u, None
        shifted_lam = np.vstack([multipliers[1:], multipliers[-1:]])
        shifted_lam[0] = 0.0
        return shifted_u, shifted_lam

    def tick(self, measurement: Measurement) -> TickResult:
        x0 = planner_state_from_measurement(measurement, self.geom, self.arm)
        if self._warm_inputs is None:
            u_init = self.cold_inputs()
            lam, mu = None, None
        else:
            u_init = self._warm_inputs
            lam = self._warm_multipliers
            mu = self._warm_penalty
        result = solve(
            self.problem, x0, u_init, self.settings, multipliers=lam, penalty=mu
        )
        if result.converged or self._last_setpoint is None:
            setpoint = setpoints_from_plan(
                result.states, result.inputs, self.geom, self.arm
            )[1]
            degraded = not result.converged
            self._warm_inputs, self._warm_multipliers = self._shift_warm(
                result.inputs, result.multipliers
            )
            self._warm_penalty = result.penalty
            self._last_setpoint = setpoint
        else:
            # keep flying the previous plan, shifted one more step
            degraded = True
            setpoint = self._last_setpoint
            self._warm_inputs, self._warm_multipliers = self._shift_warm(
                self._warm_inputs, self._warm_multipliers
            )
        return TickResult(setpoint, result, x0, degraded)


@dataclass
class TrackingGains:
    """Gains of the stand-in PD tracking controller.

    The position loop is deliberately stiff (overdamped): the braking
    forces the plan needs are transmitted to the door through tracking
    error, so a soft loop lets the heavy door ring past the plan.
    """

    kp_pos: float = 100.0
    kd_pos: float = 25.0
    k_att: float = 900.0
    k_rate: float = 60.0
    tilt_max: float = 0.9  # [rad] cap on the commanded thrust tilt
    servo_rate_limit: float = 1.5  # [rad/s]


def _vee(S):
    return np.array([S[2, 1], S[0, 2], S[1, 0]])


def tracking_command(
    setpoint: Setpoint,
    m: Measurement,
    vehicle: VehicleParams,
    gains: Optional[TrackingGains] = None,
):
    """PD position law with a proportional attitude/rate inner loop.

    Returns (plant input, thrust_saturated). The desired force vector sets
    both the collective thrust (projected on the current body z) and the
    desired attitude (tilt toward the force, yaw from the setpoint).
    """
    if gains is None:
        gains = TrackingGains()
    force = vehicle.mass * (
        vehicle.gravity * kin.E3
        + gains.kp_pos * (setpoint.position - m.position)
        + gains.kd_pos * (setpoint.velocity - m.velocity)
    )
    # keep the commanded tilt inside the cone where the attitude loop is sane
    f_z = max(force[2], 0.2 * vehicle.mass * vehicle.gravity)
    f_xy = np.linalg.norm(force[0:2])
    max_xy = np.tan(gains.tilt_max) * f_z
    if f_xy > max_xy:
        force[0:2] *= max_xy / f_xy
    force[2] = f_z

    R = kin.euler_to_rot(m.attitude)
    thrust = float(force @ R[:, 2])
    saturated = not (0.0 <= thrust <= vehicle.thrust_max)
    thrust = float(np.clip(thrust, 0.0, vehicle.thrust_max))

    z_des = force / np.linalg.norm(force)
    yaw_dir = np.array([np.cos(setpoint.yaw), np.sin(setpoint.yaw), 0.0])
    y_des = np.cross(z_des, yaw_dir)
    y_des /= np.linalg.norm(y_des)
    x_des = np.cross(y_des, z_des)
    R_des = np.column_stack([x_des, y_des, z_des])
    att_err = 0.5 * _vee(R_des.T @ R - R.T @ R_des)
    torque = vehicle.inertia @ (-gains.k_att * att_err - gains.k_rate * m.body_rates)

    u = np.empty(N_INPUT)
    u[THRUST] = thrust
    u[TORQUE] = torque
    u[ARM_RATE] = np.clip(
        setpoint.joint_rates, -gains.servo_rate_limit, gains.servo_rate_limit
    )
    return u, saturated


def measurement_from_plant(
    x_plant, applied_joint_rates, geom: DoorGeometry, arm: ArmParams
) -> Measurement:
    """Synthesize the observable set from a plant state.

    The joint rates are the currently applied servo commands (the servos
    track rate commands directly).
    """
    x_plant = np.asarray(x_plant, dtype=float)
    phi = x_plant[P_PHI]
    q = np.append(phi, x_plant[P_ALPHA])
    q_dot = np.append(x_plant[P_PHI_DOT], x_plant[P_ALPHA_DOT])
    joints = x_plant[P_ARM]
    rates = np.asarray(applied_joint_rates, dtype=float)
    J = kin.configuration_jacobians(q, joints, geom, arm)
    R = kin.euler_to_rot(phi)
    velocity = J.translational @ q_dot - R @ kin.arm_tip_velocity(joints, rates, arm)
    return Measurement(
        position=kin.vehicle_position_from_door(q[3], phi, joints, geom, arm),
        velocity=velocity,
        attitude=phi.copy(),
        body_rates=J.rotational @ q_dot,
        joints=joints.copy(),
        joint_rates=rates.copy(),
    )
