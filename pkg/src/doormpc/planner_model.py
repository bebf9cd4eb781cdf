"""Reduced planning model used inside the trajectory optimizer.

Nine states [attitude, door angle, door rate, arm joints] driven by eight
inputs [thrust, commanded body rates, commanded joint rates]:

    attitude_dot = W(attitude) @ body_rates
    alpha_ddot   = gain(attitude, alpha) * thrust
    joints_dot   = joint_rates

The vehicle's own rotational and translational dynamics are dropped: the
onboard rate loop is assumed to track body-rate commands immediately and
the vehicle is treated as quasi-static in translation, so the only door
torque is the reaction of the tilted thrust vector transmitted through the
rigidly attached end-effector.
"""

import numpy as np

from . import kinematics as kin
from .params import (
    ALPHA,
    ALPHA_DOT,
    ARM,
    ARM_RATE,
    N_INPUT,
    N_PLANNER_STATE,
    OMEGA,
    PHI,
    THRUST,
    DoorGeometry,
    wrap_angle,
)


def door_accel_gain(phi, alpha, geom: DoorGeometry):
    """Door angular acceleration per unit thrust.

    gain = -(lever / inertia) * n_door(alpha) . (R(phi) @ e3).  The gravity
    part of the contact force is normal to e3's door-frame projection and
    drops out; a level vehicle therefore exerts no door torque.
    """
    R = kin.euler_to_rot(phi)
    n = kin.door_normal(alpha)
    thrust_dir = R[..., :, 2]
    return -(geom.lever / geom.inertia) * np.einsum(
        "...i,...i->...", n, thrust_dir
    )


def state_derivative(x, u, geom: DoorGeometry):
    """Continuous-time derivative of the planner state."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    W = kin.euler_rate_matrix(x[PHI])
    dx = np.empty(N_PLANNER_STATE)
    dx[PHI] = W @ u[OMEGA]
    dx[ALPHA] = x[ALPHA_DOT]
    dx[ALPHA_DOT] = door_accel_gain(x[PHI], x[ALPHA], geom) * u[THRUST]
    dx[ARM] = u[ARM_RATE]
    return dx


def step(x, u, dt, geom: DoorGeometry):
    """One explicit-Euler step of the planner dynamics; door angle wrapped."""
    x_next = np.asarray(x, dtype=float) + dt * state_derivative(x, u, geom)
    x_next[ALPHA] = wrap_angle(x_next[ALPHA])
    return x_next


def linearize(x, u, dt, geom: DoorGeometry):
    """Analytic Jacobians (A, B) of the Euler step w.r.t. state and input."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    phi, alpha = x[PHI], x[ALPHA]
    thrust = u[THRUST]
    omega = u[OMEGA]

    A = np.eye(N_PLANNER_STATE)
    B = np.zeros((N_PLANNER_STATE, N_INPUT))

    # attitude rows
    W = kin.euler_rate_matrix(phi)
    dWr, dWp = kin.euler_rate_matrix_derivs(phi)
    A[0:3, 0] += dt * (dWr @ omega)
    A[0:3, 1] += dt * (dWp @ omega)
    B[0:3, OMEGA] = dt * W

    # door angle integrates door rate
    A[ALPHA, ALPHA_DOT] = dt

    # door rate row: d(gain * thrust)
    R, dR = kin.euler_rot_derivs(phi)
    n = kin.door_normal(alpha)
    scale = -geom.lever / geom.inertia
    dgain_dphi = scale * np.einsum("i,kij,j->k", n, dR, kin.E3)
    dn_dalpha = np.array([np.cos(alpha), np.sin(alpha), 0.0])
    dgain_dalpha = scale * dn_dalpha @ R[:, 2]
    A[ALPHA_DOT, 0:3] = dt * thrust * dgain_dphi
    A[ALPHA_DOT, ALPHA] = dt * thrust * dgain_dalpha
    B[ALPHA_DOT, THRUST] = dt * scale * (n @ R[:, 2])

    # joint rows
    B[ARM, ARM_RATE] = dt * np.eye(4)
    return A, B
