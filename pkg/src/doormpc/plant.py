"""Full coupled rigid-body dynamics of the vehicle-door mechanism.

The configuration vector is q = [roll, pitch, yaw, alpha]: with the
end-effector rigidly attached to the door, the vehicle position is a
function of q and the arm joints, so the Lagrangian of the whole mechanism
reduces to these four coordinates plus the kinematically driven joints.

    M(q, joints) q_ddot + C(q, q_dot) q_dot + G(q) = tau_q

with M assembled from the configuration Jacobians,

    M = Jt^T (m I) Jt + Jr^T I_A Jr + J_alpha^T I_door J_alpha,

C from the Christoffel symbols of M (dM/dq by central finite differences;
validated by the (dM/dt - 2C) skew-symmetry and energy-balance tests), and
G the gradient of the vehicle's gravitational potential. Joint rates are
taken to be slow, so their contribution to the kinetic energy is dropped.

This model is the simulation plant and the ground-truth oracle for the
reduced planning model.
"""

import numpy as np

from . import kinematics as kin
from .params import (
    ARM_RATE,
    N_PLANT_STATE,
    P_ALPHA,
    P_ALPHA_DOT,
    P_ARM,
    P_PHI,
    P_PHI_DOT,
    THRUST,
    TORQUE,
    ArmParams,
    DoorGeometry,
    VehicleParams,
    wrap_angle,
)

# central-difference step for dM/dq
_DM_STEP = 1e-6

# conditioning limit beyond which the mass matrix is treated as singular
COND_LIMIT = 1e12


class MassMatrixSingularError(RuntimeError):
    """Mass matrix conditioning exceeded the usable limit."""


def mass_matrix(q, joints, geom: DoorGeometry, arm: ArmParams, vehicle: VehicleParams):
    """Generalized mass matrix, shape (..., 4, 4). Symmetric positive definite."""
    J = kin.configuration_jacobians(q, joints, geom, arm)
    M = vehicle.mass * np.einsum("...ji,...jk->...ik", J.translational, J.translational)
    M += np.einsum(
        "...ji,jk,...kl->...il", J.rotational, vehicle.inertia, J.rotational
    )
    M[..., 3, 3] += geom.inertia
    return M


def mass_matrix_derivs(q, joints, geom, arm, vehicle, h=_DM_STEP):
    """dM/dq_k by central differences, shape (4, 4, 4) indexed [k, i, j]."""
    q = np.asarray(q, dtype=float)
    qs = np.repeat(q[None, :], 8, axis=0)
    for k in range(4):
        qs[2 * k, k] += h
        qs[2 * k + 1, k] -= h
    Ms = mass_matrix(qs, np.broadcast_to(joints, (8, 4)), geom, arm, vehicle)
    return (Ms[0::2] - Ms[1::2]) / (2.0 * h)


def coriolis_matrix(q, q_dot, joints, geom, arm, vehicle):
    """Coriolis/centrifugal matrix from the Christoffel symbols of M."""
    dM = mass_matrix_derivs(q, joints, geom, arm, vehicle)
    q_dot = np.asarray(q_dot, dtype=float)
    term1 = np.einsum("kij,k->ij", dM, q_dot)
    term2 = np.einsum("jik,k->ij", dM, q_dot)
    term3 = np.einsum("ijk,k->ij", dM, q_dot)
    return 0.5 * (term1 + term2 - term3)


def gravity_vector(q, joints, geom, arm, vehicle):
    """Gradient of the vehicle's gravitational potential w.r.t. q.

    The door swings in a horizontal plane, so the door coordinate never
    appears: the fourth entry is identically zero.
    """
    J = kin.configuration_jacobians(q, joints, geom, arm)
    return vehicle.mass * vehicle.gravity * J.translational[..., 2, :]


def generalized_forces(q, joints, u, geom, arm):
    """Thrust and body torque mapped into the configuration coordinates."""
    q = np.asarray(q, dtype=float)
    u = np.asarray(u, dtype=float)
    J = kin.configuration_jacobians(q, joints, geom, arm)
    R = kin.euler_to_rot(q[0:3])
    thrust_world = u[THRUST] * R[:, 2]
    return J.translational.T @ thrust_world + J.rotational.T @ u[TORQUE]


def state_derivative(x, u, geom, arm, vehicle, tau_ext=None):
    """Plant state derivative. tau_ext injects generalized disturbance forces."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    q = np.concatenate([x[P_PHI], [x[P_ALPHA]]])
    q_dot = np.concatenate([x[P_PHI_DOT], [x[P_ALPHA_DOT]]])
    joints = x[P_ARM]

    M = mass_matrix(q, joints, geom, arm, vehicle)
    if not np.all(np.isfinite(M)):
        raise MassMatrixSingularError("mass matrix is not finite")
    eigs = np.linalg.eigvalsh(M)
    if eigs[0] <= 0.0 or eigs[-1] / eigs[0] > COND_LIMIT:
        raise MassMatrixSingularError(
            f"mass matrix conditioning {eigs[-1] / max(eigs[0], 1e-300):.3e} "
            f"exceeds {COND_LIMIT:.0e}"
        )
    C = coriolis_matrix(q, q_dot, joints, geom, arm, vehicle)
    G = gravity_vector(q, joints, geom, arm, vehicle)
    tau = generalized_forces(q, joints, u, geom, arm)
    if tau_ext is not None:
        tau = tau + np.asarray(tau_ext, dtype=float)
    q_ddot = np.linalg.solve(M, tau - C @ q_dot - G)

    dx = np.empty(N_PLANT_STATE)
    dx[P_PHI] = q_dot[0:3]
    dx[P_ALPHA] = q_dot[3]
    dx[P_PHI_DOT] = q_ddot[0:3]
    dx[P_ALPHA_DOT] = q_ddot[3]
    dx[P_ARM] = u[ARM_RATE]
    return dx


def rk4(f, x, dt):
    """Classical fourth-order Runge-Kutta step of x_dot = f(x)."""
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step(x, u, dt, geom, arm, vehicle, tau_ext=None):
    """RK4 step of the plant under a zero-order-hold input; angles wrapped."""
    x_next = rk4(lambda s: state_derivative(s, u, geom, arm, vehicle, tau_ext), x, dt)
    x_next[P_PHI] = wrap_angle(x_next[P_PHI])
    x_next[P_ALPHA] = wrap_angle(x_next[P_ALPHA])
    return x_next


def energy(q, q_dot, joints, geom, arm, vehicle):
    """(kinetic, potential) energy of the mechanism.

    Kinetic energy uses vel = Jt q_dot (joint-rate terms dropped, matching
    the slow-servo assumption baked into the mass matrix); the potential is
    the vehicle's weight times its height from the door attachment.
    """
    q = np.asarray(q, dtype=float)
    q_dot = np.asarray(q_dot, dtype=float)
    J = kin.configuration_jacobians(q, joints, geom, arm)
    vel = J.translational @ q_dot
    body_rates = J.rotational @ q_dot
    kinetic = 0.5 * (
        vehicle.mass * vel @ vel
        + body_rates @ vehicle.inertia @ body_rates
        + geom.inertia * q_dot[3] ** 2
    )
    pos = kin.vehicle_position_from_door(q[3], q[0:3], joints, geom, arm)
    potential = vehicle.mass * vehicle.gravity * pos[2]
    return kinetic, potential
