"""Shared samplers and oracle helpers for the test suite."""

import numpy as np

from doormpc import kinematics as kin
from doormpc import plant
from doormpc.params import (
    ALPHA,
    ALPHA_DOT,
    ARM,
    PHI,
    ArmParams,
    DoorGeometry,
    VehicleParams,
)

TARGET_ARM = np.array([0.0, np.pi / 2, -np.pi / 2, 0.0])
X_FINAL = np.array(
    [0.0, 0.0, -7 * np.pi / 18, np.pi / 9, 0.0, 0.0, np.pi / 2, -np.pi / 2, 0.0]
)


def rel_err(value, reference):
    """Max elementwise error normalized by the reference magnitude."""
    value = np.asarray(value, dtype=float)
    reference = np.asarray(reference, dtype=float)
    scale = max(1.0, float(np.max(np.abs(reference))))
    return float(np.max(np.abs(value - reference))) / scale


def random_attitude(rng, pitch_max=1.2, n=None):
    """Euler angles clear of the pitch singularity."""
    shape = (3,) if n is None else (n, 3)
    phi = rng.uniform(-np.pi, np.pi, size=shape)
    phi[..., 1] = rng.uniform(-pitch_max, pitch_max, size=shape[:-1] or None)
    phi[..., 0] = rng.uniform(-1.2, 1.2, size=shape[:-1] or None)
    return phi


def random_planner_state(rng, n=None):
    shape = (9,) if n is None else (n, 9)
    x = np.empty(shape)
    x[..., PHI] = random_attitude(rng, n=n)
    x[..., ALPHA] = rng.uniform(-np.pi, np.pi, size=shape[:-1] or None)
    x[..., ALPHA_DOT] = rng.uniform(-1.0, 1.0, size=shape[:-1] or None)
    x[..., ARM] = rng.uniform(-1.5, 1.5, size=shape[:-1] + (4,) if n else (4,))
    return x


def random_input(rng):
    u = rng.uniform(-2.0, 2.0, 8)
    u[0] = rng.uniform(0.0, 12.0)
    return u


def random_configuration(rng):
    """(q, q_dot, joints) for plant-level tests."""
    q = np.array(
        [
            rng.uniform(-0.5, 0.5),
            rng.uniform(-0.5, 0.5),
            rng.uniform(-np.pi, np.pi),
            rng.uniform(-np.pi, np.pi),
        ]
    )
    q_dot = rng.uniform(-1.0, 1.0, 4)
    joints = rng.uniform(-1.5, 1.5, 4)
    return q, q_dot, joints


def attitude_held_input(q, q_dot, joints, thrust, geom, arm, vehicle):
    """Body torque that freezes the attitude, plus the door response.

    Solves the configuration dynamics for [torque, alpha_ddot] under the
    requirement euler_accels = 0, mimicking a perfect attitude loop.
    Returns (plant input, alpha_ddot).
    """
    M = plant.mass_matrix(q, joints, geom, arm, vehicle)
    C = plant.coriolis_matrix(q, q_dot, joints, geom, arm, vehicle)
    G = plant.gravity_vector(q, joints, geom, arm, vehicle)
    J = kin.configuration_jacobians(q, joints, geom, arm)
    R = kin.euler_to_rot(q[0:3])
    rhs = J.translational.T @ (thrust * R[:, 2]) - C @ q_dot - G
    A = np.column_stack([J.rotational.T, -M[:, 3]])
    sol = np.linalg.solve(A, -rhs)
    u = np.zeros(8)
    u[0] = thrust
    u[1:4] = sol[0:3]
    return u, float(sol[3])


def free_flight_derivative(state, u, vehicle: VehicleParams):
    """Detached-vehicle dynamics for controller step-response tests.

    state = [position(3), velocity(3), attitude(3), body_rates(3)].
    """
    pos, vel, phi, omega = state[0:3], state[3:6], state[6:9], state[9:12]
    R = kin.euler_to_rot(phi)
    acc = -vehicle.gravity * kin.E3 + (u[0] / vehicle.mass) * R[:, 2]
    euler_rates = kin.euler_rate_matrix(phi) @ omega
    omega_dot = np.linalg.solve(
        vehicle.inertia, u[1:4] - np.cross(omega, vehicle.inertia @ omega)
    )
    return np.concatenate([vel, acc, euler_rates, omega_dot])
