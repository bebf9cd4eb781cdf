"""Hard state constraints: self-collision, door clearance, doorframe clearance.

All six rows are written as c(x) <= 0 feasible and depend only on the
attitude, door angle and arm joints of the planner state (never on rates).

Rows:
    0-2  z-components of the 3rd servo, 4th servo and end-effector in the
         body frame: the arm must stay below the airframe plane.
    3    the airframe disc (radius vehicle_radius, body XY plane) must not
         cross the door plane. With n_b the door normal expressed in the
         body frame and d the end-effector position, the worst point of the
         disc lies vehicle_radius * sqrt(n_bx^2 + n_by^2) toward the door,
         while the CoM stands off the plane by n_b . d:

             vehicle_radius * sqrt(n_bx^2 + n_by^2) - n_b . d <= 0

    4-5  the vehicle CoM must stay inside the doorway span along world y:
         vehicle_radius <= lever*sin(alpha) - d_world_y <= width - vehicle_radius.
"""

from dataclasses import dataclass

import numpy as np

from . import kinematics as kin
from .params import ALPHA, ARM, PHI, ArmParams, DoorGeometry

N_CONSTRAINTS = 6

ROW_LABELS = (
    "servo3_below_frame",
    "servo4_below_frame",
    "effector_below_frame",
    "door_clearance",
    "doorway_lower",
    "doorway_upper",
)

# central-difference step for the stack Jacobian
_JAC_STEP = 1e-6


def self_collision(joints, arm: ArmParams):
    """[s3_z, s4_z, ee_z]: feasible when the arm hangs below the airframe."""
    points = kin.arm_fk(joints, arm)
    return np.stack(
        [points.s3[..., 2], points.s4[..., 2], points.ee[..., 2]], axis=-1
    )


def door_clearance(phi, joints, alpha, geom: DoorGeometry, arm: ArmParams):
    """Signed clearance violation between the airframe disc and the door plane."""
    R = kin.euler_to_rot(phi)
    n_body = np.einsum("...ji,...j->...i", R, kin.door_normal(alpha))
    ee = kin.arm_fk(joints, arm).ee
    reach_along_normal = np.einsum("...i,...i->...", n_body, ee)
    disc = geom.vehicle_radius * np.hypot(n_body[..., 0], n_body[..., 1])
    return disc - reach_along_normal


def doorframe_clearance(phi, joints, alpha, geom: DoorGeometry, arm: ArmParams):
    """Two rows keeping the CoM inside the doorway span along world y."""
    R = kin.euler_to_rot(phi)
    ee_world = np.einsum("...ij,...j->...i", R, kin.arm_fk(joints, arm).ee)
    offset = geom.lever * np.sin(np.asarray(alpha, dtype=float)) - ee_world[..., 1]
    lower = geom.vehicle_radius - offset
    upper = offset - (geom.width - geom.vehicle_radius)
    return np.stack([lower, upper], axis=-1)


def stack_values(x, geom: DoorGeometry, arm: ArmParams):
    """All six constraint rows for planner states x, shape (..., 9) -> (..., 6)."""
    x = np.asarray(x, dtype=float)
    phi = x[..., PHI]
    alpha = x[..., ALPHA]
    joints = x[..., ARM]
    return np.concatenate(
        [
            self_collision(joints, arm),
            door_clearance(phi, joints, alpha, geom, arm)[..., None],
            doorframe_clearance(phi, joints, alpha, geom, arm),
        ],
        axis=-1,
    )


def stack_jacobian(x, geom: DoorGeometry, arm: ArmParams, h=_JAC_STEP):
    """d(stack)/d(state) by central differences, shape (..., 6, 9).

    Batched: perturbations along every state dimension are evaluated in a
    single vectorized call. Rate columns come out identically zero.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    eye = np.eye(n)
    plus = x[..., None, :] + h * eye  # (..., 9, 9)
    minus = x[..., None, :] - h * eye
    c_plus = stack_values(plus, geom, arm)  # (..., 9, 6)
    c_minus = stack_values(minus, geom, arm)
    jac = (c_plus - c_minus) / (2.0 * h)
    return np.swapaxes(jac, -1, -2)


@dataclass
class ConstraintStack:
    """Evaluated constraint stack at one planner state."""

    values: np.ndarray  # (6,)
    jacobian: np.ndarray  # (6, 9)
    labels: tuple = ROW_LABELS

    @property
    def max_violation(self):
        return float(np.max(self.values))


def constraint_stack(x, geom: DoorGeometry, arm: ArmParams):
    """Values and Jacobian of all six rows at a single planner state."""
    return ConstraintStack(
        values=stack_values(x, geom, arm),
        jacobian=stack_jacobian(x, geom, arm),
    )
