"""Rotations, Euler-rate mappings, arm forward kinematics and the
vehicle-door kinematic coupling.

Every function broadcasts over leading axes, so a batch of N
configurations can be evaluated in one call (shape (N, 3) attitudes give
(N, 3, 3) rotation matrices, and so on). All angles are radians.
"""

from typing import NamedTuple

import numpy as np

from .params import ArmParams, DoorGeometry

# pitch margin below pi/2 at which the Euler-rate map is declared singular
PITCH_GUARD = 1e-3

E3 = np.array([0.0, 0.0, 1.0])


class SingularAttitudeError(ValueError):
    """Pitch too close to +-pi/2 for the Euler-rate map to be inverted."""


def euler_to_rot(phi):
    """Rotation matrix (body -> world) for ZYX Euler angles [roll, pitch, yaw]."""
    phi = np.asarray(phi, dtype=float)
    cr, sr = np.cos(phi[..., 0]), np.sin(phi[..., 0])
    cp, sp = np.cos(phi[..., 1]), np.sin(phi[..., 1])
    cy, sy = np.cos(phi[..., 2]), np.sin(phi[..., 2])
    R = np.empty(phi.shape[:-1] + (3, 3))
    R[..., 0, 0] = cy * cp
    R[..., 0, 1] = cy * sp * sr - sy * cr
    R[..., 0, 2] = cy * sp * cr + sy * sr
    R[..., 1, 0] = sy * cp
    R[..., 1, 1] = sy * sp * sr + cy * cr
    R[..., 1, 2] = sy * sp * cr - cy * sr
    R[..., 2, 0] = -sp
    R[..., 2, 1] = cp * sr
    R[..., 2, 2] = cp * cr
    return R


def rot_to_euler(R):
    """ZYX Euler angles [roll, pitch, yaw] of a rotation matrix."""
    R = np.asarray(R, dtype=float)
    pitch = np.arcsin(np.clip(-R[..., 2, 0], -1.0, 1.0))
    roll = np.arctan2(R[..., 2, 1], R[..., 2, 2])
    yaw = np.arctan2(R[..., 1, 0], R[..., 0, 0])
    return np.stack([roll, pitch, yaw], axis=-1)


def euler_rot_derivs(phi):
    """Rotation matrix and its partial derivatives w.r.t. each Euler angle.

    Returns (R, dR) with dR[..., k, :, :] = dR/dphi_k for k in
    (roll, pitch, yaw).
    """
    phi = np.asarray(phi, dtype=float)
    cr, sr = np.cos(phi[..., 0]), np.sin(phi[..., 0])
    cp, sp = np.cos(phi[..., 1]), np.sin(phi[..., 1])
    cy, sy = np.cos(phi[..., 2]), np.sin(phi[..., 2])
    R = euler_to_rot(phi)
    dR = np.zeros(phi.shape[:-1] + (3, 3, 3))
    # d/d roll
    dR[..., 0, 0, 1] = cy * sp * cr + sy * sr
    dR[..., 0, 0, 2] = -cy * sp * sr + sy * cr
    dR[..., 0, 1, 1] = sy * sp * cr - cy * sr
    dR[..., 0, 1, 2] = -sy * sp * sr - cy * cr
    dR[..., 0, 2, 1] = cp * cr
    dR[..., 0, 2, 2] = -cp * sr
    # d/d pitch
    dR[..., 1, 0, 0] = -cy * sp
    dR[..., 1, 0, 1] = cy * cp * sr
    dR[..., 1, 0, 2] = cy * cp * cr
    dR[..., 1, 1, 0] = -sy * sp
    dR[..., 1, 1, 1] = sy * cp * sr
    dR[..., 1, 1, 2] = sy * cp * cr
    dR[..., 1, 2, 0] = -cp
    dR[..., 1, 2, 1] = -sp * sr
    dR[..., 1, 2, 2] = -sp * cr
    # d/d yaw
    dR[..., 2, 0, 0] = -sy * cp
    dR[..., 2, 0, 1] = -sy * sp * sr - cy * cr
    dR[..., 2, 0, 2] = -sy * sp * cr + cy * sr
    dR[..., 2, 1, 0] = cy * cp
    dR[..., 2, 1, 1] = cy * sp * sr - sy * cr
    dR[..., 2, 1, 2] = cy * sp * cr + sy * sr
    return R, dR


def _check_pitch(phi):
    pitch = np.asarray(phi, dtype=float)[..., 1]
    if np.any(np.abs(pitch) >= np.pi / 2.0 - PITCH_GUARD):
        raise SingularAttitudeError(
            f"pitch within {PITCH_GUARD} rad of +-pi/2: Euler-rate map singular"
        )


def euler_rate_matrix(phi):
    """Map W with euler_rates = W @ body_rates. Raises near pitch +-pi/2."""
    _check_pitch(phi)
    phi = np.asarray(phi, dtype=float)
    cr, sr = np.cos(phi[..., 0]), np.sin(phi[..., 0])
    cp, sp = np.cos(phi[..., 1]), np.sin(phi[..., 1])
    tp = sp / cp
    W = np.zeros(phi.shape[:-1] + (3, 3))
    W[..., 0, 0] = 1.0
    W[..., 0, 1] = sr * tp
    W[..., 0, 2] = cr * tp
    W[..., 1, 1] = cr
    W[..., 1, 2] = -sr
    W[..., 2, 1] = sr / cp
    W[..., 2, 2] = cr / cp
    return W


def euler_rate_matrix_inv(phi):
    """Inverse map: body_rates = W_inv @ euler_rates (regular everywhere)."""
    phi = np.asarray(phi, dtype=float)
    cr, sr = np.cos(phi[..., 0]), np.sin(phi[..., 0])
    cp, sp = np.cos(phi[..., 1]), np.sin(phi[..., 1])
    Wi = np.zeros(phi.shape[:-1] + (3, 3))
    Wi[..., 0, 0] = 1.0
    Wi[..., 0, 2] = -sp
    Wi[..., 1, 1] = cr
    Wi[..., 1, 2] = sr * cp
    Wi[..., 2, 1] = -sr
    Wi[..., 2, 2] = cr * cp
    return Wi


def euler_rate_matrix_derivs(phi):
    """Partials (dW/droll, dW/dpitch); W has no yaw dependence."""
    _check_pitch(phi)
    phi = np.asarray(phi, dtype=float)
    cr, sr = np.cos(phi[..., 0]), np.sin(phi[..., 0])
    cp, sp = np.cos(phi[..., 1]), np.sin(phi[..., 1])
    tp = sp / cp
    dWr = np.zeros(phi.shape[:-1] + (3, 3))
    dWr[..., 0, 1] = cr * tp
    dWr[..., 0, 2] = -sr * tp
    dWr[..., 1, 1] = -sr
    dWr[..., 1, 2] = -cr
    dWr[..., 2, 1] = cr / cp
    dWr[..., 2, 2] = -sr / cp
    dWp = np.zeros(phi.shape[:-1] + (3, 3))
    dWp[..., 0, 1] = sr / cp**2
    dWp[..., 0, 2] = cr / cp**2
    dWp[..., 2, 1] = sr * sp / cp**2
    dWp[..., 2, 2] = cr * sp / cp**2
    return dWr, dWp


class ArmPoints(NamedTuple):
    """Body-frame positions of the 3rd servo, 4th servo and end-effector."""

    s3: np.ndarray
    s4: np.ndarray
    ee: np.ndarray


def _chain_angles(joints):
    """Absolute in-plane angles (from straight down) of links 2-4.

    The bracket between joints 2 and 3 adds a fixed +pi/2 elbow offset.
    """
    joints = np.asarray(joints, dtype=float)
    chi2 = joints[..., 1]
    chi3 = joints[..., 1] + joints[..., 2] + 0.5 * np.pi
    chi4 = chi3 + joints[..., 3]
    return chi2, chi3, chi4


def arm_fk(joints, arm: ArmParams):
    """Forward kinematics of the under-slung arm in the body frame."""
    joints = np.asarray(joints, dtype=float)
    l1, l2, l3, l4 = arm.link_lengths
    chi2, chi3, chi4 = _chain_angles(joints)
    base_z = -(arm.mount_offset + l1)
    x3 = l2 * np.sin(chi2)
    z3 = base_z - l2 * np.cos(chi2)
    x4 = x3 + l3 * np.sin(chi3)
    z4 = z3 - l3 * np.cos(chi3)
    xe = x4 + l4 * np.sin(chi4)
    ze = z4 - l4 * np.cos(chi4)
    c1, s1 = np.cos(joints[..., 0]), np.sin(joints[..., 0])

    def _lift(x, z):
        return np.stack([x * c1, x * s1, z], axis=-1)

    return ArmPoints(_lift(x3, z3), _lift(x4, z4), _lift(xe, ze))


def arm_jacobian(joints, arm: ArmParams):
    """d(end-effector position)/d(joint angles), body frame, shape (..., 3, 4)."""
    joints = np.asarray(joints, dtype=float)
    l1, l2, l3, l4 = arm.link_lengths
    chi2, chi3, chi4 = _chain_angles(joints)
    c1, s1 = np.cos(joints[..., 0]), np.sin(joints[..., 0])
    ee = arm_fk(joints, arm).ee
    dx2 = l2 * np.cos(chi2) + l3 * np.cos(chi3) + l4 * np.cos(chi4)
    dz2 = l2 * np.sin(chi2) + l3 * np.sin(chi3) + l4 * np.sin(chi4)
    dx3 = l3 * np.cos(chi3) + l4 * np.cos(chi4)
    dz3 = l3 * np.sin(chi3) + l4 * np.sin(chi4)
    dx4 = l4 * np.cos(chi4)
    dz4 = l4 * np.sin(chi4)
    J = np.empty(joints.shape[:-1] + (3, 4))
    # joint 1 spins the whole chain about body-z
    J[..., 0, 0] = -ee[..., 1]
    J[..., 1, 0] = ee[..., 0]
    J[..., 2, 0] = 0.0
    for col, (dx, dz) in enumerate([(dx2, dz2), (dx3, dz3), (dx4, dz4)], start=1):
        J[..., 0, col] = dx * c1
        J[..., 1, col] = dx * s1
        J[..., 2, col] = dz
    return J


def arm_tip_velocity(joints, joint_rates, arm: ArmParams):
    """Body-frame end-effector velocity induced by the joint rates."""
    J = arm_jacobian(joints, arm)
    return np.einsum("...ij,...j->...i", J, np.asarray(joint_rates, dtype=float))


def door_normal(alpha):
    """Unit normal of the door surface, pointing away from the vehicle."""
    alpha = np.asarray(alpha, dtype=float)
    return np.stack(
        [np.sin(alpha), -np.cos(alpha), np.zeros_like(alpha)], axis=-1
    )


def vehicle_position_from_door(alpha, phi, joints, geom: DoorGeometry, arm: ArmParams):
    """Vehicle CoM world position implied by the door attachment.

    P = hinge + [lever*cos(alpha), lever*sin(alpha), contact_height] - R @ d
    with d the body-frame end-effector position.
    """
    alpha = np.asarray(alpha, dtype=float)
    contact = np.stack(
        [
            geom.lever * np.cos(alpha),
            geom.lever * np.sin(alpha),
            np.broadcast_to(geom.contact_height, alpha.shape).copy(),
        ],
        axis=-1,
    )
    R = euler_to_rot(phi)
    ee = arm_fk(joints, arm).ee
    return geom.hinge + contact - np.einsum("...ij,...j->...i", R, ee)


class ConfigJacobians(NamedTuple):
    """Maps from configuration rates [euler_rates, alpha_dot] to task rates."""

    translational: np.ndarray  # (..., 3, 4): vel = J_t @ q_dot - R @ d_dot
    rotational: np.ndarray  # (..., 3, 4): body_rates = J_r @ q_dot
    door: np.ndarray  # (..., 4): alpha_dot = J_alpha @ q_dot


def configuration_jacobians(q, joints, geom: DoorGeometry, arm: ArmParams):
    """Jacobians of vehicle position, body rates and door angle w.r.t. q.

    q = [roll, pitch, yaw, alpha].
    """
    q = np.asarray(q, dtype=float)
    phi, alpha = q[..., 0:3], q[..., 3]
    _, dR = euler_rot_derivs(phi)
    ee = arm_fk(joints, arm).ee
    Jt = np.empty(q.shape[:-1] + (3, 4))
    # columns 0..2: -(dR/dphi_k) @ d;  column 3: lever * d(contact)/d(alpha)
    Jt[..., :, 0:3] = -np.einsum("...kij,...j->...ik", dR, ee)
    Jt[..., 0, 3] = -geom.lever * np.sin(alpha)
    Jt[..., 1, 3] = geom.lever * np.cos(alpha)
    Jt[..., 2, 3] = 0.0
    Jr = np.zeros(q.shape[:-1] + (3, 4))
    Jr[..., :, 0:3] = euler_rate_matrix_inv(phi)
    Ja = np.zeros(q.shape[:-1] + (4,))
    Ja[..., 3] = 1.0
    return ConfigJacobians(Jt, Jr, Ja)
