"""Physical parameters and state/input vector layouts.

Conventions used throughout the package: SI units, radians, world frame
z-up, ZYX Euler angles (R = Rz(yaw) @ Ry(pitch) @ Rx(roll)), body frame
centered at the vehicle's center of mass.

Planner state (9):  [roll, pitch, yaw, alpha, alpha_dot, eta1..eta4]
Planner input (8):  [thrust, omega_x, omega_y, omega_z, eta1_dot..eta4_dot]
Plant state (12):   [roll, pitch, yaw, alpha, roll_dot, pitch_dot, yaw_dot,
                     alpha_dot, eta1..eta4]
Plant input (8):    [thrust, torque_x, torque_y, torque_z, eta1_dot..eta4_dot]

alpha is the door opening angle about the vertical hinge axis, measured
counterclockwise from the world +x axis (viewed from above).
"""

from dataclasses import dataclass, field

import numpy as np

# planner state/input slices
PHI = slice(0, 3)
ALPHA = 3
ALPHA_DOT = 4
ARM = slice(5, 9)
N_PLANNER_STATE = 9

THRUST = 0
OMEGA = slice(1, 4)
ARM_RATE = slice(4, 8)
N_INPUT = 8

# plant state slices
P_PHI = slice(0, 3)
P_ALPHA = 3
P_PHI_DOT = slice(4, 7)
P_ALPHA_DOT = 7
P_ARM = slice(8, 12)
N_PLANT_STATE = 12

TORQUE = slice(1, 4)

TWO_PI = 2.0 * np.pi


def wrap_angle(x):
    """Wrap angles into (-pi, pi]. Works elementwise on arrays."""
    return np.pi - np.mod(np.pi - np.asarray(x), TWO_PI)


@dataclass
class DoorGeometry:
    """Hinged door and doorway geometry plus the vehicle's planform radius.

    Attributes:
        hinge: world position of the lower hinge point [m].
        lever: horizontal distance from the hinge axis to the end-effector
            contact point [m].
        contact_height: vertical offset of the contact point above the
            hinge point [m].
        width: door (and doorway) width [m].
        height: door height [m].
        inertia: door mass moment of inertia about the hinge axis [kg m^2].
        vehicle_radius: radius of the airframe disc, blades included, in the
            body XY plane [m].
    """

    hinge: np.ndarray = field(default_factory=lambda: np.zeros(3))
    lever: float = 0.8
    contact_height: float = 0.8
    width: float = 1.2
    height: float = 1.6
    inertia: float = 5.28
    vehicle_radius: float = 0.35

    def __post_init__(self):
        self.hinge = np.asarray(self.hinge, dtype=float)

    def validate(self):
        if self.lever <= 0.0:
            raise ValueError(f"door.lever must be positive, got {self.lever}")
        if self.inertia <= 0.0:
            raise ValueError(f"door.inertia must be positive, got {self.inertia}")
        if not 0.0 < self.vehicle_radius < 0.5 * self.width:
            raise ValueError(
                "vehicle_radius must lie in (0, width/2): "
                f"got {self.vehicle_radius} with width {self.width}"
            )
        if self.width <= 0.0 or self.height <= 0.0:
            raise ValueError("door.width and door.height must be positive")
        if self.hinge.shape != (3,):
            raise ValueError("door.hinge must be a 3-vector")


@dataclass
class VehicleParams:
    """Multirotor mass properties.

    mass [kg], gravity [m/s^2], inertia: 3x3 body inertia at the CoM
    [kg m^2], thrust_max [N] saturation used by the tracking controller.
    """

    mass: float = 0.6
    gravity: float = 9.81
    inertia: np.ndarray = field(default_factory=lambda: np.diag([0.03, 0.03, 0.05]))
    thrust_max: float = 30.0

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float)

    @property
    def hover_thrust(self):
        return self.mass * self.gravity

    def validate(self):
        if self.mass <= 0.0:
            raise ValueError(f"vehicle.mass (m_A) must be positive, got {self.mass}")
        if self.inertia.shape != (3, 3):
            raise ValueError("vehicle.inertia must be 3x3")
        if not np.allclose(self.inertia, self.inertia.T, atol=1e-12):
            raise ValueError("vehicle.inertia must be symmetric")
        if np.any(np.linalg.eigvalsh(self.inertia) <= 0.0):
            raise ValueError("vehicle.inertia must be positive definite")


@dataclass
class ArmParams:
    """Four-joint serial arm mounted under the airframe.

    Joint 1 rotates about body-z; joints 2-4 rotate about the (yawed)
    body-y axis. Link 1 runs straight down from the mount, and the bracket
    between joints 2 and 3 carries a fixed +pi/2 elbow offset, so the joint
    configuration (0, pi/2, -pi/2, 0) stretches links 2-4 horizontally
    forward while (0, 0, -pi/2, 0) folds them straight down.

    link_lengths l1..l4 [m]; mount_offset: mount depth below the CoM [m];
    joint_limits: (4, 2) lower/upper bounds [rad].
    """

    link_lengths: np.ndarray = field(
        default_factory=lambda: np.array([0.077, 0.128, 0.124, 0.126])
    )
    mount_offset: float = 0.05
    joint_limits: np.ndarray = field(
        default_factory=lambda: np.array([[-np.pi, np.pi]] * 4)
    )

    def __post_init__(self):
        self.link_lengths = np.asarray(self.link_lengths, dtype=float)
        self.joint_limits = np.asarray(self.joint_limits, dtype=float)

    @property
    def reach(self):
        """Upper bound on end-effector distance from the CoM."""
        return float(np.sum(self.link_lengths)) + abs(self.mount_offset)

    def validate(self):
        if self.link_lengths.shape != (4,) or np.any(self.link_lengths <= 0.0):
            raise ValueError("arm.link_lengths must be 4 positive values")
        if self.mount_offset < 0.0:
            raise ValueError("arm.mount_offset must be non-negative")
        if self.joint_limits.shape != (4, 2) or np.any(
            self.joint_limits[:, 0] >= self.joint_limits[:, 1]
        ):
            raise ValueError("arm.joint_limits must be 4 (lower < upper) pairs")

    def check_joints(self, angles):
        """True when every joint angle lies within its configured interval."""
        angles = np.asarray(angles)
        return bool(
            np.all(angles >= self.joint_limits[:, 0])
            and np.all(angles <= self.joint_limits[:, 1])
        )
