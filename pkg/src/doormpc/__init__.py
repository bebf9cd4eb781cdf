"""Trajectory optimization and closed-loop simulation of a multirotor
aerial manipulator opening a hinged door.

A constrained differential-dynamic-programming MPC plans over reduced
coupled dynamics; the plan is executed against the full Lagrangian plant
with collision constraints enforced throughout.
"""

from .constraints import ConstraintStack, constraint_stack, stack_values
from .ddp import OcpProblem, SolveResult, SolverSettings, solve
from .params import ArmParams, DoorGeometry, VehicleParams, wrap_angle
from .runtime import (
    Measurement,
    MpcController,
    Setpoint,
    TargetSpec,
    TrackingGains,
    measurement_from_plant,
    planner_state_from_measurement,
    setpoints_from_plan,
    tracking_command,
)
from .scenario import (
    ConfigError,
    DivergenceError,
    RunLog,
    ScenarioConfig,
    load_config,
    read_log,
    run_scenario,
    write_log,
)

__version__ = "0.1.0"

__all__ = [
    "ArmParams",
    "ConfigError",
    "ConstraintStack",
    "DivergenceError",
    "DoorGeometry",
    "Measurement",
    "MpcController",
    "OcpProblem",
    "RunLog",
    "ScenarioConfig",
    "Setpoint",
    "SolveResult",
    "SolverSettings",
    "TargetSpec",
    "TrackingGains",
    "VehicleParams",
    "constraint_stack",
    "load_config",
    "measurement_from_plant",
    "planner_state_from_measurement",
    "read_log",
    "run_scenario",
    "setpoints_from_plan",
    "solve",
    "stack_values",
    "tracking_command",
    "wrap_angle",
    "write_log",
]
