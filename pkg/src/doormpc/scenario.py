"""Scenario configuration, closed-loop execution and structured logging.

A scenario file is a single TOML tree holding the door geometry, vehicle
and arm parameters, cost weights, targets, solver settings and simulation
options. Every omitted optional field falls back to a documented default,
and every applied default is echoed to the module logger so no
configuration is silent.
"""

import json
import logging
import queue
import sys
import threading
import time as time_mod
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import constraints as cns
from . import plant
from .ddp import SolverSettings
from .kinematics import SingularAttitudeError
from .plant import MassMatrixSingularError
from .params import (
    ARM,
    ARM_RATE,
    N_INPUT,
    N_PLANNER_STATE,
    N_PLANT_STATE,
    P_ALPHA,
    P_ALPHA_DOT,
    P_ARM,
    ArmParams,
    DoorGeometry,
    VehicleParams,
)
from .runtime import (
    ATTACH_WARN,
    Measurement,
    MpcController,
    TargetSpec,
    TrackingGains,
    measurement_from_plant,
    tracking_command,
)

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Scenario file failed to parse or violated a parameter invariant."""


class DivergenceError(RuntimeError):
    """Closed-loop run aborted: plant diverged or the attachment broke."""


@dataclass
class ScenarioConfig:
    """Fully resolved scenario: parameters, weights, targets and options."""

    door: DoorGeometry
    vehicle: VehicleParams
    arm: ArmParams
    target: TargetSpec
    q_diag: np.ndarray
    r_diag: np.ndarray
    terminal_diag: np.ndarray
    solver: SolverSettings = field(default_factory=SolverSettings)
    gains: TrackingGains = field(default_factory=TrackingGains)
    horizon: int = 20
    dt: float = 0.05
    constraint_margin: float = 0.02
    duration: float = 30.0
    substeps: int = 10
    seed: int = 0
    disturbance_scale: float = 0.0
    attach_abort: float = 0.1
    mode: str = "stepped"

    def validate(self):
        self.door.validate()
        self.vehicle.validate()
        self.arm.validate()
        if self.q_diag.shape != (9,) or np.any(self.q_diag < 0):
            raise ConfigError("[cost] q_diag must be 9 non-negative values")
        if self.terminal_diag.shape != (9,) or np.any(self.terminal_diag < 0):
            raise ConfigError("[cost] terminal_diag must be 9 non-negative values")
        if self.r_diag.shape != (8,) or np.any(self.r_diag <= 0):
            raise ConfigError("[cost] r_diag must be 8 positive values")
        if self.horizon < 1 or self.dt <= 0:
            raise ConfigError("[solver] horizon and dt must be positive")
        if self.duration < 0 or self.substeps < 1:
            raise ConfigError("[sim] duration must be >= 0 and substeps >= 1")
        if self.mode not in ("stepped", "threaded"):
            raise ConfigError(f"[sim] unknown mode {self.mode!r}")
        return self


def _section(tree, name):
    sec = tree.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _require(sec, section, key, alias=""):
    if key not in sec:
        note = f" ({alias})" if alias else ""
        raise ConfigError(f"[{section}] missing required field '{key}'{note}")
    return sec[key]


def _get(sec, section, key, default):
    if key in sec:
        return sec[key]
    logger.info("config: [%s] %s defaulted to %r", section, key, default)
    return default


def load_config(path) -> ScenarioConfig:
    """Parse and validate a scenario file.

    Raises ConfigError with the offending section/field named, both on
    parse errors and on invariant violations.
    """
    try:
        with open(path, "rb") as handle:
            tree = tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"scenario file {path} failed to parse: {err}")

    door_sec = _section(tree, "door")
    door = DoorGeometry(
        hinge=np.asarray(_get(door_sec, "door", "hinge", [0.0, 0.0, 0.0]), float),
        lever=float(_get(door_sec, "door", "lever", 0.8)),
        contact_height=float(_get(door_sec, "door", "contact_height", 0.8)),
        width=float(_require(door_sec, "door", "width")),
        height=float(_require(door_sec, "door", "height")),
        inertia=float(_require(door_sec, "door", "inertia")),
        vehicle_radius=float(_get(door_sec, "door", "vehicle_radius", 0.35)),
    )

    veh_sec = _section(tree, "vehicle")
    vehicle = VehicleParams(
        mass=float(_require(veh_sec, "vehicle", "mass", alias="m_A")),
        gravity=float(_get(veh_sec, "vehicle", "gravity", 9.81)),
        inertia=np.diag(
            np.asarray(
                _get(veh_sec, "vehicle", "inertia_diag", [0.03, 0.03, 0.05]), float
            )
        ),
        thrust_max=float(_get(veh_sec, "vehicle", "thrust_max", 30.0)),
    )

    arm_sec = _section(tree, "arm")
    arm_kwargs = {
        "link_lengths": np.asarray(
            _get(arm_sec, "arm", "link_lengths", [0.077, 0.128, 0.124, 0.126]), float
        ),
        "mount_offset": float(_get(arm_sec, "arm", "mount_offset", 0.05)),
    }
    if "joint_limits" in arm_sec:
        arm_kwargs["joint_limits"] = np.asarray(arm_sec["joint_limits"], float)
    arm = ArmParams(**arm_kwargs)

    cost_sec = _section(tree, "cost")
    q_diag = np.asarray(_require(cost_sec, "cost", "q_diag", alias="Q"), float)
    r_diag = np.asarray(_require(cost_sec, "cost", "r_diag", alias="R"), float)
    terminal_diag = np.asarray(
        _get(cost_sec, "cost", "terminal_diag", list(q_diag)), float
    )

    tgt_sec = _section(tree, "target")
    x_final = np.asarray(_require(tgt_sec, "target", "x_final", alias="x_f"), float)
    if x_final.shape != (9,):
        raise ConfigError("[target] x_final must be a 9-vector")
    target = TargetSpec(
        x_final=x_final,
        alpha0=float(_get(tgt_sec, "target", "alpha0", 0.5 * np.pi)),
        alpha_rate0=float(_get(tgt_sec, "target", "alpha_rate0", 0.0)),
    )

    sol_sec = _section(tree, "solver")
    defaults = SolverSettings()
    solver = SolverSettings(
        max_outer=int(_get(sol_sec, "solver", "max_outer", defaults.max_outer)),
        max_inner=int(_get(sol_sec, "solver", "max_inner", defaults.max_inner)),
        mu_init=float(_get(sol_sec, "solver", "mu_init", defaults.mu_init)),
        mu_growth=float(_get(sol_sec, "solver", "mu_growth", defaults.mu_growth)),
        tol_constraint=float(
            _get(sol_sec, "solver", "tol_constraint", defaults.tol_constraint)
        ),
        tol_cost=float(_get(sol_sec, "solver", "tol_cost", defaults.tol_cost)),
        reg_init=float(_get(sol_sec, "solver", "reg_init", defaults.reg_init)),
        reg_min=float(_get(sol_sec, "solver", "reg_min", defaults.reg_min)),
        reg_max=float(_get(sol_sec, "solver", "reg_max", defaults.reg_max)),
    )
    horizon = int(_get(sol_sec, "solver", "horizon", 20))
    dt = float(_get(sol_sec, "solver", "dt", 0.05))
    constraint_margin = float(_get(sol_sec, "solver", "constraint_margin", 0.02))

    ctl_sec = _section(tree, "controller")
    gdef = TrackingGains()
    gains = TrackingGains(
        kp_pos=float(_get(ctl_sec, "controller", "kp_pos", gdef.kp_pos)),
        kd_pos=float(_get(ctl_sec, "controller", "kd_pos", gdef.kd_pos)),
        k_att=float(_get(ctl_sec, "controller", "k_att", gdef.k_att)),
        k_rate=float(_get(ctl_sec, "controller", "k_rate", gdef.k_rate)),
        tilt_max=float(_get(ctl_sec, "controller", "tilt_max", gdef.tilt_max)),
        servo_rate_limit=float(
            _get(ctl_sec, "controller", "servo_rate_limit", gdef.servo_rate_limit)
        ),
    )

    sim_sec = _section(tree, "sim")
    cfg = ScenarioConfig(
        door=door,
        vehicle=vehicle,
        arm=arm,
        target=target,
        q_diag=q_diag,
        r_diag=r_diag,
        terminal_diag=terminal_diag,
        solver=solver,
        gains=gains,
        horizon=horizon,
        dt=dt,
        constraint_margin=constraint_margin,
        duration=float(_get(sim_sec, "sim", "duration", 30.0)),
        substeps=int(_get(sim_sec, "sim", "substeps", 10)),
        seed=int(_get(sim_sec, "sim", "seed", 0)),
        disturbance_scale=float(_get(sim_sec, "sim", "disturbance_scale", 0.0)),
        attach_abort=float(_get(sim_sec, "sim", "attach_abort", 0.1)),
        mode=str(_get(sim_sec, "sim", "mode", "stepped")),
    )
    try:
        cfg.validate()
    except ValueError as err:
        raise ConfigError(str(err)) from err
    return cfg


# per-record column names (units in the suffix)
PLANT_COLS = [
    "plant_roll_rad", "plant_pitch_rad", "plant_yaw_rad", "plant_alpha_rad",
    "plant_roll_rate_rps", "plant_pitch_rate_rps", "plant_yaw_rate_rps",
    "plant_alpha_rate_rps",
    "plant_eta1_rad", "plant_eta2_rad", "plant_eta3_rad", "plant_eta4_rad",
]
PLANNER_COLS = [
    "planner_roll_rad", "planner_pitch_rad", "planner_yaw_rad",
    "planner_alpha_rad", "planner_alpha_rate_rps",
    "planner_eta1_rad", "planner_eta2_rad", "planner_eta3_rad", "planner_eta4_rad",
]
PRED_COLS = [c.replace("planner_", "pred_") for c in PLANNER_COLS]
INPUT_COLS = [
    "input_thrust_N", "input_torque_x_Nm", "input_torque_y_Nm", "input_torque_z_Nm",
    "input_eta1_rate_rps", "input_eta2_rate_rps", "input_eta3_rate_rps",
    "input_eta4_rate_rps",
]
CONSTRAINT_COLS = ["c_" + label for label in cns.ROW_LABELS]
SETPOINT_COLS = [
    "sp_x_m", "sp_y_m", "sp_z_m", "sp_vx_mps", "sp_vy_mps", "sp_vz_mps",
    "sp_yaw_rad",
    "sp_eta1_rate_rps", "sp_eta2_rate_rps", "sp_eta3_rate_rps", "sp_eta4_rate_rps",
]
STAT_COLS = ["iterations", "violation", "cost", "degraded"]
TIMING_COL = "solve_ms"


@dataclass
class RunLog:
    """Per-tick records of a closed-loop run (fixed-rate timestamps)."""

    time: np.ndarray
    plant: np.ndarray
    planner: np.ndarray
    predicted: np.ndarray
    setpoint: np.ndarray
    inputs: np.ndarray
    constraints: np.ndarray
    iterations: np.ndarray
    solve_ms: np.ndarray
    violation: np.ndarray
    cost: np.ndarray
    degraded: np.ndarray
    meta: Optional[dict] = None

    def __len__(self):
        return self.time.shape[0]


def initial_plant_state(cfg: ScenarioConfig):
    """Level attitude, configured door state, target arm pose, zero rates."""
    x = np.zeros(N_PLANT_STATE)
    x[P_ALPHA] = cfg.target.alpha0
    x[P_ALPHA_DOT] = cfg.target.alpha_rate0
    x[P_ARM] = cfg.target.x_final[ARM]
    return x


def build_controller(cfg: ScenarioConfig, use_constraints=True) -> MpcController:
    return MpcController(
        target=cfg.target,
        geom=cfg.door,
        arm=cfg.arm,
        vehicle=cfg.vehicle,
        horizon=cfg.horizon,
        dt=cfg.dt,
        q_diag=cfg.q_diag,
        r_diag=cfg.r_diag,
        terminal_diag=cfg.terminal_diag,
        settings=cfg.solver,
        use_constraints=use_constraints,
        constraint_margin=cfg.constraint_margin,
    )


def attachment_residual(m: Measurement, geom: DoorGeometry, arm: ArmParams):
    """Distance by which the measured pose violates the door attachment."""
    from . import kinematics as kin

    R = kin.euler_to_rot(m.attitude)
    rel = m.position + R @ kin.arm_fk(m.joints, arm).ee - geom.hinge
    alpha = np.arctan2(rel[1], rel[0])
    expected = np.array(
        [geom.lever * np.cos(alpha), geom.lever * np.sin(alpha), geom.contact_height]
    )
    return float(np.linalg.norm(rel - expected))


def _closed_loop(cfg: ScenarioConfig, tick_fn) -> RunLog:
    """Shared closed-loop body: tick_fn maps a Measurement to a TickResult."""
    n_ticks = int(round(cfg.duration / cfg.dt))
    n_records = n_ticks + 1
    rng = np.random.default_rng(cfg.seed)

    log = RunLog(
        time=np.arange(n_records) * cfg.dt,
        plant=np.empty((n_records, N_PLANT_STATE)),
        planner=np.empty((n_records, N_PLANNER_STATE)),
        predicted=np.empty((n_records, N_PLANNER_STATE)),
        setpoint=np.empty((n_records, 11)),
        inputs=np.empty((n_records, N_INPUT)),
        constraints=np.empty((n_records, cns.N_CONSTRAINTS)),
        iterations=np.empty(n_records, dtype=int),
        solve_ms=np.empty(n_records),
        violation=np.empty(n_records),
        cost=np.empty(n_records),
        degraded=np.empty(n_records, dtype=int),
        meta={
            "door": cfg.door,
            "arm": cfg.arm,
            "vehicle": cfg.vehicle,
            "x_final": cfg.target.x_final.copy(),
            "dt": cfg.dt,
        },
    )

    state = initial_plant_state(cfg)
    applied_rates = np.zeros(4)
    dt_sub = cfg.dt / cfg.substeps

    for i in range(n_records):
        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > 1e6:
            raise DivergenceError(
                f"plant state left the sane envelope at t={i * cfg.dt:.2f} s"
            )
        meas = measurement_from_plant(state, applied_rates, cfg.door, cfg.arm)
        residual = attachment_residual(meas, cfg.door, cfg.arm)
        if residual > cfg.attach_abort:
            raise DivergenceError(
                f"attachment residual {residual:.3f} m exceeded "
                f"{cfg.attach_abort} m at t={i * cfg.dt:.2f} s"
            )

        t_start = time_mod.perf_counter()
        try:
            tick = tick_fn(meas)
        except (SingularAttitudeError, MassMatrixSingularError) as err:
            raise DivergenceError(f"planning failed at t={i * cfg.dt:.2f} s: {err}")
        solve_ms = (time_mod.perf_counter() - t_start) * 1e3

        u, _ = tracking_command(tick.setpoint, meas, cfg.vehicle, cfg.gains)

        log.plant[i] = state
        log.planner[i] = tick.planner_state
        log.predicted[i] = tick.result.states[1]
        log.setpoint[i, 0:3] = tick.setpoint.position
        log.setpoint[i, 3:6] = tick.setpoint.velocity
        log.setpoint[i, 6] = tick.setpoint.yaw
        log.setpoint[i, 7:11] = tick.setpoint.joint_rates
        log.inputs[i] = u
        log.constraints[i] = cns.stack_values(tick.planner_state, cfg.door, cfg.arm)
        log.iterations[i] = tick.result.iterations
        log.solve_ms[i] = solve_ms
        log.violation[i] = tick.result.max_violation
        log.cost[i] = tick.result.cost
        log.degraded[i] = int(tick.degraded)

        if i == n_ticks:
            break
        tau_ext = None
        if cfg.disturbance_scale > 0.0:
            tau_ext = cfg.disturbance_scale * rng.uniform(-1.0, 1.0, size=4)
        try:
            for _ in range(cfg.substeps):
                m_sub = measurement_from_plant(state, applied_rates, cfg.door, cfg.arm)
                u, _ = tracking_command(tick.setpoint, m_sub, cfg.vehicle, cfg.gains)
                state = plant.rk4_step(
                    state, u, dt_sub, cfg.door, cfg.arm, cfg.vehicle, tau_ext
                )
        except MassMatrixSingularError as err:
            raise DivergenceError(
                f"plant integration failed at t={i * cfg.dt:.2f} s: {err}"
            )
        applied_rates = u[ARM_RATE]
    return log


def _run_stepped(cfg: ScenarioConfig) -> RunLog:
    controller = build_controller(cfg)
    return _closed_loop(cfg, controller.tick)


def _run_threaded(cfg: ScenarioConfig) -> RunLog:
    """Two-task mode: the solver runs in its own thread.

    Measurements and tick results cross between the plant task and the MPC
    task as immutable snapshots through single-slot queues; the rendezvous
    keeps the schedule lock-stepped so results are bit-identical to the
    stepped mode.
    """
    controller = build_controller(cfg)
    meas_q: queue.Queue = queue.Queue(maxsize=1)
    out_q: queue.Queue = queue.Queue(maxsize=1)

    def worker():
        while True:
            item = meas_q.get()
            if item is None:
                return
            out_q.put(controller.tick(item))

    thread = threading.Thread(target=worker, name="mpc", daemon=True)
    thread.start()

    def tick_fn(measurement):
        meas_q.put(measurement)
        return out_q.get()

    try:
        return _closed_loop(cfg, tick_fn)
    finally:
        meas_q.put(None)
        thread.join(timeout=5.0)


def run_scenario(cfg: ScenarioConfig) -> RunLog:
    """Run the configured closed loop and return the complete log.

    Raises DivergenceError (with the offending time) if the plant blows up
    or the rigid attachment assumption breaks beyond the configured bound.
    """
    if cfg.mode == "threaded":
        return _run_threaded(cfg)
    return _run_stepped(cfg)


def log_columns(include_timing=True):
    cols = (
        ["time_s"] + PLANT_COLS + PLANNER_COLS + PRED_COLS + SETPOINT_COLS
        + INPUT_COLS + CONSTRAINT_COLS + STAT_COLS
    )
    if include_timing:
        cols.append(TIMING_COL)
    return cols


def _record_values(log: RunLog, i, include_timing=True):
    floats = (
        [log.time[i]]
        + list(log.plant[i])
        + list(log.planner[i])
        + list(log.predicted[i])
        + list(log.setpoint[i])
        + list(log.inputs[i])
        + list(log.constraints[i])
    )
    vals = [float(v) for v in floats]
    vals += [
        int(log.iterations[i]),
        float(log.violation[i]),
        float(log.cost[i]),
        int(log.degraded[i]),
    ]
    if include_timing:
        vals.append(float(log.solve_ms[i]))
    return vals


def write_log(log: RunLog, path, fmt="csv", include_timing=True):
    """Write the run log as CSV or JSON lines.

    Floats are rendered with shortest-roundtrip repr, so a write -> read ->
    write cycle is byte-identical. include_timing=False omits the
    wall-clock solve-latency column, which is the only non-reproducible
    field; determinism comparisons use that mode.
    """
    path = str(path)
    cols = log_columns(include_timing)
    if fmt == "csv":
        lines = [",".join(cols)]
        for i in range(len(log)):
            lines.append(
                ",".join(repr(v) for v in _record_values(log, i, include_timing))
            )
        payload = "\n".join(lines) + "\n"
    elif fmt == "jsonl":
        lines = []
        for i in range(len(log)):
            record = dict(zip(cols, _record_values(log, i, include_timing)))
            lines.append(json.dumps(record))
        payload = "\n".join(lines) + "\n"
    else:
        raise ValueError(f"unknown log format {fmt!r} (use 'csv' or 'jsonl')")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(payload)


def read_log(path, fmt=None) -> RunLog:
    """Reload a written log. The in-memory meta block is not recoverable."""
    path = str(path)
    if fmt is None:
        fmt = "jsonl" if path.endswith((".jsonl", ".ndjson")) else "csv"
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        if fmt == "csv":
            header = handle.readline().strip().split(",")
            for line in handle:
                if line.strip():
                    rows.append(dict(zip(header, (float(v) for v in line.split(",")))))
        else:
            for line in handle:
                if line.strip():
                    rows.append(json.loads(line))
    if not rows:
        raise ValueError(f"log file {path} holds no records")
    include_timing = TIMING_COL in rows[0]

    def grab(names):
        return np.array([[row[c] for c in names] for row in rows])

    return RunLog(
        time=grab(["time_s"])[:, 0],
        plant=grab(PLANT_COLS),
        planner=grab(PLANNER_COLS),
        predicted=grab(PRED_COLS),
        setpoint=grab(SETPOINT_COLS),
        inputs=grab(INPUT_COLS),
        constraints=grab(CONSTRAINT_COLS),
        iterations=grab(["iterations"])[:, 0].astype(int),
        solve_ms=(
            grab([TIMING_COL])[:, 0] if include_timing else np.zeros(len(rows))
        ),
        violation=grab(["violation"])[:, 0],
        cost=grab(["cost"])[:, 0],
        degraded=grab(["degraded"])[:, 0].astype(int),
        meta=None,
    )


def scenario_with(cfg: ScenarioConfig, **overrides) -> ScenarioConfig:
    """Copy of the scenario with selected simulation fields replaced."""
    return replace(cfg, **overrides)
