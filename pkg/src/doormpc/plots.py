"""Post-run plots: per-state time histories and a top-down geometry view.

Each state panel shows the measured plant history (black), the one-step
MPC prediction (dashed red) and the target value (green), in degrees. The
top-down view draws the wall with its doorway gap, door positions over
time, the vehicle CoM path and the airframe disc at the final pose.
"""

import math
import os

import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure
from matplotlib.patches import Circle

from . import kinematics as kin
from .scenario import RunLog

RAD2DEG = 180.0 / math.pi

# (file stem, axis label, plant column, planner/predicted column, target index)
PANELS = [
    ("roll", "roll [deg]", 0, 0, 0),
    ("pitch", "pitch [deg]", 1, 1, 1),
    ("yaw", "yaw [deg]", 2, 2, 2),
    ("door_angle", "door angle [deg]", 3, 3, 3),
    ("door_rate", "door rate [deg/s]", 7, 4, 4),
    ("joint1", "joint 1 [deg]", 8, 5, 5),
    ("joint2", "joint 2 [deg]", 9, 6, 6),
    ("joint3", "joint 3 [deg]", 10, 7, 7),
    ("joint4", "joint 4 [deg]", 11, 8, 8),
]


def panel_specs(log: RunLog):
    """Per-panel (name, measured, predicted, target) series in degrees."""
    x_final = log.meta["x_final"]
    specs = []
    for stem, label, plant_col, pred_col, target_idx in PANELS:
        specs.append(
            {
                "name": stem,
                "label": label,
                "measured": log.plant[:, plant_col] * RAD2DEG,
                "predicted": log.predicted[:, pred_col] * RAD2DEG,
                "target": float(x_final[target_idx]) * RAD2DEG,
            }
        )
    return specs


def door_segment(geom, alpha):
    """Endpoints of the door panel in the world XY plane at opening alpha."""
    hinge = geom.hinge[0:2]
    tip = hinge + geom.width * np.array([np.cos(alpha), np.sin(alpha)])
    return hinge, tip


def _save(fig, path):
    FigureCanvasSVG(fig)
    fig.savefig(path, format="svg")


def _xy_figure(log: RunLog):
    geom = log.meta["door"]
    arm = log.meta["arm"]
    hinge = geom.hinge
    alphas = log.plant[:, 3]
    path = kin.vehicle_position_from_door(
        alphas, log.plant[:, 0:3], log.plant[:, 8:12], geom, arm
    )

    fig = Figure(figsize=(6, 6))
    ax = fig.add_subplot(111)
    # wall with the doorway gap along world y
    wall_y = geom.width * 1.5
    ax.plot([hinge[0], hinge[0]], [hinge[1] - wall_y, hinge[1]], color="0.4", lw=5)
    ax.plot(
        [hinge[0], hinge[0]],
        [hinge[1] + geom.width, hinge[1] + geom.width + wall_y],
        color="0.4",
        lw=5,
    )
    # door at several times
    n = len(log)
    for idx in sorted({0, n // 4, n // 2, 3 * n // 4, n - 1}):
        base, tip = door_segment(geom, alphas[idx])
        shade = 0.8 - 0.6 * idx / max(n - 1, 1)
        ax.plot([base[0], tip[0]], [base[1], tip[1]], color=str(shade), lw=3)
    ax.plot(path[:, 0], path[:, 1], "k-", lw=1, label="vehicle CoM")
    ax.add_patch(
        Circle(
            (path[-1, 0], path[-1, 1]),
            geom.vehicle_radius,
            fill=False,
            edgecolor="tab:blue",
            label="airframe disc",
        )
    )
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("top-down geometry")
    return fig


def emit_plots(log: RunLog, out_dir):
    """Write one SVG per state panel plus the top-down view.

    Returns the list of written paths. Requires the in-memory log (the
    meta block carries geometry and targets, which serialized logs drop).
    """
    if log.meta is None:
        raise ValueError("emit_plots needs an in-memory log with its meta block")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    t = log.time
    for panel in panel_specs(log):
        fig = Figure(figsize=(6, 3))
        ax = fig.add_subplot(111)
        ax.plot(t, panel["measured"], "k-", lw=1.2, label="measured")
        ax.plot(t, panel["predicted"], "r--", lw=1.0, label="predicted")
        ax.axhline(panel["target"], color="tab:green", lw=1.0, label="target")
        ax.set_xlabel("time [s]")
        ax.set_ylabel(panel["label"])
        ax.legend(loc="best", fontsize=8)
        path = os.path.join(out_dir, f"panel_{panel['name']}.svg")
        _save(fig, path)
        written.append(path)
    path = os.path.join(out_dir, "xy_topdown.svg")
    _save(_xy_figure(log), path)
    written.append(path)
    return written
