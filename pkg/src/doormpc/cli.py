"""Command-line entry points: run, check and bench a scenario file.

Exit codes: 0 success, 1 usage/configuration error, 2 divergence or
closed-loop non-convergence abort.
"""

import argparse
import logging
import os
import sys

import numpy as np

from .scenario import (
    ConfigError,
    DivergenceError,
    load_config,
    run_scenario,
    scenario_with,
    write_log,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser():
    parser = _Parser(
        prog="doormpc",
        description="Closed-loop door-opening simulation with a constrained-DDP MPC planner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser(
        "run", parents=[], help="run the closed loop and write logs"
    )
    run_p.add_argument("config", help="scenario TOML file")
    run_p.add_argument("--out", default="out", help="output directory")
    run_p.add_argument("--format", choices=["csv", "jsonl"], default="csv")
    run_p.add_argument("--seed", type=int, default=None, help="override [sim] seed")
    run_p.add_argument(
        "--duration", type=float, default=None, help="override [sim] duration [s]"
    )
    run_p.add_argument(
        "--plots", action="store_true", help="also write the SVG state panels"
    )

    check_p = sub.add_parser("check", help="validate a scenario file and exit")
    check_p.add_argument("config")

    bench_p = sub.add_parser(
        "bench", help="report the solve-latency distribution of a scenario"
    )
    bench_p.add_argument("config")
    bench_p.add_argument(
        "--duration", type=float, default=10.0, help="benchmark window [s]"
    )
    return parser


def _load(path):
    try:
        return load_config(path)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        raise SystemExit(1)


def _cmd_run(args):
    cfg = _load(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.duration is not None:
        overrides["duration"] = args.duration
    if overrides:
        cfg = scenario_with(cfg, **overrides)
    try:
        log = run_scenario(cfg)
    except DivergenceError as err:
        print(f"run aborted: {err}", file=sys.stderr)
        raise SystemExit(2)
    os.makedirs(args.out, exist_ok=True)
    ext = "csv" if args.format == "csv" else "jsonl"
    log_path = os.path.join(args.out, f"run.{ext}")
    write_log(log, log_path, fmt=args.format)
    print(f"wrote {len(log)} records to {log_path}")
    if args.plots:
        from .plots import emit_plots

        for path in emit_plots(log, args.out):
            print(f"wrote {path}")
    final_alpha = log.plant[-1, 3]
    print(
        f"final door angle {np.degrees(final_alpha):.1f} deg "
        f"(target {np.degrees(cfg.target.x_final[3]):.1f} deg), "
        f"max constraint value {np.max(log.constraints):.2e}, "
        f"degraded ticks {int(np.sum(log.degraded))}"
    )
    return 0


def _cmd_check(args):
    cfg = _load(args.config)
    print(
        "scenario ok: "
        f"door {cfg.door.width:.2f} x {cfg.door.height:.2f} m, "
        f"inertia {cfg.door.inertia:.2f} kg m^2, "
        f"vehicle {cfg.vehicle.mass:.2f} kg, "
        f"horizon {cfg.horizon} steps at {cfg.dt:.3f} s, "
        f"duration {cfg.duration:.1f} s"
    )
    return 0


def _cmd_bench(args):
    cfg = _load(args.config)
    cfg = scenario_with(cfg, duration=args.duration)
    try:
        log = run_scenario(cfg)
    except DivergenceError as err:
        print(f"bench aborted: {err}", file=sys.stderr)
        raise SystemExit(2)
    latencies = log.solve_ms
    warm = latencies[1:] if len(latencies) > 1 else latencies
    print(f"solves: {len(latencies)} (first tick is the cold start)")
    print(f"cold start: {latencies[0]:.1f} ms")
    print(
        "warm-started latency: "
        f"median {np.median(warm):.1f} ms, "
        f"p95 {np.percentile(warm, 95):.1f} ms, "
        f"max {np.max(warm):.1f} ms"
    )
    print(
        f"iterations per solve: median {np.median(log.iterations):.0f}, "
        f"max {int(np.max(log.iterations))}"
    )
    return 0


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "check": _cmd_check, "bench": _cmd_bench}
    return handlers[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
