"""Command-line entry points.

Subcommands: odom-eval, map, localize, plan, navigate, ctrl-eval, serve.
Angles on the command line are radians inside pose triples ("x,y,theta").
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from .costmap import CostmapConfig, build_global_costmap
from .geometry import Pose2D, Twist2D
from .map_io import load_map, save_map
from .mapping import MapperConfig, map_iou
from .planning import plan_global
from .runner import (
    fig5_mapping_script,
    run_battery_experiment,
    run_localization_eval,
    run_mapping_script,
    run_navigation,
    run_odometry_eval,
    TeleopSegment,
)
from .sim import PlantConfig, QUADPLANAR
from .world import World, grid_geometry_for, load_builtin_world


def _parse_pose(text: str) -> Pose2D:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("pose must be 'x,y,theta'")
    return Pose2D(*parts)


def _parse_twist(text: str) -> Twist2D:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("twist must be 'vx,vy,omega'")
    return Twist2D(*parts)


def _load_world(path: str | None) -> World:
    if path is None or path == "fig5":
        return load_builtin_world()
    return World.load(path)


def _plant(kind: str) -> PlantConfig:
    return PlantConfig(kind=kind)


def _write_csv(path: str | None, header: list[str], rows) -> None:
    out = open(path, "w", newline="") if path else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if path:
            out.close()


def cmd_odom_eval(args) -> int:
    world = _load_world(args.world)
    rows = run_odometry_eval(world, _parse_twist(args.twist), steps=args.steps,
                             seed=args.seed, noise_sigma=args.noise_sigma)
    _write_csv(args.out, ["tick", "vx_t", "vx_e", "vy_t", "vy_e", "w_t", "w_e", "rms"],
               rows)
    return 0


def cmd_map(args) -> int:
    world = _load_world(args.world)
    if args.script:
        import json

        spec = json.loads(Path(args.script).read_text())
        script = [TeleopSegment(seg["t"], Twist2D(*seg["twist"])) for seg in spec]
    else:
        script = fig5_mapping_script()
    start = world.spawn(args.spawn) if args.spawn else Pose2D(1.5, 1.5, 0.0)
    grid, mapper = run_mapping_script(world, script, start, seed=args.seed,
                                      mapper_cfg=MapperConfig())
    pgm, yaml_path = save_map(grid, args.out)
    origin, w, h = grid_geometry_for(world, grid.resolution)
    truth = world.rasterize(grid.resolution, origin, w, h)
    print(f"wrote {pgm} and {yaml_path}; updates={mapper.updates} "
          f"IoU vs world={map_iou(grid, truth):.3f}")
    return 0


def cmd_localize(args) -> int:
    world = _load_world(args.world)
    grid = load_map(args.map)
    start = world.spawn(args.spawn) if args.spawn else Pose2D(1.5, 1.5, 0.0)
    result = run_localization_eval(world, grid, start, seed=args.seed,
                                   n_updates=args.updates)
    _write_csv(args.out,
               ["tick", "x_true", "y_true", "theta_true", "x_est", "y_est",
                "theta_est", "n_eff"], result.rows)
    print(f"final error: {result.position_error:.3f} m, "
          f"{result.heading_error:.2f} deg after {result.updates} updates",
          file=sys.stderr)
    return 0


def cmd_plan(args) -> int:
    grid = load_map(args.map)
    costmap = build_global_costmap(grid, CostmapConfig())
    path = plan_global(costmap, _parse_pose(args.start), _parse_pose(args.goal))
    _write_csv(args.out, ["x", "y"], [(f"{x:.4f}", f"{y:.4f}") for x, y in path.waypoints])
    print(f"cost={path.total_cost:.4f} waypoints={len(path)}", file=sys.stderr)
    if args.emit_svg:
        _emit_svg(args.emit_svg, costmap, path)
    if args.dump_costmap:
        _dump_costmap(args.dump_costmap, costmap)
    return 0


def _emit_svg(path: str, costmap, plan) -> None:
    res = costmap.resolution
    x0, y0 = costmap.origin.x, costmap.origin.y
    w = costmap.width * res
    h = costmap.height * res
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0} {-y0 - h} {w} {h}" '
        f'width="800" height="{800 * h / w:.0f}">',
        f'<rect x="{x0}" y="{-y0 - h}" width="{w}" height="{h}" fill="#fafafa"/>',
    ]
    ys, xs = np.nonzero(costmap.cost >= 253)
    for ix, iy in zip(xs, ys):
        cx = x0 + ix * res
        cy = -(y0 + (iy + 1) * res)
        lines.append(f'<rect x="{cx:.3f}" y="{cy:.3f}" width="{res}" height="{res}" fill="#333"/>')
    pts = " ".join(f"{x:.3f},{-y:.3f}" for x, y in plan.waypoints)
    lines.append(f'<polyline points="{pts}" fill="none" stroke="#a0522d" stroke-width="{res}"/>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines))


def _dump_costmap(path: str, costmap) -> None:
    img = (254 - costmap.cost.astype(np.int32)).astype(np.uint8)[::-1, :]
    header = f"P5\n{costmap.width} {costmap.height}\n255\n".encode()
    Path(path).write_bytes(header + img.tobytes())


def cmd_navigate(args) -> int:
    world = _load_world(args.world)
    if args.map:
        grid = load_map(args.map)
    else:
        origin, w, h = grid_geometry_for(world, 0.05)
        grid = world.rasterize(0.05, origin, w, h)
    goal = _parse_pose(args.goal)
    start = world.spawn(args.spawn) if args.spawn else world.spawn("start")
    plant = _plant(args.robot)
    rows = []
    reached = 0
    for i in range(args.runs):
        r = run_navigation(world, grid, start, goal, plant=plant,
                           seed=args.seed + i)
        rows.append((args.seed + i, r.mode, f"{r.d_e:.4f}", f"{r.alpha:.3f}",
                     f"{r.sim_time:.2f}", r.ticks, r.contacts_while_executing))
        reached += r.reached
        print(f"run {i}: {r.mode} d_e={r.d_e:.3f} m alpha={r.alpha:.2f} deg "
              f"t={r.sim_time:.1f} s", file=sys.stderr)
    _write_csv(args.report, ["seed", "mode", "d_e", "alpha_deg", "sim_time",
                             "ticks", "contacts"], rows)
    print(f"{reached}/{args.runs} reached", file=sys.stderr)
    return 0 if reached == args.runs else 1


def cmd_ctrl_eval(args) -> int:
    droop = 0.15 if args.droop == "on" else 0.0
    result = run_battery_experiment(correction_on=args.correction == "on",
                                    droop_rate=droop)
    _write_csv(args.out, ["tick", "v_cmd", "v_true", "v_odom", "v_supply",
                          "duty_pre", "duty_post"],
               [(t, f"{a:.4f}", f"{b:.6f}", f"{c:.6f}", f"{d:.4f}",
                 f"{e:.6f}", f"{f:.6f}") for t, a, b, c, d, e, f in result.rows])
    dv = (result.v_nominal - result.v_final) / result.v_nominal
    print(f"relative speed error {result.relative_error:.6f} at droop "
          f"{dv:.4f} (correction {args.correction})", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    world = _load_world(args.world)
    grid = load_map(args.map) if args.map else None
    plant = _plant(args.robot)
    serve(world=world, map_grid=grid, plant=plant, port=args.port,
          seed=args.seed, headless=args.headless)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gennav",
                                     description="planar navigation stack tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("odom-eval", help="scan-odometry accuracy against ground truth")
    p.add_argument("--world", default="fig5")
    p.add_argument("--twist", required=True, help="vx,vy,omega")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_odom_eval)

    p = sub.add_parser("map", help="build a map from a scripted teleop run")
    p.add_argument("--world", default="fig5")
    p.add_argument("--script", help="JSON teleop script; default built-in lap")
    p.add_argument("--spawn")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True, help="output stem for .pgm/.yaml")
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("localize", help="global localization convergence run")
    p.add_argument("--world", default="fig5")
    p.add_argument("--map", required=True)
    p.add_argument("--spawn")
    p.add_argument("--updates", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("plan", help="global path on a saved map")
    p.add_argument("--map", required=True)
    p.add_argument("--start", required=True, help="x,y,theta")
    p.add_argument("--goal", required=True, help="x,y,theta")
    p.add_argument("--emit-svg")
    p.add_argument("--dump-costmap")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("navigate", help="seeded end-to-end navigation runs")
    p.add_argument("--world", default="fig5")
    p.add_argument("--map", help="map stem; defaults to the rasterized world")
    p.add_argument("--goal", required=True, help="x,y,theta")
    p.add_argument("--spawn")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--robot", choices=["diffdrive", QUADPLANAR], default="diffdrive")
    p.add_argument("--report")
    p.set_defaults(func=cmd_navigate)

    p = sub.add_parser("ctrl-eval", help="battery droop compensation experiment")
    p.add_argument("--droop", choices=["on", "off"], default="on")
    p.add_argument("--correction", choices=["on", "off"], default="on")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ctrl_eval)

    p = sub.add_parser("serve", help="telemetry server plus browser UI")
    p.add_argument("--world", default="fig5")
    p.add_argument("--map")
    p.add_argument("--port", type=int, default=8760)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--robot", choices=["diffdrive", QUADPLANAR], default="diffdrive")
    p.add_argument("--headless", action="store_true",
                   help="no static UI, socket protocol only")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
