"""Costmaps and both planners on the bundled world.

Builds the inflated global costmap, plans a path across the room with
Dijkstra, then asks the local planner for one velocity choice against a
scan-derived rolling window.
"""
import numpy as np

from gennav.costmap import CostmapConfig, build_global_costmap, build_local_costmap
from gennav.geometry import Pose2D, Twist2D
from gennav.planning import DwaConfig, plan_global, plan_local
from gennav.sim import PlantConfig, Simulator
from gennav.world import grid_geometry_for, load_builtin_world

world = load_builtin_world()
origin, w, h = grid_geometry_for(world, 0.05)
grid = world.rasterize(0.05, origin, w, h)
costmap = build_global_costmap(grid, CostmapConfig())
lethal = int((costmap.cost == 254).sum())
inflated = int(((costmap.cost > 0) & (costmap.cost < 253)).sum())
print(f"global costmap: {lethal} lethal cells, {inflated} in the decay band")

start = Pose2D(1.0, 1.0, 0.0)
goal = Pose2D(8.0, 8.0, 0.0)
path = plan_global(costmap, start, goal)
print(f"global path: {len(path)} waypoints, cost {path.total_cost:.2f}")
print("  first:", np.round(path.waypoints[0], 2),
      " mid:", np.round(path.waypoints[len(path) // 2], 2),
      " last:", np.round(path.waypoints[-1], 2))

sim = Simulator(world, PlantConfig(), seed=0)
scan = sim.scan(sim.initial_state(start), 0.0)
local = build_local_costmap(scan, start)
choice = plan_local(DwaConfig(), Twist2D(), start, local, path)
print(f"\nlocal planner from rest: twist ({choice.twist.vx:.3f}, "
      f"{choice.twist.vy:.3f}, {choice.twist.omega:.3f}), "
      f"{choice.admissible_count} admissible samples, score {choice.score:.3f}")
