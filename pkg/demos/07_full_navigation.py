"""End-to-end navigation: map with SLAM, save, reload, navigate on it.

This chains the whole pipeline the way the hardware workflow would run it:
a teleop lap builds the map, the map goes to disk, and a fresh navigator
localizes against the loaded map and drives to a goal. Both plant kinds
run; only the plant config and the low-level controller differ.
"""
import time

from gennav.geometry import Pose2D
from gennav.map_io import load_map, save_map
from gennav.runner import fig5_mapping_script, run_mapping_script, run_navigation
from gennav.sim import PlantConfig, QUADPLANAR
from gennav.world import load_builtin_world

world = load_builtin_world()

print("1) mapping lap (SLAM with scan odometry)...")
grid, _ = run_mapping_script(world, fig5_mapping_script(),
                             start=Pose2D(1.5, 1.5, 0.0), seed=42)
save_map(grid, "demos/out_nav_map")
print("   map saved to demos/out_nav_map.{pgm,yaml}")

print("2) reloading the map and navigating on it:")
loaded = load_map("demos/out_nav_map")
start = world.spawn("start")
goal = Pose2D(8.0, 8.0, 0.0)
for kind in ("diffdrive", QUADPLANAR):
    t0 = time.time()
    result = run_navigation(world, loaded, start, goal,
                            plant=PlantConfig(kind=kind), seed=11)
    print(f"   {kind:10s}: {result.mode}  d_e={result.d_e:.3f} m  "
          f"alpha={result.alpha:.2f} deg  sim {result.sim_time:.1f} s  "
          f"wall {time.time() - t0:.1f} s")
