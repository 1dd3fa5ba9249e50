"""Tour of the deterministic plant simulator.

Drives the differential-drive plant open loop, shows the closed-form
speed relation speed = gamma * duty * volts, battery droop, collision
stopping, and a LiDAR sweep. Saves a trajectory plot when matplotlib is
available.
"""
import numpy as np

from gennav.geometry import Pose2D
from gennav.sim import BatteryState, PlantConfig, Simulator
from gennav.world import load_builtin_world

world = load_builtin_world()
plant = PlantConfig()
sim = Simulator(world, plant, seed=1, range_noise_sigma=0.0, speed_noise_frac=0.0)
state = sim.initial_state(Pose2D(1.0, 1.0, 0.0), BatteryState(droop_rate=0.02))

print(f"plant: gamma={plant.gamma} (m/s)/(duty*V), v_max={plant.v_max} m/s")
print(f"battery: {state.battery.v_now:.2f} V nominal\n")

duty = 0.4
print(f"holding duty {duty} on both wheels:")
trail = []
for k in range(200):
    v_seen = state.battery.v_now
    state = sim.step(state, np.array([duty, duty]), 0.05)
    trail.append((state.pose.x, state.pose.y))
    if k in (0, 50, 199):
        predicted = plant.gamma * duty * v_seen
        print(f"  tick {k:3d}: v={state.twist.vx:.4f} m/s "
              f"(gamma*duty*V = {predicted:.4f}), battery {state.battery.v_now:.3f} V, "
              f"x={state.pose.x:.2f} m")

print("\nnow driving straight at a wall (collision stops translation):")
state = sim.initial_state(Pose2D(8.0, 1.0, 0.0))
for _ in range(300):
    state = sim.step(state, np.array([1.0, 1.0]), 0.05)
print(f"  stopped at x={state.pose.x:.3f} m "
      f"(wall at 10.0, disc radius {plant.body_radius}), contacts={state.contact_count}")

print("\none LiDAR sweep from the room center:")
scan = sim.scan(sim.initial_state(Pose2D(5.0, 5.0, 0.0)), 0.0)
print(f"  {len(scan)} beams, min range {scan.ranges.min():.2f} m, "
      f"max {scan.ranges.max():.2f} m (range_max {scan.range_max})")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 6))
    for x1, y1, x2, y2 in world.segments:
        ax.plot([x1, x2], [y1, y2], "k-")
    trail = np.array(trail)
    ax.plot(trail[:, 0], trail[:, 1], "b-", label="open-loop run")
    pts = scan.points() + [5.0, 5.0]
    ax.plot(pts[:, 0], pts[:, 1], "r.", markersize=2, label="scan endpoints")
    ax.set_aspect("equal")
    ax.legend()
    fig.savefig("demos/out_simulator_tour.png", dpi=110)
    print("\nsaved demos/out_simulator_tour.png")
except ImportError:
    print("\n(matplotlib not available; skipping the plot)")
