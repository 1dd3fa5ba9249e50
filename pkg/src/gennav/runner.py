"""End-to-end wiring: simulator plus stack, plus the scripted experiments.

Everything here is deterministic given its seed; the CLI, the demos, and
the acceptance tests all call these entry points rather than re-wiring the
loop themselves.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .control import ActuationController, BatteryCompensator
from .geometry import LaserScan, OccupancyGrid, Pose2D, Twist2D, integrate_twist
from .localization import MclConfig, MonteCarloLocalizer
from .mapping import GridMapper, MapperConfig
from .navigator import NavConfig, NavMode, Navigator, evaluate_goal_error
from .rangeflow import OdometryAccumulator, RangeFlowConfig, estimate_twist
from .sim import BatteryState, PlantConfig, SimState, Simulator
from .world import World, grid_geometry_for

CONTROL_DT = 0.05  # 20 Hz control and scan cadence


@dataclass(frozen=True)
class NavRunResult:
    reached: bool
    mode: str
    d_e: float
    alpha: float
    sim_time: float
    ticks: int
    contacts_while_executing: int
    final_battery: float
    trajectory: np.ndarray | None = None


def make_simulator(world: World, plant: PlantConfig, seed: int,
                   noise: bool = True) -> Simulator:
    return Simulator(
        world, plant, seed=seed,
        range_noise_sigma=0.01 if noise else 0.0,
        speed_noise_frac=0.02 if noise else 0.0,
    )


def run_navigation(world: World, map_grid: OccupancyGrid, start: Pose2D,
                   goal: Pose2D, plant: PlantConfig | None = None, seed: int = 0,
                   noise: bool = True, max_sim_time: float = 60.0,
                   nav_cfg: NavConfig = NavConfig(),
                   keep_trajectory: bool = False,
                   on_tick=None) -> NavRunResult:
    """One seeded goal-driven episode; error is measured against the true pose
    after the robot has come to rest."""
    plant = plant or PlantConfig()
    sim = make_simulator(world, plant, seed, noise)
    state = sim.initial_state(start)
    nav = Navigator(plant, nav_cfg, map_grid=map_grid, seed=seed + 1)
    nav.initialize_at(start)
    nav.set_goal(goal)
    controller = ActuationController(plant, v_nominal=state.battery.v_nominal)

    contacts_exec = 0
    trajectory = [] if keep_trajectory else None
    t = 0.0
    while t < max_sim_time:
        scan = sim.scan(state, t)
        cmd = nav.tick(scan, CONTROL_DT)
        duties = controller.step(cmd, nav.odom_twist, state.battery.v_now, CONTROL_DT)
        before = state.contact_count
        state = sim.step(state, duties, CONTROL_DT)
        if nav.mode is NavMode.EXECUTING:
            contacts_exec += state.contact_count - before
        if trajectory is not None:
            trajectory.append([t, state.pose.x, state.pose.y, state.pose.theta])
        if on_tick is not None:
            on_tick(nav, state, t)
        t += CONTROL_DT
        if nav.mode in (NavMode.GOAL_REACHED, NavMode.ABORTED):
            break

    # Let the plant coast to rest on zero commands before measuring.
    for _ in range(10):
        duties = controller.step(Twist2D(), nav.odom_twist, state.battery.v_now,
                                 CONTROL_DT)
        state = sim.step(state, np.zeros(plant.n_actuators), CONTROL_DT)

    err = evaluate_goal_error(state.pose, goal)
    return NavRunResult(
        reached=nav.mode is NavMode.GOAL_REACHED,
        mode=nav.mode.value,
        d_e=err.d_e,
        alpha=err.alpha,
        sim_time=t,
        ticks=nav.tick_count,
        contacts_while_executing=contacts_exec,
        final_battery=state.battery.v_now,
        trajectory=np.array(trajectory) if trajectory else None,
    )


# ---------------------------------------------------------------------------
# Scripted teleoperation (mapping without a human in the loop)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TeleopSegment:
    duration: float                    # seconds
    twist: Twist2D


def fig5_mapping_script() -> list[TeleopSegment]:
    """A lap of the two-block room: spin, tour the perimeter, spin again."""
    fwd = Twist2D(0.3, 0.0, 0.0)
    spin = Twist2D(0.0, 0.0, 0.5)

    def turn_left() -> TeleopSegment:
        return TeleopSegment(math.pi / 2 / 0.5, spin)

    legs = [TeleopSegment(2 * math.pi / 0.5, spin)]  # full look-around
    # Perimeter ring roughly 1.5 m off the walls, starting at (1.5, 1.5, 0).
    for _ in range(4):
        legs.append(TeleopSegment(7.0 / 0.3, fwd))
        legs.append(turn_left())
    legs.append(TeleopSegment(2 * math.pi / 0.5, spin))
    return legs


def run_mapping_script(world: World, script: list[TeleopSegment],
                       start: Pose2D, seed: int = 0, noise: bool = True,
                       plant: PlantConfig | None = None,
                       mapper_cfg: MapperConfig = MapperConfig(),
                       nav_cfg: NavConfig = NavConfig()) -> tuple[OccupancyGrid, GridMapper]:
    """Drive the scripted teleop through the full stack and map as we go."""
    plant = plant or PlantConfig()
    sim = make_simulator(world, plant, seed, noise)
    state = sim.initial_state(start)
    origin, width, height = grid_geometry_for(world, mapper_cfg.resolution)
    mapper = GridMapper(origin, width, height, mapper_cfg, seed=seed + 1,
                        start_pose=start)
    nav = Navigator(plant, nav_cfg, seed=seed + 2)
    nav.start_mapping(mapper)
    controller = ActuationController(plant, v_nominal=state.battery.v_nominal)

    t = 0.0
    for segment in script:
        ticks = int(round(segment.duration / CONTROL_DT))
        nav.set_teleop(segment.twist)
        for _ in range(ticks):
            scan = sim.scan(state, t)
            cmd = nav.tick(scan, CONTROL_DT)
            duties = controller.step(cmd, nav.odom_twist, state.battery.v_now,
                                     CONTROL_DT)
            state = sim.step(state, duties, CONTROL_DT)
            t += CONTROL_DT
    return mapper.best_map(), mapper


# ---------------------------------------------------------------------------
# Localization convergence runs
# ---------------------------------------------------------------------------

def fig5_localization_script() -> list[TeleopSegment]:
    """Survey tour meant to start at the "survey" spawn next to block A.

    The blocks are the only features breaking the square room's rotational
    symmetry; starting right beside one makes the very first scans
    disambiguating, before the particle population can drift onto an alias.
    """
    fwd = Twist2D(0.3, 0.0, 0.0)
    spin = Twist2D(0.0, 0.0, 0.6)
    quarter_turn = math.pi / 2 / 0.6
    return [
        TeleopSegment(2 * math.pi / 0.6, spin),       # look around between the blocks
        TeleopSegment(2.8 / 0.3, fwd),                # east, under block B
        TeleopSegment(quarter_turn, spin),            # face +y
        TeleopSegment(2.5 / 0.3, fwd),                # north along the east wall side
        TeleopSegment(quarter_turn, spin),            # face -x
        TeleopSegment(2.5 / 0.3, fwd),                # west, over block B
        TeleopSegment(quarter_turn, spin),            # face -y
        TeleopSegment(2.0 / 0.3, fwd),                # back down B's west face
    ]


@dataclass(frozen=True)
class LocalizationResult:
    position_error: float              # m, weighted-mean pose vs truth
    heading_error: float               # degrees
    updates: int
    n_eff: float
    rows: list = field(default_factory=list)


def run_localization_eval(world: World, map_grid: OccupancyGrid, start: Pose2D,
                          seed: int = 0, n_updates: int = 30,
                          mcl_cfg: MclConfig | None = None,
                          script: list[TeleopSegment] | None = None,
                          uniform_init: bool = True, noise: bool = True,
                          update_trans: float = 0.35,
                          update_rot: float = 0.5) -> LocalizationResult:
    """Global-initialization MCL driven by scan odometry along a script."""
    plant = PlantConfig()
    sim = make_simulator(world, plant, seed, noise)
    state = sim.initial_state(start)
    controller = ActuationController(plant, v_nominal=state.battery.v_nominal)
    mcl = MonteCarloLocalizer(map_grid, mcl_cfg or MclConfig(), seed=seed + 1)
    if uniform_init:
        mcl.initialize_uniform()
    else:
        mcl.initialize_gaussian(start)

    script = script or fig5_localization_script()
    odometry: OdometryAccumulator | None = None
    last_odom = Pose2D()
    since = [0.0, 0.0]
    updates = 0
    rows = []
    info = {"n_eff": float(mcl.cfg.n_particles)}
    t = 0.0
    for segment in script:
        for _ in range(int(round(segment.duration / CONTROL_DT))):
            scan = sim.scan(state, t)
            if odometry is None:
                odometry = OdometryAccumulator(scan, RangeFlowConfig(fix_vy=True))
            else:
                odometry.update(scan)
            delta = last_odom.delta_to(odometry.pose)
            last_odom = odometry.pose
            mcl.motion_update(delta)
            since[0] += math.hypot(delta.x, delta.y)
            since[1] += abs(delta.theta)
            if since[0] >= update_trans or since[1] >= update_rot:
                info = mcl.measurement_update(scan)
                since = [0.0, 0.0]
                updates += 1
                est, _ = mcl.estimate()
                rows.append((state.tick, state.pose.x, state.pose.y,
                             state.pose.theta, est.x, est.y, est.theta,
                             info["n_eff"]))
            duties = controller.step(segment.twist, odometry.twist,
                                     state.battery.v_now, CONTROL_DT)
            state = sim.step(state, duties, CONTROL_DT)
            t += CONTROL_DT
            if updates >= n_updates:
                break
        if updates >= n_updates:
            break

    est, _ = mcl.estimate()
    err = evaluate_goal_error(state.pose, Pose2D(est.x, est.y, est.theta))
    return LocalizationResult(position_error=err.d_e, heading_error=err.alpha,
                              updates=updates, n_eff=float(info["n_eff"]),
                              rows=rows)


# ---------------------------------------------------------------------------
# Scan-odometry evaluation
# ---------------------------------------------------------------------------

def run_odometry_eval(world: World, twist: Twist2D, steps: int, seed: int = 0,
                      start: Pose2D = Pose2D(2.0, 2.0, 0.0), dt: float = CONTROL_DT,
                      noise_sigma: float = 0.0, n_beams: int = 360,
                      range_max: float = 12.0) -> list[tuple]:
    """Ground-truth constant-twist flight vs per-step twist estimates.

    Rows: (tick, vx_true, vx_est, vy_true, vy_est, w_true, w_est, rms).
    """
    from .sim import raycast_scan

    rng = np.random.default_rng(seed)
    pose = start
    prev = raycast_scan(world, pose, n_beams, range_max, noise_sigma, rng,
                        timestamp=0.0)
    rows = []
    for k in range(1, steps + 1):
        pose = pose.compose(integrate_twist(twist, dt))
        curr = raycast_scan(world, pose, n_beams, range_max, noise_sigma, rng,
                            timestamp=k * dt)
        est = estimate_twist(prev, curr)
        rows.append((k, twist.vx, est.twist.vx, twist.vy, est.twist.vy,
                     twist.omega, est.twist.omega, est.residual_rms))
        prev = curr
    return rows


# ---------------------------------------------------------------------------
# Battery droop experiment
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BatteryRunResult:
    target_speed: float
    final_speed: float
    v_nominal: float
    v_final: float                     # supply seen by the final command
    relative_error: float
    rows: list = field(default_factory=list)


def run_battery_experiment(correction_on: bool, droop_rate: float = 0.15,
                           target_speed: float = 0.3, duration: float = 20.0,
                           world: World | None = None,
                           start: Pose2D = Pose2D(1.5, 5.0, 0.0),
                           seed: int = 0) -> BatteryRunResult:
    """Constant open-loop duty straight run under battery droop, noise off.

    The duty that produces `target_speed` at nominal voltage is held for the
    whole run; with correction enabled it is rescaled by the measured supply
    each tick. Rows: (tick, v_cmd, v_true, v_odom, v_supply, duty_pre,
    duty_post).
    """
    from .world import load_builtin_world

    world = world or load_builtin_world()
    plant = PlantConfig()
    sim = Simulator(world, plant, seed=seed, range_noise_sigma=0.0,
                    speed_noise_frac=0.0)
    battery = BatteryState(droop_rate=droop_rate)
    state = sim.initial_state(start, battery=battery)
    compensator = BatteryCompensator(v_nominal=battery.v_nominal)
    duty = target_speed / (plant.gamma * battery.v_nominal)
    if abs(duty) > 1.0:
        raise ValueError("target speed is beyond the plant at nominal voltage")

    odometry: OdometryAccumulator | None = None
    rows = []
    v_used = battery.v_now
    t = 0.0
    for k in range(int(round(duration / CONTROL_DT))):
        scan = sim.scan(state, t)
        if odometry is None:
            odometry = OdometryAccumulator(scan, RangeFlowConfig(fix_vy=True))
        else:
            odometry.update(scan)
        v_used = state.battery.v_now
        applied = compensator.correct(duty, v_used) if correction_on else duty
        state = sim.step(state, np.array([applied, applied]), CONTROL_DT)
        rows.append((k, target_speed, state.twist.vx, odometry.twist.vx,
                     v_used, duty, applied))
        t += CONTROL_DT

    final_speed = state.twist.vx
    rel_err = abs(target_speed - final_speed) / target_speed
    return BatteryRunResult(target_speed=target_speed, final_speed=final_speed,
                            v_nominal=battery.v_nominal, v_final=v_used,
                            relative_error=rel_err, rows=rows)
