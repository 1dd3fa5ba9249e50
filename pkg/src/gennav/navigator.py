"""Goal-driven navigation orchestrator.

One tick runs the sensing-to-command pipeline: scan odometry, localization
updates, the rolling local costmap, then whichever planner the current mode
calls for, and finally a slew limiter that keeps the emitted twist within
the plant's acceleration envelope. Mode changes all pass through one
transition table; terminal states only leave via an operator action
(reset or a fresh goal).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .costmap import Costmap, CostmapConfig, INSCRIBED, build_global_costmap, build_local_costmap
from .errors import (
    GennavError,
    GoalInObstacleError,
    LocalMinimumError,
    NoPathError,
    RobotInCollisionError,
)
from .geometry import LaserScan, OccupancyGrid, Pose2D, Twist2D, normalize_angle
from .localization import MclConfig, MonteCarloLocalizer
from .mapping import GridMapper, MapperConfig
from .planning import DwaConfig, GlobalPath, plan_global, plan_local, snap_to_traversable
from .rangeflow import OdometryAccumulator, RangeFlowConfig
from .sim import PlantConfig


class NavMode(enum.Enum):
    IDLE = "IDLE"
    MAPPING = "MAPPING"
    PLANNING = "PLANNING"
    EXECUTING = "EXECUTING"
    RECOVERY = "RECOVERY"
    GOAL_REACHED = "GOAL_REACHED"
    ABORTED = "ABORTED"


# Operator actions (set_goal, set_mode, reset) account for the transitions
# out of MAPPING and the terminal states.
LEGAL_TRANSITIONS = {
    NavMode.IDLE: {NavMode.MAPPING, NavMode.PLANNING},
    NavMode.MAPPING: {NavMode.IDLE},
    NavMode.PLANNING: {NavMode.EXECUTING, NavMode.ABORTED},
    NavMode.EXECUTING: {NavMode.GOAL_REACHED, NavMode.RECOVERY, NavMode.PLANNING},
    NavMode.RECOVERY: {NavMode.PLANNING, NavMode.ABORTED},
    NavMode.GOAL_REACHED: {NavMode.PLANNING, NavMode.IDLE},
    NavMode.ABORTED: {NavMode.PLANNING, NavMode.IDLE},
}

GOAL_ACCEPT_MODES = {NavMode.IDLE, NavMode.GOAL_REACHED, NavMode.ABORTED, NavMode.EXECUTING}


@dataclass(frozen=True)
class GoalError:
    """Goal accuracy: Euclidean distance of the robot center plus heading gap."""

    d_e: float          # meters
    alpha: float        # degrees, in [0, 180]


def evaluate_goal_error(true_pose: Pose2D, goal: Pose2D) -> GoalError:
    d_e = math.hypot(true_pose.x - goal.x, true_pose.y - goal.y)
    alpha = abs(math.degrees(normalize_angle(true_pose.theta - goal.theta)))
    return GoalError(d_e=d_e, alpha=alpha)


@dataclass(frozen=True)
class NavConfig:
    """Orchestrator tuning. Stop tolerances sit inside the 0.10 m / 20 deg
    goal window so that the true pose meets it despite localization error."""

    stop_xy: float = 0.05               # m, begin final alignment inside this
    stop_yaw: float = math.radians(12.0)
    goal_confirm_ticks: int = 2         # consecutive in-tolerance ticks required
    dock_radius: float = 0.4            # m, switch from DWA to the docking law
    creep_speed: float = 0.10           # m/s while docking
    align_gain: float = 2.0
    dock_turn_gain: float = 2.5
    mcl_update_trans: float = 0.05      # m of motion between measurement updates
    mcl_update_rot: float = 0.1         # rad
    dock_mcl_trans: float = 0.02        # m, denser updates while docking
    dock_mcl_rot: float = 0.05          # rad
    dock_decimation: int = 2            # beam decimation while docking
    map_update_trans: float = 0.15      # m, mapping cadence
    map_update_rot: float = math.radians(10.0)
    path_deviation: float = 0.8         # m from path before replanning
    scan_timeout_ticks: int = 5
    recovery_rotation: float = math.pi / 2
    max_recoveries: int = 3
    recovery_progress: float = 0.1      # m of goal progress that resets the count
    progress_timeout: float = 6.0       # s without goal progress before recovery
    progress_epsilon: float = 0.03      # m of improvement that counts as progress
    start_snap_radius: float = 0.3      # m, free-cell search when start is inflated


class Navigator:
    """Sequential move-base analog: one owner, ticked at the control rate."""

    def __init__(self, plant: PlantConfig, nav_cfg: NavConfig = NavConfig(),
                 costmap_cfg: CostmapConfig | None = None,
                 mcl_cfg: MclConfig | None = None,
                 rf_cfg: RangeFlowConfig | None = None,
                 dwa_cfg: DwaConfig | None = None,
                 map_grid: OccupancyGrid | None = None,
                 mapper: GridMapper | None = None,
                 seed: int = 0,
                 sensor_offset: Pose2D = Pose2D()):
        self.plant = plant
        self.cfg = nav_cfg
        self.costmap_cfg = costmap_cfg or CostmapConfig(inscribed_radius=plant.body_radius)
        self.rf_cfg = rf_cfg or RangeFlowConfig(fix_vy=not plant.holonomic)
        self.dwa_cfg = dwa_cfg or DwaConfig(
            v_max=plant.v_max, vy_max=plant.v_max, omega_max=plant.omega_max,
            accel_v=plant.accel_v, accel_omega=plant.accel_omega,
            n_vy=5 if plant.holonomic else 1,
        )
        self.sensor_offset = sensor_offset

        self.map = map_grid
        self.global_costmap: Costmap | None = None
        if map_grid is not None:
            self.global_costmap = build_global_costmap(map_grid, self.costmap_cfg)
        self.localizer: MonteCarloLocalizer | None = None
        if map_grid is not None:
            self.localizer = MonteCarloLocalizer(
                map_grid, mcl_cfg or MclConfig(), seed=seed,
                sensor_offset=sensor_offset)
        self.mapper = mapper

        self.mode = NavMode.IDLE
        self.goal: Pose2D | None = None
        self.path: GlobalPath | None = None
        self.local_costmap: Costmap | None = None
        self.replan_count = 0
        self.recovery_count = 0
        self._recoveries_without_progress = 0
        self._recovery_rotated = 0.0
        self._goal_distance_at_recovery = math.inf
        self._goal_streak = 0
        self._best_goal_distance = math.inf
        self._last_progress_time = 0.0

        self.odometry: OdometryAccumulator | None = None
        self._last_odom_pose = Pose2D()
        self._since_mcl = [0.0, 0.0]    # accumulated |trans|, |rot|
        self._mcl_ready = False
        self._map_delta = Pose2D()      # odometry accumulated for the mapper

        self.estimate = Pose2D()
        self.estimate_cov = np.zeros((3, 3))
        self.teleop_twist = Twist2D()
        self.last_command = Twist2D()
        self.tick_count = 0
        self.sim_time = 0.0
        self._missing_scans = 0
        self.fault_stop = False
        self.last_dwa = None

    # -- operator actions ------------------------------------------------------

    def _transition(self, new_mode: NavMode) -> None:
        if new_mode == self.mode:
            return
        if new_mode not in LEGAL_TRANSITIONS[self.mode]:
            raise GennavError(f"illegal transition {self.mode.value} -> {new_mode.value}")
        self.mode = new_mode

    def reset(self) -> None:
        """Operator reset out of a terminal or mapping state."""
        if self.mode is NavMode.IDLE:
            return
        if self.mode not in (NavMode.GOAL_REACHED, NavMode.ABORTED, NavMode.MAPPING):
            raise GennavError(f"cannot reset from mode {self.mode.value}")
        self._transition(NavMode.IDLE)
        self.goal = None
        self.path = None

    def start_mapping(self, mapper: GridMapper) -> None:
        if self.mode is not NavMode.IDLE:
            raise GennavError(f"cannot start mapping in mode {self.mode.value}")
        self.mapper = mapper
        self._map_delta = Pose2D()
        self._transition(NavMode.MAPPING)

    def set_teleop(self, twist: Twist2D) -> None:
        self.teleop_twist = twist if twist.is_finite() else Twist2D()

    def set_goal(self, goal: Pose2D) -> None:
        """Accept a navigation goal, or raise without touching the state."""
        if self.mode not in GOAL_ACCEPT_MODES:
            raise GennavError(f"goals are not accepted in mode {self.mode.value}")
        if self.global_costmap is None:
            raise GennavError("no map loaded")
        if not self.global_costmap.contains(goal.x, goal.y):
            raise GoalInObstacleError("goal is off the map")
        if snap_to_traversable(self.global_costmap, goal.x, goal.y) is None:
            raise GoalInObstacleError("goal cell is inside an obstacle")
        if self.mode is NavMode.EXECUTING:
            self.replan_count += 1
        self.goal = goal
        self.path = None
        self._recoveries_without_progress = 0
        self._goal_distance_at_recovery = math.inf
        self._best_goal_distance = math.inf
        self._last_progress_time = self.sim_time
        self._transition(NavMode.PLANNING)

    def initialize_at(self, pose: Pose2D, sigma_xy: float = 0.1,
                      sigma_theta: float = 0.05) -> None:
        if self.localizer is None:
            raise GennavError("no map loaded")
        self.localizer.initialize_gaussian(pose, sigma_xy, sigma_theta)
        self.estimate = pose
        self._mcl_ready = False

    def initialize_uniform(self) -> None:
        if self.localizer is None:
            raise GennavError("no map loaded")
        self.localizer.initialize_uniform()
        self._mcl_ready = False

    # -- per-tick pipeline ------------------------------------------------------

    def tick(self, scan: LaserScan | None, dt: float) -> Twist2D:
        """Advance the pipeline one control period and emit a twist command."""
        self.tick_count += 1
        self.sim_time += dt

        if scan is None:
            self._missing_scans += 1
            if self._missing_scans > self.cfg.scan_timeout_ticks:
                self.fault_stop = True
            target = Twist2D() if self.fault_stop else self._mode_target(None)
            return self._emit(target, dt)
        self._missing_scans = 0
        self.fault_stop = False

        delta = self._update_odometry(scan)
        self._update_localization(delta, scan)
        if self.mode in (NavMode.PLANNING, NavMode.EXECUTING, NavMode.RECOVERY):
            self.local_costmap = build_local_costmap(
                scan, self.estimate, self.costmap_cfg, self.sensor_offset)
        if self.mode is NavMode.MAPPING and self.mapper is not None:
            self._update_mapper(delta, scan)

        target = self._mode_target(scan)
        return self._emit(target, dt)

    def _update_odometry(self, scan: LaserScan) -> Pose2D:
        if self.odometry is None:
            self.odometry = OdometryAccumulator(scan, self.rf_cfg)
            self._last_odom_pose = self.odometry.pose
            return Pose2D()
        self.odometry.update(scan)
        delta = self._last_odom_pose.delta_to(self.odometry.pose)
        self._last_odom_pose = self.odometry.pose
        return delta

    @property
    def odom_twist(self) -> Twist2D:
        """Latest scan-odometry twist; the actuation layer's feedback."""
        if self.odometry is None:
            return Twist2D()
        return self.odometry.twist

    def _update_localization(self, delta: Pose2D, scan: LaserScan) -> None:
        if self.localizer is None or not self.localizer.initialized \
                or self.mode is NavMode.MAPPING:
            return
        self.localizer.motion_update(delta)
        self._since_mcl[0] += math.hypot(delta.x, delta.y)
        self._since_mcl[1] += abs(delta.theta)
        docking = (self.goal is not None
                   and self.estimate.distance_to(self.goal) <= self.cfg.dock_radius)
        trans_gate = self.cfg.dock_mcl_trans if docking else self.cfg.mcl_update_trans
        rot_gate = self.cfg.dock_mcl_rot if docking else self.cfg.mcl_update_rot
        if (not self._mcl_ready
                or self._since_mcl[0] >= trans_gate
                or self._since_mcl[1] >= rot_gate):
            self.localizer.measurement_update(
                scan, decimation=self.cfg.dock_decimation if docking else None)
            self._since_mcl = [0.0, 0.0]
            self._mcl_ready = True
        self.estimate, self.estimate_cov = self.localizer.estimate()

    def _update_mapper(self, delta: Pose2D, scan: LaserScan) -> None:
        self._map_delta = self._map_delta.compose(delta)
        trans = math.hypot(self._map_delta.x, self._map_delta.y)
        rot = abs(self._map_delta.theta)
        if self.mapper.updates == 0 or trans >= self.cfg.map_update_trans \
                or rot >= self.cfg.map_update_rot:
            self.mapper.update(self._map_delta, scan)
            self._map_delta = Pose2D()
            self.estimate = self.mapper.best_particle().pose

    # -- mode behaviors -----------------------------------------------------------

    def _mode_target(self, scan: LaserScan | None) -> Twist2D:
        if self.mode is NavMode.MAPPING:
            return self.teleop_twist
        if self.mode is NavMode.PLANNING:
            self._run_planning()
            return Twist2D()
        if self.mode is NavMode.EXECUTING:
            return self._run_executing()
        if self.mode is NavMode.RECOVERY:
            return self._run_recovery()
        return Twist2D()

    def _run_planning(self) -> None:
        start = self._traversable_start()
        if start is None:
            self._transition(NavMode.ABORTED)
            return
        try:
            self.path = plan_global(self.global_costmap, start, self.goal)
        except (NoPathError, GoalInObstacleError, RobotInCollisionError):
            self._transition(NavMode.ABORTED)
            return
        self._transition(NavMode.EXECUTING)

    def _traversable_start(self) -> Pose2D | None:
        cm = self.global_costmap
        est = self.estimate
        try:
            ix, iy = cm.world_to_cell(est.x, est.y)
        except Exception:
            return None
        if cm.cost[iy, ix] < INSCRIBED:
            return est
        snapped = snap_to_traversable(cm, est.x, est.y, self.cfg.start_snap_radius)
        if snapped is None:
            return None
        cx, cy = cm.cell_center(*snapped)
        return Pose2D(cx, cy, est.theta)

    def _run_executing(self) -> Twist2D:
        est = self.estimate
        goal = self.goal
        d_e = est.distance_to(goal)
        if d_e < self._best_goal_distance - self.cfg.progress_epsilon:
            self._best_goal_distance = d_e
            self._last_progress_time = self.sim_time
        elif self.sim_time - self._last_progress_time > self.cfg.progress_timeout:
            # Parked without getting closer: treat like a local minimum.
            self._enter_recovery()
            return Twist2D()
        if d_e <= self.cfg.stop_xy:
            dtheta = normalize_angle(goal.theta - est.theta)
            if abs(dtheta) <= self.cfg.stop_yaw:
                self._goal_streak += 1
                if self._goal_streak >= self.cfg.goal_confirm_ticks:
                    self._transition(NavMode.GOAL_REACHED)
                return Twist2D()
            self._goal_streak = 0
            omega = _clip(self.cfg.align_gain * dtheta,
                          0.6 * self.plant.omega_max)
            return Twist2D(0.0, 0.0, omega)
        self._goal_streak = 0
        if d_e <= self.cfg.dock_radius:
            return self._dock_command(est, goal, d_e)

        if self._path_distance(est) > self.cfg.path_deviation:
            self.replan_count += 1
            self._transition(NavMode.PLANNING)
            return Twist2D()
        try:
            choice = plan_local(self.dwa_cfg, self.last_command, est,
                                self.local_costmap, self.path)
        except LocalMinimumError:
            self._enter_recovery()
            return Twist2D()
        self.last_dwa = choice
        return choice.twist

    def _dock_command(self, est: Pose2D, goal: Pose2D, d_e: float) -> Twist2D:
        bearing = normalize_angle(math.atan2(goal.y - est.y, goal.x - est.x) - est.theta)
        speed = min(self.cfg.creep_speed, 0.8 * d_e)
        if self.plant.holonomic:
            vx = speed * math.cos(bearing)
            vy = speed * math.sin(bearing)
            omega = _clip(self.cfg.align_gain * normalize_angle(goal.theta - est.theta),
                          0.6 * self.plant.omega_max)
            return Twist2D(vx, vy, omega)
        if abs(bearing) > 0.5:
            return Twist2D(0.0, 0.0, _clip(self.cfg.dock_turn_gain * bearing,
                                           0.6 * self.plant.omega_max))
        return Twist2D(speed, 0.0, _clip(self.cfg.dock_turn_gain * bearing,
                                         0.6 * self.plant.omega_max))

    def _path_distance(self, est: Pose2D) -> float:
        if self.path is None or len(self.path) == 0:
            return math.inf
        d = np.hypot(self.path.waypoints[:, 0] - est.x,
                     self.path.waypoints[:, 1] - est.y)
        return float(d.min())

    def _enter_recovery(self) -> None:
        d_e = self.estimate.distance_to(self.goal)
        if self._goal_distance_at_recovery - d_e >= self.cfg.recovery_progress:
            self._recoveries_without_progress = 0
        self._recoveries_without_progress += 1
        self._goal_distance_at_recovery = d_e
        self.recovery_count += 1
        self._recovery_rotated = 0.0
        self._transition(NavMode.RECOVERY)

    def _run_recovery(self) -> Twist2D:
        if self._recoveries_without_progress > self.cfg.max_recoveries:
            self._transition(NavMode.ABORTED)
            return Twist2D()
        if self._recovery_rotated >= self.cfg.recovery_rotation:
            # Rotation swept the scanner; drop the stale window and replan.
            self.local_costmap = None
            self._last_progress_time = self.sim_time
            self._transition(NavMode.PLANNING)
            return Twist2D()
        return Twist2D(0.0, 0.0, 0.5 * self.plant.omega_max)

    # -- command shaping ------------------------------------------------------------

    def _emit(self, target: Twist2D, dt: float) -> Twist2D:
        """Slew-limit the target twist so commands respect the accel envelope."""
        dv = self.plant.accel_v * dt
        dw = self.plant.accel_omega * dt
        last = self.last_command
        cmd = Twist2D(
            last.vx + _clip(target.vx - last.vx, dv),
            last.vy + _clip(target.vy - last.vy, dv),
            last.omega + _clip(target.omega - last.omega, dw),
        )
        if self.mode is NavMode.RECOVERY:
            self._recovery_rotated += abs(cmd.omega) * dt
        self.last_command = cmd
        return cmd

    # -- introspection -----------------------------------------------------------------

    def snapshot(self) -> dict:
        """Immutable-ish view for telemetry; arrays are copies."""
        snap = {
            "tick": self.tick_count,
            "mode": self.mode.value,
            "pose_est": [self.estimate.x, self.estimate.y, self.estimate.theta],
            "replan_count": self.replan_count,
            "recovery_count": self.recovery_count,
            "fault_stop": self.fault_stop,
        }
        if self.goal is not None:
            snap["goal"] = [self.goal.x, self.goal.y, self.goal.theta]
        if self.path is not None:
            snap["path"] = self.path.waypoints.tolist()
        if self.localizer is not None and self.localizer.initialized:
            p = self.localizer.particles
            snap["particles"] = np.column_stack((p.poses, p.weights)).tolist()
        return snap


def _clip(value: float, bound: float) -> float:
    return max(-bound, min(bound, value))
