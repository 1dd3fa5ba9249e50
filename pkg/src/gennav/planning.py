"""Global shortest-path search and local velocity-space optimization.

The global planner runs Dijkstra on the 8-connected costmap lattice with
edge weight `step_length * (1 + destination_cost / 128)`, so inflation is
repulsive without forbidding passage. The local planner samples the dynamic
window, forward-simulates each twist along a constant-twist arc, discards
samples that touch inscribed cost or cannot brake in their own clearance,
and scores the survivors on heading, clearance, and speed with min-max
normalization over the admissible set.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .costmap import INSCRIBED, Costmap
from .errors import GoalInObstacleError, LocalMinimumError, NoPathError, RobotInCollisionError
from .geometry import Pose2D, Twist2D, normalize_angle

GOAL_SNAP_RADIUS = 0.2  # m

# Fixed neighbor order: deterministic tie behavior in the search.
_NEIGHBORS = (
    (0, 1), (0, -1), (1, 0), (-1, 0),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
)


@dataclass(frozen=True)
class GlobalPath:
    waypoints: np.ndarray               # (N, 2) world points, cell centers
    total_cost: float
    cells: tuple = ()                   # (ix, iy) chain, start to goal

    def __len__(self) -> int:
        return int(self.waypoints.shape[0])

    def arc_lengths(self) -> np.ndarray:
        """Cumulative arc length at each waypoint (0 at the first)."""
        if len(self) < 2:
            return np.zeros(len(self))
        steps = np.hypot(*np.diff(self.waypoints, axis=0).T)
        return np.concatenate(([0.0], np.cumsum(steps)))


def snap_to_traversable(costmap: Costmap, x: float, y: float,
                        radius: float = GOAL_SNAP_RADIUS) -> tuple[int, int] | None:
    """Nearest traversable cell whose center lies within `radius` of a point.

    Ties on distance break lexicographically on (iy, ix).
    """
    if not costmap.contains(x, y):
        return None
    ix0, iy0 = costmap.world_to_cell(x, y)
    reach = int(math.ceil(radius / costmap.resolution)) + 1
    best = None
    for iy in range(max(iy0 - reach, 0), min(iy0 + reach + 1, costmap.height)):
        for ix in range(max(ix0 - reach, 0), min(ix0 + reach + 1, costmap.width)):
            if costmap.cost[iy, ix] >= INSCRIBED:
                continue
            cx, cy = costmap.cell_center(ix, iy)
            d = math.hypot(cx - x, cy - y)
            if d <= radius and (best is None or (d, iy, ix) < best):
                best = (d, iy, ix)
    if best is None:
        return None
    return best[2], best[1]


def plan_global(costmap: Costmap, start: Pose2D, goal: Pose2D) -> GlobalPath:
    """Minimum-cost 8-connected path from start to goal over the costmap.

    The goal snaps to the nearest traversable cell within 0.2 m. Raises
    RobotInCollisionError when the start cell is not traversable,
    GoalInObstacleError when no traversable goal cell exists, and
    NoPathError when the goal cell cannot be reached.
    """
    try:
        sx, sy = costmap.world_to_cell(start.x, start.y)
    except Exception as exc:
        raise RobotInCollisionError("start pose is off the costmap") from exc
    if costmap.cost[sy, sx] >= INSCRIBED:
        raise RobotInCollisionError("start cell is not traversable")

    snapped = snap_to_traversable(costmap, goal.x, goal.y)
    if snapped is None:
        raise GoalInObstacleError("no traversable cell within reach of the goal")
    gx, gy = snapped

    res = costmap.resolution
    cost = costmap.cost
    dist = np.full((costmap.height, costmap.width), np.inf)
    parent = np.full((costmap.height, costmap.width, 2), -1, dtype=np.int32)
    dist[sy, sx] = 0.0
    heap = [(0.0, sy, sx)]
    done = np.zeros_like(dist, dtype=bool)

    while heap:
        d, iy, ix = heapq.heappop(heap)
        if done[iy, ix]:
            continue
        done[iy, ix] = True
        if (ix, iy) == (gx, gy):
            break
        for dy, dx in _NEIGHBORS:
            ny, nx = iy + dy, ix + dx
            if not (0 <= ny < costmap.height and 0 <= nx < costmap.width):
                continue
            c = cost[ny, nx]
            if c >= INSCRIBED or done[ny, nx]:
                continue
            step = res if dy == 0 or dx == 0 else res * math.sqrt(2.0)
            nd = d + step * (1.0 + c / 128.0)
            if nd < dist[ny, nx]:
                dist[ny, nx] = nd
                parent[ny, nx] = (iy, ix)
                heapq.heappush(heap, (nd, ny, nx))

    if not np.isfinite(dist[gy, gx]):
        raise NoPathError("goal is unreachable from the start cell")

    chain = []
    iy, ix = gy, gx
    while (iy, ix) != (sy, sx):
        chain.append((ix, iy))
        iy, ix = parent[iy, ix]
    chain.append((sx, sy))
    chain.reverse()
    waypoints = np.array([costmap.cell_center(ix, iy) for ix, iy in chain])
    return GlobalPath(waypoints=waypoints, total_cost=float(dist[gy, gx]),
                      cells=tuple(chain))


# ---------------------------------------------------------------------------
# Dynamic window approach
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DwaConfig:
    v_min: float = 0.0
    v_max: float = 0.5
    vy_max: float = 0.5
    omega_max: float = 1.5
    accel_v: float = 1.0
    accel_omega: float = 3.0
    command_dt: float = 0.05            # window half-width = accel * command_dt
    sim_horizon: float = 1.5
    sim_dt: float = 0.1
    n_v: int = 11
    n_vy: int = 1                       # > 1 only for holonomic plants
    n_omega: int = 21
    w_heading: float = 0.8
    w_clearance: float = 0.3
    w_velocity: float = 0.2
    lookahead: float = 0.6              # m along the global path

    def __post_init__(self):
        if min(self.n_v, self.n_omega) < 3:
            raise ValueError("need at least 3 samples per sampled axis")
        if self.sim_dt <= 0 or self.sim_horizon < self.sim_dt:
            raise ValueError("invalid simulation horizon")


@dataclass(frozen=True)
class DwaChoice:
    twist: Twist2D
    score: float
    trajectory: np.ndarray              # (H+1, 3) poses, start included
    admissible_count: int


def sample_axis(lo: float, hi: float, n: int) -> np.ndarray:
    if n <= 1:
        return np.array([0.5 * (lo + hi)])
    return np.linspace(lo, hi, n)


def dynamic_window(cfg: DwaConfig, current: Twist2D):
    """Velocity bounds reachable within one command interval."""
    dv = cfg.accel_v * cfg.command_dt
    dw = cfg.accel_omega * cfg.command_dt
    v_lo = max(cfg.v_min, current.vx - dv)
    v_hi = min(cfg.v_max, current.vx + dv)
    v_hi = max(v_hi, v_lo)
    if cfg.n_vy > 1:
        vy_lo = max(-cfg.vy_max, current.vy - dv)
        vy_hi = min(cfg.vy_max, current.vy + dv)
        vy_hi = max(vy_hi, vy_lo)
    else:
        vy_lo = vy_hi = 0.0
    w_lo = max(-cfg.omega_max, current.omega - dw)
    w_hi = min(cfg.omega_max, current.omega + dw)
    w_hi = max(w_hi, w_lo)
    return (v_lo, v_hi), (vy_lo, vy_hi), (w_lo, w_hi)


def simulate_arc(pose: Pose2D, vx: float, vy: float, omega: float,
                 times: np.ndarray) -> np.ndarray:
    """Poses along a constant-twist arc at the given times, (T, 3)."""
    theta = pose.theta + omega * times
    if abs(omega) < 1e-9:
        x = pose.x + (vx * math.cos(pose.theta) - vy * math.sin(pose.theta)) * times
        y = pose.y + (vx * math.sin(pose.theta) + vy * math.cos(pose.theta)) * times
    else:
        s0, c0 = math.sin(pose.theta), math.cos(pose.theta)
        x = pose.x + (vx * (np.sin(theta) - s0) + vy * (np.cos(theta) - c0)) / omega
        y = pose.y + (-vx * (np.cos(theta) - c0) + vy * (np.sin(theta) - s0)) / omega
    return np.column_stack((x, y, theta))


def pursuit_waypoint(path: GlobalPath, pose: Pose2D, lookahead: float) -> np.ndarray:
    """First path vertex at least `lookahead` beyond the robot's projection.

    Scalar arithmetic throughout: the selection among vertices must be
    reproducible to the bit against a plain re-implementation.
    """
    wp = path.waypoints
    if len(path) == 1:
        return wp[0]
    arc = [0.0]
    for i in range(1, len(wp)):
        arc.append(arc[-1] + math.hypot(wp[i][0] - wp[i - 1][0],
                                        wp[i][1] - wp[i - 1][1]))
    best_s, best_d = 0.0, math.inf
    for i in range(len(wp) - 1):
        ax, ay = wp[i]
        bx, by = wp[i + 1]
        ex, ey = bx - ax, by - ay
        seg_sq = ex * ex + ey * ey
        t = 0.0 if seg_sq == 0.0 else min(max(
            ((pose.x - ax) * ex + (pose.y - ay) * ey) / seg_sq, 0.0), 1.0)
        d = math.hypot(pose.x - (ax + t * ex), pose.y - (ay + t * ey))
        if d < best_d:
            best_d = d
            best_s = arc[i] + t * math.sqrt(seg_sq)
    target = best_s + lookahead
    for i in range(len(wp)):
        if arc[i] >= target:
            return wp[i]
    return wp[-1]


def plan_local(cfg: DwaConfig, current_twist: Twist2D, pose: Pose2D,
               local_cm: Costmap, global_path: GlobalPath) -> DwaChoice:
    """Best admissible twist in the dynamic window.

    Samples enumerate row-major over (v, vy, omega) axes. Raises
    LocalMinimumError when every sample collides or fails the
    stopping-distance check. Ties on the total score break toward smaller
    |omega|, then smaller v, then smaller signed omega, then sample order.
    """
    if len(global_path) == 0:
        raise ValueError("global path must be non-empty")
    (v_lo, v_hi), (vy_lo, vy_hi), (w_lo, w_hi) = dynamic_window(cfg, current_twist)
    axis_v = sample_axis(v_lo, v_hi, cfg.n_v)
    axis_vy = sample_axis(vy_lo, vy_hi, cfg.n_vy)
    axis_w = sample_axis(w_lo, w_hi, cfg.n_omega)
    grid_v, grid_vy, grid_w = np.meshgrid(axis_v, axis_vy, axis_w, indexing="ij")
    v = grid_v.reshape(-1)
    vy = grid_vy.reshape(-1)
    w = grid_w.reshape(-1)

    times = cfg.sim_dt * np.arange(1, int(round(cfg.sim_horizon / cfg.sim_dt)) + 1)
    target = pursuit_waypoint(global_path, pose, cfg.lookahead)

    s0, c0 = math.sin(pose.theta), math.cos(pose.theta)
    theta = pose.theta + w[:, None] * times
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_arc = pose.x + (v[:, None] * (sin_t - s0) + vy[:, None] * (cos_t - c0)) / w[:, None]
        y_arc = pose.y + (-v[:, None] * (cos_t - c0) + vy[:, None] * (sin_t - s0)) / w[:, None]
    x_line = pose.x + (v[:, None] * c0 - vy[:, None] * s0) * times
    y_line = pose.y + (v[:, None] * s0 + vy[:, None] * c0) * times
    straight = (np.abs(w) < 1e-9)[:, None]
    x = np.where(straight, x_line, x_arc)
    y = np.where(straight, y_line, y_arc)

    n_samples, n_steps = x.shape
    points = np.stack((x.reshape(-1), y.reshape(-1)), axis=1)
    costs = local_cm.costs_of_points(points).reshape(n_samples, n_steps)
    collision_free = costs.max(axis=1) < INSCRIBED
    clearance = local_cm.distance_proxy(costs).min(axis=1)
    margin = np.maximum(clearance - local_cm.config.inscribed_radius, 0.0)
    speed = np.sqrt(v * v + vy * vy)
    admissible = collision_free & (speed <= np.sqrt(2.0 * cfg.accel_v * margin))
    idx = np.nonzero(admissible)[0]
    if idx.size == 0:
        raise LocalMinimumError("no admissible velocity sample")

    headings = np.empty(idx.size)
    for j, i in enumerate(idx):
        bearing = math.atan2(target[1] - y[i, -1], target[0] - x[i, -1])
        headings[j] = math.pi - abs(normalize_angle(bearing - theta[i, -1]))

    def norm(values: np.ndarray) -> np.ndarray:
        span = values.max() - values.min()
        if span < 1e-12:
            return np.zeros_like(values)
        return (values - values.min()) / span

    scores = (cfg.w_heading * norm(headings)
              + cfg.w_clearance * norm(clearance[idx])
              + cfg.w_velocity * norm(speed[idx]))

    best_j = 0
    best_key = None
    for j, i in enumerate(idx):
        key = (scores[j], -abs(w[i]), -v[i], -w[i])
        if best_key is None or key > best_key:
            best_j, best_key = j, key

    i = idx[best_j]
    trajectory = np.vstack((
        [pose.x, pose.y, pose.theta],
        np.column_stack((x[i], y[i], theta[i])),
    ))
    return DwaChoice(twist=Twist2D(v[i], vy[i], w[i]), score=float(scores[best_j]),
                     trajectory=trajectory, admissible_count=int(idx.size))
