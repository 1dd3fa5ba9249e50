"""Deterministic 2D plant and sensor simulator.

The plant maps per-actuator PWM duty to achieved actuator speed through the
supply voltage: speed_i = gamma * duty_i * v_now, optionally perturbed by
multiplicative Gaussian noise. Body twist follows from the actuator layout
(differential drive or a 4-actuator planar mixer), is rate-limited by the
acceleration bounds, and is integrated exactly along a circular arc. The
robot is a disc; contact with any obstacle segment stops translation at the
contact point but never blocks rotation.

All randomness flows through one `numpy` generator owned by the Simulator,
so a fixed seed and command stream reproduce a run bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import LaserScan, Pose2D, Twist2D, integrate_twist
from .world import World

DIFFDRIVE = "diffdrive"
QUADPLANAR = "quadplanar"

# Columns (vx, vy, omega) -> 4 actuator speeds; columns are orthogonal so the
# pseudo-inverse recovers the twist exactly.
DEFAULT_MIXING = 0.5 * np.array(
    [
        [+1.0, +1.0, +1.0],
        [+1.0, -1.0, -1.0],
        [-1.0, +1.0, -1.0],
        [-1.0, -1.0, +1.0],
    ]
)


@dataclass(frozen=True)
class PlantConfig:
    """Actuator layout and physical limits of one robot."""

    kind: str = DIFFDRIVE
    wheel_radius: float = 0.05          # m, diffdrive only
    track_width: float = 0.30           # m, diffdrive only
    mixing_matrix: np.ndarray = field(default_factory=lambda: DEFAULT_MIXING.copy())
    gamma: float = 0.068                # (m/s) per (duty * volt)
    v_max: float = 0.5                  # m/s
    omega_max: float = 1.5              # rad/s
    accel_v: float = 1.0                # m/s^2
    accel_omega: float = 3.0            # rad/s^2
    body_radius: float = 0.18           # m, collision disc

    def __post_init__(self):
        if self.kind not in (DIFFDRIVE, QUADPLANAR):
            raise ValueError(f"unknown plant kind {self.kind!r}")
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        if min(self.v_max, self.omega_max, self.accel_v, self.accel_omega) <= 0.0:
            raise ValueError("limits must be positive")
        m = np.asarray(self.mixing_matrix, dtype=float)
        object.__setattr__(self, "mixing_matrix", m)
        if self.kind == QUADPLANAR:
            if m.shape != (4, 3) or np.linalg.matrix_rank(m) != 3:
                raise ValueError("mixing_matrix must be 4x3 with rank 3")

    @property
    def n_actuators(self) -> int:
        return 2 if self.kind == DIFFDRIVE else 4

    @property
    def holonomic(self) -> bool:
        return self.kind == QUADPLANAR


@dataclass(frozen=True)
class BatteryState:
    """Supply voltage with linear droop in integrated current draw."""

    v_nominal: float = 14.8
    v_now: float = 14.8
    capacity_drawn: float = 0.0         # amp-second proxy (sum |duty| * dt)
    droop_rate: float = 0.003           # volts per amp-second proxy

    def drained(self, draw: float) -> "BatteryState":
        drawn = self.capacity_drawn + draw
        v = max(self.v_nominal - self.droop_rate * drawn, 0.05 * self.v_nominal)
        v = min(v, self.v_now)  # monotone even if droop_rate is zero
        return replace(self, v_now=v, capacity_drawn=drawn)


@dataclass(frozen=True)
class SimState:
    """Snapshot of the simulated plant between steps."""

    pose: Pose2D
    twist: Twist2D = Twist2D()
    battery: BatteryState = BatteryState()
    tick: int = 0
    contact_count: int = 0
    fault: bool = False


class Simulator:
    """Steps a plant through a world and renders its LiDAR view.

    noise_* parameters may be set to zero for closed-form checks; defaults
    model a desk-scale scanner (1 cm range sigma) and 2 % actuator speed
    spread.
    """

    def __init__(self, world: World, plant: PlantConfig | None = None,
                 seed: int = 0, n_beams: int = 360, range_max: float = 12.0,
                 range_noise_sigma: float = 0.01, speed_noise_frac: float = 0.02,
                 sensor_offset: Pose2D = Pose2D()):
        self.world = world
        self.plant = plant if plant is not None else PlantConfig()
        self.rng = np.random.default_rng(seed)
        self.seed = int(seed)
        self.n_beams = int(n_beams)
        self.range_max = float(range_max)
        self.range_noise_sigma = float(range_noise_sigma)
        self.speed_noise_frac = float(speed_noise_frac)
        self.sensor_offset = sensor_offset
        self._mixing_pinv = np.linalg.pinv(self.plant.mixing_matrix)

    def initial_state(self, pose: Pose2D, battery: BatteryState | None = None) -> SimState:
        return SimState(pose=pose, battery=battery or BatteryState())

    # -- actuators -----------------------------------------------------------

    def actuator_speeds(self, duties: np.ndarray, v_now: float,
                        with_noise: bool = True) -> np.ndarray:
        """Achieved per-actuator speeds for the given duty command."""
        duties = np.clip(np.asarray(duties, dtype=float), -1.0, 1.0)
        speeds = self.plant.gamma * duties * v_now
        if with_noise and self.speed_noise_frac > 0.0:
            speeds = speeds * (1.0 + self.rng.normal(0.0, self.speed_noise_frac,
                                                     size=speeds.shape))
        return speeds

    def measured_actuator_speeds(self, state: SimState, cmd: np.ndarray) -> np.ndarray:
        """Plant-side achieved speeds; test oracle only, never stack input."""
        return self.actuator_speeds(cmd, state.battery.v_now)

    def _twist_from_speeds(self, speeds: np.ndarray) -> Twist2D:
        if self.plant.kind == DIFFDRIVE:
            left, right = speeds
            return Twist2D((left + right) / 2.0, 0.0,
                           (right - left) / self.plant.track_width)
        vx, vy, omega = self._mixing_pinv @ speeds
        return Twist2D(vx, vy, omega)

    def _limit_twist(self, target: Twist2D, current: Twist2D, dt: float) -> Twist2D:
        p = self.plant
        speed = math.hypot(target.vx, target.vy)
        scale = p.v_max / speed if speed > p.v_max else 1.0
        tx, ty = target.vx * scale, target.vy * scale
        tw = max(-p.omega_max, min(p.omega_max, target.omega))
        dv = p.accel_v * dt
        dw = p.accel_omega * dt
        return Twist2D(
            current.vx + max(-dv, min(dv, tx - current.vx)),
            current.vy + max(-dv, min(dv, ty - current.vy)),
            current.omega + max(-dw, min(dw, tw - current.omega)),
        )

    # -- stepping --------------------------------------------------------------

    def step(self, state: SimState, cmd: np.ndarray, dt: float) -> SimState:
        """Advance the plant by dt seconds under a duty command."""
        if not (0.0 < dt <= 0.1):
            raise ValueError("dt must lie in (0, 0.1]")
        cmd = np.asarray(cmd, dtype=float)
        if cmd.shape != (self.plant.n_actuators,) or not np.all(np.isfinite(cmd)):
            return replace(state, fault=True)

        speeds = self.actuator_speeds(cmd, state.battery.v_now)
        twist = self._limit_twist(self._twist_from_speeds(speeds), state.twist, dt)

        delta = integrate_twist(twist, dt)
        candidate = state.pose.compose(delta)
        pose, hit = self._resolve_contact(state.pose, candidate)
        if hit:
            twist = Twist2D(0.0, 0.0, twist.omega)

        battery = state.battery.drained(float(np.sum(np.abs(cmd))) * dt)
        return SimState(
            pose=pose,
            twist=twist,
            battery=battery,
            tick=state.tick + 1,
            contact_count=state.contact_count + (1 if hit else 0),
            fault=False,
        )

    def _clearance(self, x: float, y: float) -> float:
        return point_segments_distance(x, y, self.world.segments)

    def _resolve_contact(self, old: Pose2D, new: Pose2D) -> tuple[Pose2D, bool]:
        """Stop translation at the first obstacle contact; keep the rotation."""
        radius = self.plant.body_radius
        if self.world.n_segments == 0 or self._clearance(new.x, new.y) >= radius:
            return new, False
        lo, hi = 0.0, 1.0
        if self._clearance(old.x, old.y) < radius:
            lo = -1.0  # already in contact before moving: hold position
        else:
            for _ in range(24):
                mid = 0.5 * (lo + hi)
                x = old.x + mid * (new.x - old.x)
                y = old.y + mid * (new.y - old.y)
                if self._clearance(x, y) >= radius:
                    lo = mid
                else:
                    hi = mid
        s = max(lo, 0.0)
        return Pose2D(old.x + s * (new.x - old.x),
                      old.y + s * (new.y - old.y), new.theta), True

    # -- LiDAR -----------------------------------------------------------------

    def scan(self, state: SimState, timestamp: float) -> LaserScan:
        sensor_pose = state.pose.compose(self.sensor_offset)
        return raycast_scan(self.world, sensor_pose, self.n_beams, self.range_max,
                            self.range_noise_sigma, self.rng, timestamp=timestamp)


def raycast_scan(world: World, sensor_pose: Pose2D, n_beams: int, range_max: float,
                 noise_sigma: float, rng: np.random.Generator | None = None,
                 angle_min: float = -math.pi, timestamp: float = 0.0) -> LaserScan:
    """Cast evenly spaced beams against the world's segments.

    Beam i leaves at bearing angle_min + i * increment in the sensor frame;
    its range is the nearest segment intersection plus Gaussian noise,
    clamped to [0, range_max]. Beams that hit nothing read exactly range_max.
    """
    if n_beams < 8:
        raise ValueError("a scan needs at least 8 beams")
    increment = 2.0 * math.pi / n_beams
    bearings = angle_min + increment * np.arange(n_beams)
    angles = sensor_pose.theta + bearings
    dirs = np.column_stack((np.cos(angles), np.sin(angles)))

    ranges = np.full(n_beams, range_max)
    segments = world.segments
    if segments.shape[0] > 0:
        p1 = segments[:, 0:2]
        edge = segments[:, 2:4] - p1
        q = p1 - np.array([sensor_pose.x, sensor_pose.y])
        # denom[b, s] = dirs[b] x edge[s]; parallel rays never intersect
        denom = dirs[:, 0:1] * edge[:, 1] - dirs[:, 1:2] * edge[:, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (q[:, 0] * edge[:, 1] - q[:, 1] * edge[:, 0]) / denom
            u = (q[:, 0] * dirs[:, 1:2] - q[:, 1] * dirs[:, 0:1]) / denom
        valid = (np.abs(denom) > 1e-12) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
        t = np.where(valid, t, np.inf)
        nearest = t.min(axis=1)
        hit = np.isfinite(nearest)
        ranges[hit] = nearest[hit]

    if noise_sigma > 0.0 and rng is not None:
        hit = ranges < range_max
        ranges[hit] += rng.normal(0.0, noise_sigma, size=int(hit.sum()))
    np.clip(ranges, 0.0, range_max, out=ranges)
    return LaserScan(timestamp=timestamp, angle_min=angle_min,
                     angle_increment=increment, range_max=range_max, ranges=ranges)


def point_segments_distance(x: float, y: float, segments: np.ndarray) -> float:
    """Minimum distance from a point to any segment (inf when none exist)."""
    if segments.shape[0] == 0:
        return math.inf
    p1 = segments[:, 0:2]
    edge = segments[:, 2:4] - p1
    rel = np.array([x, y]) - p1
    length_sq = np.einsum("ij,ij->i", edge, edge)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.einsum("ij,ij->i", rel, edge) / length_sq
    t = np.clip(np.where(length_sq > 0.0, t, 0.0), 0.0, 1.0)
    d = np.hypot(rel[:, 0] - t * edge[:, 0], rel[:, 1] - t * edge[:, 1])
    return float(d.min())
