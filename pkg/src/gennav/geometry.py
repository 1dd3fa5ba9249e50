"""Planar geometry, scan, and grid primitives shared by every layer.

Conventions
-----------
x forward, y left, angles in radians measured counter-clockwise from +x.
Headings are always normalized to (-pi, pi]. All distances are meters.
Instances are treated as immutable values: operations return new objects,
and grid arrays must not be mutated once a grid has been handed out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfBoundsError

TAU = 2.0 * math.pi

# Log-odds saturation bounds; p ~ 0.99995 at +10.
LOG_ODDS_MIN = -10.0
LOG_ODDS_MAX = 10.0


def normalize_angle(angle):
    """Wrap an angle (scalar or ndarray) to (-pi, pi]."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + np.pi, TAU) - np.pi
    wrapped = np.where(wrapped <= -np.pi, wrapped + TAU, wrapped)
    if np.ndim(angle) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True, slots=True)
class Pose2D:
    """Pose in the plane: position (m) and heading (rad, normalized)."""

    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def compose(self, other: "Pose2D") -> "Pose2D":
        """Map `other`, expressed in this pose's frame, into the world frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2D(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )

    def inverse(self) -> "Pose2D":
        """Pose q with self.compose(q) equal to the identity."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose2D(
            -(c * self.x + s * self.y),
            -(-s * self.x + c * self.y),
            -self.theta,
        )

    def delta_to(self, to: "Pose2D") -> "Pose2D":
        """Relative pose d such that self.compose(d) == to."""
        return self.inverse().compose(to)

    def transform_point(self, x: float, y: float) -> tuple[float, float]:
        """Map a point from this pose's frame to the world frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return self.x + c * x - s * y, self.y + s * x + c * y

    def transform_points(self, points: np.ndarray) -> np.ndarray:
        """Map an (N, 2) array of frame-local points to the world frame."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        out = np.empty_like(points, dtype=float)
        out[:, 0] = self.x + c * points[:, 0] - s * points[:, 1]
        out[:, 1] = self.y + s * points[:, 0] + c * points[:, 1]
        return out

    def distance_to(self, other: "Pose2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    @staticmethod
    def from_array(a) -> "Pose2D":
        return Pose2D(float(a[0]), float(a[1]), float(a[2]))

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)


IDENTITY = Pose2D(0.0, 0.0, 0.0)


def compose_many(poses: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Compose an (N, 3) array of poses with an (N, 3) or (3,) array of deltas."""
    delta = np.broadcast_to(np.asarray(delta, dtype=float), poses.shape)
    c, s = np.cos(poses[:, 2]), np.sin(poses[:, 2])
    out = np.empty_like(poses)
    out[:, 0] = poses[:, 0] + c * delta[:, 0] - s * delta[:, 1]
    out[:, 1] = poses[:, 1] + s * delta[:, 0] + c * delta[:, 1]
    out[:, 2] = normalize_angle(poses[:, 2] + delta[:, 2])
    return out


@dataclass(frozen=True, slots=True)
class Twist2D:
    """Body-frame velocity: vx, vy in m/s, omega in rad/s."""

    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0

    def is_finite(self) -> bool:
        return math.isfinite(self.vx) and math.isfinite(self.vy) and math.isfinite(self.omega)

    def as_array(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.omega])

    @staticmethod
    def from_array(a) -> "Twist2D":
        return Twist2D(float(a[0]), float(a[1]), float(a[2]))

    def scaled(self, factor: float) -> "Twist2D":
        return Twist2D(self.vx * factor, self.vy * factor, self.omega * factor)


ZERO_TWIST = Twist2D(0.0, 0.0, 0.0)


def integrate_twist(twist: Twist2D, dt: float) -> Pose2D:
    """Exact displacement of a constant body twist over dt (arc model).

    For |omega| below 1e-9 the straight-line limit is used; otherwise the
    closed-form circular-arc solution, so the result is exact for any dt.
    """
    theta = twist.omega * dt
    if abs(twist.omega) < 1e-9:
        return Pose2D(twist.vx * dt, twist.vy * dt, theta)
    st, ct = math.sin(theta), math.cos(theta)
    dx = (twist.vx * st + twist.vy * (ct - 1.0)) / twist.omega
    dy = (twist.vx * (1.0 - ct) + twist.vy * st) / twist.omega
    return Pose2D(dx, dy, theta)


@dataclass(frozen=True, eq=False)
class LaserScan:
    """One planar range scan: bearing-indexed ranges with a timestamp.

    No-return beams are encoded as exactly `range_max`; there is no NaN
    sentinel anywhere in the stack.
    """

    timestamp: float
    angle_min: float
    angle_increment: float
    range_max: float
    ranges: np.ndarray

    def __post_init__(self):
        ranges = np.asarray(self.ranges, dtype=float)
        if ranges.ndim != 1 or ranges.size < 8:
            raise ValueError("a scan needs at least 8 beams")
        if self.angle_increment <= 0.0:
            raise ValueError("angle_increment must be positive")
        if np.any(ranges < 0.0) or np.any(ranges > self.range_max + 1e-12):
            raise ValueError("ranges must lie in [0, range_max]")
        object.__setattr__(self, "ranges", ranges)

    def __len__(self) -> int:
        return int(self.ranges.size)

    @property
    def bearings(self) -> np.ndarray:
        return self.angle_min + self.angle_increment * np.arange(self.ranges.size)

    def hit_mask(self) -> np.ndarray:
        """True for beams that returned an obstacle (range < range_max)."""
        return self.ranges < self.range_max

    def points(self, mask: np.ndarray | None = None) -> np.ndarray:
        """Cartesian beam endpoints in the sensor frame, (N, 2)."""
        if mask is None:
            mask = self.hit_mask()
        b = self.bearings[mask]
        r = self.ranges[mask]
        return np.column_stack((r * np.cos(b), r * np.sin(b)))


class GridGeometry:
    """Coordinate algebra shared by every grid-shaped product.

    Subclasses provide `resolution`, `origin` (Pose2D of the corner of cell
    (0, 0)), `width`, and `height`. `cells[iy, ix]` covers the world square
    whose lower-left corner is origin + (ix, iy) * resolution.
    """

    resolution: float
    origin: Pose2D
    width: int
    height: int

    def same_geometry(self, other: "GridGeometry") -> bool:
        return (self.width == other.width and self.height == other.height
                and abs(self.resolution - other.resolution) < 1e-12
                and self.origin == other.origin)

    def _to_grid_frame(self, x, y):
        """World coordinates -> grid-aligned metric coordinates."""
        ox, oy, ot = self.origin.x, self.origin.y, self.origin.theta
        dx = np.asarray(x, dtype=float) - ox
        dy = np.asarray(y, dtype=float) - oy
        if ot == 0.0:
            return dx, dy
        c, s = math.cos(ot), math.sin(ot)
        return c * dx + s * dy, -s * dx + c * dy

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        """Cell index (ix, iy) containing a world point.

        Raises OutOfBoundsError for points outside the grid extent; callers
        that expect misses should use `cells_of_points` instead.
        """
        gx, gy = self._to_grid_frame(x, y)
        ix = math.floor(gx / self.resolution)
        iy = math.floor(gy / self.resolution)
        if not (0 <= ix < self.width and 0 <= iy < self.height):
            raise OutOfBoundsError(f"point ({x:.3f}, {y:.3f}) outside grid")
        return ix, iy

    def cells_of_points(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized world->cell for an (N, 2) array.

        Returns (ix, iy, in_bounds); indices are only valid where in_bounds.
        """
        gx, gy = self._to_grid_frame(points[:, 0], points[:, 1])
        ix = np.floor(gx / self.resolution).astype(np.int64)
        iy = np.floor(gy / self.resolution).astype(np.int64)
        ok = (ix >= 0) & (ix < self.width) & (iy >= 0) & (iy < self.height)
        return ix, iy, ok

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        if not (0 <= ix < self.width and 0 <= iy < self.height):
            raise OutOfBoundsError(f"cell ({ix}, {iy}) outside grid")
        gx = (ix + 0.5) * self.resolution
        gy = (iy + 0.5) * self.resolution
        return self.origin.transform_point(gx, gy)

    def contains(self, x: float, y: float) -> bool:
        gx, gy = self._to_grid_frame(x, y)
        return (0.0 <= gx < self.width * self.resolution
                and 0.0 <= gy < self.height * self.resolution)


class OccupancyGrid(GridGeometry):
    """Row-major log-odds occupancy grid.

    Log-odds are clamped to [LOG_ODDS_MIN, LOG_ODDS_MAX]; the clamp keeps
    accumulation bounded while staying reversible by later evidence.
    """

    def __init__(self, resolution: float, origin: Pose2D, width: int, height: int,
                 log_odds: np.ndarray | None = None):
        if resolution <= 0.0:
            raise ValueError("resolution must be positive")
        if width < 1 or height < 1:
            raise ValueError("grid extent must be at least 1x1")
        self.resolution = float(resolution)
        self.origin = origin
        self.width = int(width)
        self.height = int(height)
        if log_odds is None:
            log_odds = np.zeros((self.height, self.width))
        log_odds = np.asarray(log_odds, dtype=float)
        if log_odds.shape != (self.height, self.width):
            raise ValueError("log_odds shape does not match width/height")
        self.log_odds = np.clip(log_odds, LOG_ODDS_MIN, LOG_ODDS_MAX)

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.resolution, self.origin, self.width, self.height,
                             self.log_odds.copy())

    def clip_log_odds(self) -> None:
        np.clip(self.log_odds, LOG_ODDS_MIN, LOG_ODDS_MAX, out=self.log_odds)

    # -- occupancy views ---------------------------------------------------

    def probabilities(self) -> np.ndarray:
        """Per-cell occupancy probability, 1 / (1 + exp(-log_odds))."""
        return 1.0 / (1.0 + np.exp(-self.log_odds))

    def occupied_mask(self, threshold: float = 0.65) -> np.ndarray:
        return self.probabilities() > threshold

    def free_mask(self, threshold: float = 0.25) -> np.ndarray:
        return self.probabilities() < threshold

    @staticmethod
    def blank(resolution: float, origin: Pose2D, width: int, height: int) -> "OccupancyGrid":
        return OccupancyGrid(resolution, origin, width, height)
