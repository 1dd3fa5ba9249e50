"""Traversal-cost grids by obstacle inflation.

Costs live on an integer lattice 0..254: LETHAL (254) on obstacle cells,
INSCRIBED (253) wherever the robot disc would overlap one, then an
exponential decay 252 * exp(-decay * (d - inscribed_radius)) out to the
inflation radius, and 0 beyond. The decay is invertible, so a cell cost
doubles as a distance-to-obstacle proxy for the local planner.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .geometry import GridGeometry, LaserScan, OccupancyGrid, Pose2D

LETHAL = 254
INSCRIBED = 253


@dataclass(frozen=True)
class CostmapConfig:
    inscribed_radius: float = 0.18      # m, robot disc radius
    inflation_radius: float = 0.55      # m
    decay: float = 10.0                 # 1/m
    occupied_threshold: float = 0.65
    free_threshold: float = 0.25
    lethal_unknown: bool = True         # unexplored cells are untraversable
    window_size: float = 4.0            # m, local rolling window
    resolution: float = 0.05            # m/cell, local window only


class Costmap(GridGeometry):
    """Per-cell traversal penalty on the 0..254 lattice."""

    def __init__(self, resolution: float, origin: Pose2D, width: int, height: int,
                 cost: np.ndarray, config: CostmapConfig):
        self.resolution = float(resolution)
        self.origin = origin
        self.width = int(width)
        self.height = int(height)
        if cost.shape != (self.height, self.width):
            raise ValueError("cost shape does not match width/height")
        self.cost = cost.astype(np.uint8, copy=False)
        self.config = config

    def cost_at(self, x: float, y: float) -> int:
        ix, iy = self.world_to_cell(x, y)
        return int(self.cost[iy, ix])

    def costs_of_points(self, points: np.ndarray,
                        outside: int = 0) -> np.ndarray:
        """Vectorized cost lookup; points beyond the grid read `outside`."""
        ix, iy, ok = self.cells_of_points(points)
        out = np.full(points.shape[0], outside, dtype=np.int64)
        out[ok] = self.cost[iy[ok], ix[ok]]
        return out

    def distance_proxy(self, costs: np.ndarray) -> np.ndarray:
        """Invert the inflation curve: cost -> distance to the nearest lethal cell.

        Zero-cost cells read as the inflation radius (the cap), lethal and
        inscribed cells as zero. Values come from a per-cost table built with
        scalar math so lookups are reproducible independent of array shape.
        """
        table = self._proxy_table()
        return table[np.asarray(costs, dtype=np.int64)]

    def _proxy_table(self) -> np.ndarray:
        if getattr(self, "_proxy_cache", None) is None:
            cfg = self.config
            table = np.empty(255)
            for c in range(255):
                if c == 0:
                    d = cfg.inflation_radius
                elif c >= INSCRIBED:
                    d = 0.0
                else:
                    d = cfg.inscribed_radius - math.log(min(c, 252) / 252.0) / cfg.decay
                table[c] = min(d, cfg.inflation_radius)
            self._proxy_cache = table
        return self._proxy_cache


def inflate(lethal: np.ndarray, resolution: float, cfg: CostmapConfig) -> np.ndarray:
    """Cost array from a boolean lethal mask (shared by global and local builds)."""
    cost = np.zeros(lethal.shape, dtype=np.uint8)
    if not lethal.any():
        return cost
    d = ndimage.distance_transform_edt(~lethal) * resolution
    decayed = np.round(252.0 * np.exp(-cfg.decay * (d - cfg.inscribed_radius)))
    cost = np.where(d <= cfg.inflation_radius,
                    np.minimum(decayed, 252.0), 0.0)
    cost[d <= cfg.inscribed_radius + 1e-9] = INSCRIBED
    cost[lethal] = LETHAL
    return cost.astype(np.uint8)


def build_global_costmap(grid: OccupancyGrid,
                         cfg: CostmapConfig = CostmapConfig()) -> Costmap:
    """Inflate the static map; cells above the occupancy threshold are lethal.

    With `lethal_unknown` set (the default), unexplored cells are lethal
    too, so plans never cross space the map has no evidence about.
    """
    lethal = grid.occupied_mask(cfg.occupied_threshold)
    if cfg.lethal_unknown:
        lethal = ~grid.free_mask(cfg.free_threshold)
    cost = inflate(lethal, grid.resolution, cfg)
    return Costmap(grid.resolution, grid.origin, grid.width, grid.height, cost, cfg)


def build_local_costmap(scan: LaserScan, robot_pose: Pose2D,
                        cfg: CostmapConfig = CostmapConfig(),
                        sensor_offset: Pose2D = Pose2D()) -> Costmap:
    """Scan-only rolling window centered on the robot.

    The window origin snaps to the cost resolution so consecutive windows
    differ by whole cells; the static map is deliberately ignored.
    """
    if not robot_pose.is_finite():
        raise ValueError("robot pose must be finite")
    res = cfg.resolution
    half = cfg.window_size / 2.0
    ox = math.floor((robot_pose.x - half) / res) * res
    oy = math.floor((robot_pose.y - half) / res) * res
    n = int(round(cfg.window_size / res))
    origin = Pose2D(ox, oy, 0.0)

    lethal = np.zeros((n, n), dtype=bool)
    window = Costmap(res, origin, n, n, lethal.astype(np.uint8), cfg)
    sensor_pose = robot_pose.compose(sensor_offset)
    hits = scan.points()
    if hits.shape[0] > 0:
        world_pts = sensor_pose.transform_points(hits)
        ix, iy, ok = window.cells_of_points(world_pts)
        lethal[iy[ok], ix[ok]] = True
    cost = inflate(lethal, res, cfg)
    return Costmap(res, origin, n, n, cost, cfg)
