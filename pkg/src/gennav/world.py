"""Static 2D worlds: line-segment obstacles, named spawn poses, rasterization.

World files are JSON: `{"segments": [[x1, y1, x2, y2], ...],
"spawns": {"name": [x, y, theta]}}`. The bundled `fig5_world.json` is a
10 x 10 m walled square containing two 1 x 1 m blocks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .geometry import OccupancyGrid, Pose2D


@dataclass(frozen=True)
class World:
    """Immutable set of obstacle segments plus named spawn poses."""

    segments: np.ndarray  # (S, 4) rows of (x1, y1, x2, y2), meters
    spawns: dict = field(default_factory=dict)

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=float).reshape(-1, 4)
        if not np.all(np.isfinite(seg)):
            raise ValueError("world segments must be finite")
        object.__setattr__(self, "segments", seg)

    @property
    def n_segments(self) -> int:
        return int(self.segments.shape[0])

    def spawn(self, name: str) -> Pose2D:
        x, y, theta = self.spawns[name]
        return Pose2D(x, y, theta)

    def bounds(self) -> tuple[float, float, float, float]:
        """Axis-aligned (xmin, ymin, xmax, ymax) over all segments."""
        xs = self.segments[:, (0, 2)]
        ys = self.segments[:, (1, 3)]
        return float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())

    # -- persistence -------------------------------------------------------

    @staticmethod
    def from_json(text: str) -> "World":
        data = json.loads(text)
        return World(
            segments=np.asarray(data["segments"], dtype=float),
            spawns={k: tuple(v) for k, v in data.get("spawns", {}).items()},
        )

    @staticmethod
    def load(path: str | Path) -> "World":
        return World.from_json(Path(path).read_text())

    def to_json(self) -> str:
        return json.dumps(
            {
                "segments": [[float(v) for v in row] for row in self.segments],
                "spawns": {k: list(v) for k, v in self.spawns.items()},
            },
            indent=2,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    # -- ground-truth rasterization -----------------------------------------

    def rasterize(self, resolution: float, origin: Pose2D,
                  width: int, height: int) -> OccupancyGrid:
        """Ground-truth raster: segment cells occupied, reachable space free.

        Free space is flood-filled from the spawn poses (falling back to the
        bounds center), so enclosed obstacle interiors and the outside of
        the walls stay unknown, exactly as a perfect mapping run would leave
        them.
        """
        from scipy import ndimage

        grid = OccupancyGrid.blank(resolution, origin, width, height)
        occupied = np.zeros((height, width), dtype=bool)
        step = resolution * 0.25
        for x1, y1, x2, y2 in self.segments:
            length = float(np.hypot(x2 - x1, y2 - y1))
            n = max(int(np.ceil(length / step)), 1)
            ts = np.linspace(0.0, 1.0, n + 1)
            pts = np.column_stack((x1 + ts * (x2 - x1), y1 + ts * (y2 - y1)))
            ix, iy, ok = grid.cells_of_points(pts)
            occupied[iy[ok], ix[ok]] = True

        seeds = [tuple(v[:2]) for v in self.spawns.values()]
        if not seeds:
            xmin, ymin, xmax, ymax = self.bounds()
            seeds = [((xmin + xmax) / 2.0, (ymin + ymax) / 2.0)]
        labels, _ = ndimage.label(~occupied)
        free = np.zeros_like(occupied)
        for sx, sy in seeds:
            if grid.contains(sx, sy):
                ix, iy = grid.world_to_cell(sx, sy)
                if labels[iy, ix] > 0:
                    free |= labels == labels[iy, ix]
        grid.log_odds[free] = -10.0
        grid.log_odds[occupied] = 10.0
        return grid


def grid_geometry_for(world: World, resolution: float,
                      margin: float = 0.5) -> tuple[Pose2D, int, int]:
    """Origin and cell extent of a grid covering the world plus a margin.

    The origin is shifted by half a cell so that walls lying on multiples of
    the resolution run through cell centers; endpoint noise then cannot
    split one wall across two cell rows.
    """
    xmin, ymin, xmax, ymax = world.bounds()
    origin = Pose2D(xmin - margin - resolution / 2.0,
                    ymin - margin - resolution / 2.0, 0.0)
    width = int(np.ceil((xmax - xmin + 2 * margin) / resolution)) + 1
    height = int(np.ceil((ymax - ymin + 2 * margin) / resolution)) + 1
    return origin, width, height


def rectangle_segments(x0: float, y0: float, x1: float, y1: float) -> list[list[float]]:
    """Four segments outlining an axis-aligned rectangle."""
    return [
        [x0, y0, x1, y0],
        [x1, y0, x1, y1],
        [x1, y1, x0, y1],
        [x0, y1, x0, y0],
    ]


def load_builtin_world(name: str = "fig5_world") -> World:
    """Load a world bundled with the package (default: the two-block room)."""
    text = resources.files("gennav.data").joinpath(f"{name}.json").read_text()
    return World.from_json(text)
