"""Occupancy map persistence: binary PGM raster plus a YAML sidecar.

The raster is a P5 PGM holding one byte per cell: 0 = occupied, 254 = free,
205 = unknown, thresholded at free < 0.25 < unknown < 0.65 < occupied on the
cell occupancy probability. Image row 0 is the top of the map (largest y),
matching the usual map-image convention. Saving a loaded pair reproduces the
original bytes exactly.
"""
from __future__ import annotations

import io
from pathlib import Path

import numpy as np
import yaml

from .geometry import LOG_ODDS_MAX, LOG_ODDS_MIN, OccupancyGrid, Pose2D

PGM_OCCUPIED = 0
PGM_FREE = 254
PGM_UNKNOWN = 205

OCCUPIED_THRESH = 0.65
FREE_THRESH = 0.25


def grid_to_pgm_bytes(grid: OccupancyGrid,
                      occupied_thresh: float = OCCUPIED_THRESH,
                      free_thresh: float = FREE_THRESH) -> bytes:
    p = grid.probabilities()
    img = np.full(p.shape, PGM_UNKNOWN, dtype=np.uint8)
    img[p > occupied_thresh] = PGM_OCCUPIED
    img[p < free_thresh] = PGM_FREE
    img = img[::-1, :]  # row 0 = top of map
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    return header + img.tobytes()


def pgm_bytes_to_cells(data: bytes) -> np.ndarray:
    """Decode a P5 PGM into a (height, width) uint8 array in grid row order."""
    stream = io.BytesIO(data)

    def next_token() -> bytes:
        tok = b""
        while True:
            ch = stream.read(1)
            if ch == b"":
                raise ValueError("truncated PGM header")
            if ch.isspace():
                if tok:
                    return tok
                continue
            if ch == b"#":  # comment runs to end of line
                stream.readline()
                continue
            tok += ch

    magic = next_token()
    if magic != b"P5":
        raise ValueError(f"not a binary PGM (magic {magic!r})")
    width = int(next_token())
    height = int(next_token())
    maxval = int(next_token())
    if maxval != 255:
        raise ValueError("only 8-bit PGM maps are supported")
    raw = stream.read(width * height)
    if len(raw) != width * height:
        raise ValueError("truncated PGM pixel data")
    img = np.frombuffer(raw, dtype=np.uint8).reshape(height, width)
    return img[::-1, :]  # back to grid row order (row 0 = bottom)


def save_map(grid: OccupancyGrid, stem: str | Path,
             occupied_thresh: float = OCCUPIED_THRESH,
             free_thresh: float = FREE_THRESH) -> tuple[Path, Path]:
    """Write `<stem>.pgm` and `<stem>.yaml`; returns the two paths."""
    stem = Path(stem)
    if stem.suffix in (".pgm", ".yaml", ".yml"):
        stem = stem.with_suffix("")
    pgm_path = stem.with_suffix(".pgm")
    yaml_path = stem.with_suffix(".yaml")
    pgm_path.write_bytes(grid_to_pgm_bytes(grid, occupied_thresh, free_thresh))
    origin = grid.origin
    # Hand-formatted for a deterministic byte-exact round trip.
    yaml_text = (
        f"image: {pgm_path.name}\n"
        f"resolution: {grid.resolution!r}\n"
        f"origin: [{origin.x!r}, {origin.y!r}, {origin.theta!r}]\n"
        f"negate: 0\n"
        f"occupied_thresh: {occupied_thresh!r}\n"
        f"free_thresh: {free_thresh!r}\n"
    )
    yaml_path.write_text(yaml_text)
    return pgm_path, yaml_path


def load_map(path: str | Path) -> OccupancyGrid:
    """Load a PGM+YAML pair; `path` may be the stem or either file."""
    path = Path(path)
    if path.suffix in (".pgm", ""):
        yaml_path = path.with_suffix(".yaml")
    else:
        yaml_path = path
    meta = yaml.safe_load(yaml_path.read_text())
    if int(meta.get("negate", 0)) != 0:
        raise ValueError("negated map images are not supported")
    pgm_path = yaml_path.parent / meta["image"]
    cells = pgm_bytes_to_cells(pgm_path.read_bytes())
    log_odds = np.zeros(cells.shape)
    log_odds[cells == PGM_OCCUPIED] = LOG_ODDS_MAX
    log_odds[cells == PGM_FREE] = LOG_ODDS_MIN
    ox, oy, otheta = meta["origin"]
    return OccupancyGrid(
        resolution=float(meta["resolution"]),
        origin=Pose2D(float(ox), float(oy), float(otheta)),
        width=cells.shape[1],
        height=cells.shape[0],
        log_odds=log_odds,
    )
