"""Occupancy-grid SLAM: a particle filter whose particles each carry a map.

Each update propagates the particles by the odometry delta plus sampled
noise, refines every pose by greedy hill climbing on the scan's likelihood
against that particle's own map, reweights by the matched likelihood, and
folds the scan into the per-particle grid with the inverse sensor model
(free-space decrements along each beam, one occupancy increment at the
endpoint). Low-variance resampling runs when the effective sample size
falls below a configurable fraction of the particle count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import OutOfBoundsError
from .geometry import LaserScan, OccupancyGrid, Pose2D, normalize_angle
from .localization import effective_sample_size, low_variance_resample


@dataclass(frozen=True)
class MapperConfig:
    n_particles: int = 15
    resolution: float = 0.05            # m/cell
    l_occ: float = 0.6                  # log-odds increment at beam endpoints
    l_free: float = -0.4                # log-odds decrement along beams
    resample_threshold: float = 0.5     # resample when N_eff < threshold * N
    refine_window: tuple = (0.1, 0.1, 0.1)   # (m, m, rad) search extents
    refine_steps: tuple = ((0.05, math.radians(2.0)),
                           (0.025, math.radians(1.0)),
                           (0.0125, math.radians(0.5)),
                           (0.00625, math.radians(0.25)))
    refine_rounds_iters: int = 5
    match_sigma: float = 0.04           # m, scan-match likelihood width
    match_decimation: int = 1
    z_hit: float = 0.95
    z_rand: float = 0.05
    occupied_threshold: float = 0.65
    # sigma_trans = a[0]*|trans| + a[1]*|rot|; sigma_rot = a[2]*|rot| + a[3]*|trans|
    noise_coeffs: tuple = (0.08, 0.005, 0.1, 0.02)

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if not (self.l_occ > 0.0 > self.l_free):
            raise ValueError("l_occ must be positive and l_free negative")


@dataclass
class MapParticle:
    pose: Pose2D
    weight: float
    grid: OccupancyGrid


def ray_cells(grid: OccupancyGrid, from_point, to_point) -> list[tuple[int, int]]:
    """Ordered 8-connected cell chain between two world points, inclusive.

    Both points must be in bounds. The chain is generated by stepped linear
    interpolation across cell indices with round-half-up, so it is
    deterministic and free of duplicates.
    """
    x0, y0 = grid.world_to_cell(from_point[0], from_point[1])
    x1, y1 = grid.world_to_cell(to_point[0], to_point[1])
    n = max(abs(x1 - x0), abs(y1 - y0))
    if n == 0:
        return [(x0, y0)]
    ks = np.arange(n + 1)
    xs = x0 + np.floor(ks * (x1 - x0) / n + 0.5).astype(int)
    ys = y0 + np.floor(ks * (y1 - y0) / n + 0.5).astype(int)
    return list(zip(xs.tolist(), ys.tolist()))


def integrate_scan(grid: OccupancyGrid, sensor_pose: Pose2D, scan: LaserScan,
                   l_occ: float, l_free: float) -> None:
    """Fold one scan into a grid with the inverse sensor model.

    Per scan, every traversed cell receives at most one l_free and every
    endpoint cell at most one l_occ; a cell that is both (grazing beams)
    keeps the occupancy evidence. Beams reading range_max contribute free
    space along their whole length and no endpoint.
    """
    try:
        ox, oy = grid.world_to_cell(sensor_pose.x, sensor_pose.y)
    except OutOfBoundsError:
        return

    bearings = sensor_pose.theta + scan.bearings
    ends = np.column_stack((
        sensor_pose.x + scan.ranges * np.cos(bearings),
        sensor_pose.y + scan.ranges * np.sin(bearings),
    ))
    # Raw endpoint cell indices parametrize each beam's traversal; they may
    # lie outside the grid, in which case the in-bounds mask trims the tail.
    ex, ey, e_ok = grid.cells_of_points(ends)

    dx = ex - ox
    dy = ey - oy
    steps = np.maximum(np.abs(dx), np.abs(dy))
    max_steps = int(steps.max(initial=0))
    hit = scan.hit_mask() & e_ok

    free_flat: list[np.ndarray] = []
    if max_steps > 0:
        ks = np.arange(max_steps + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            fx = ox + np.floor(ks[None, :] * (dx[:, None] / np.maximum(steps, 1)[:, None]) + 0.5).astype(np.int64)
            fy = oy + np.floor(ks[None, :] * (dy[:, None] / np.maximum(steps, 1)[:, None]) + 0.5).astype(np.int64)
        # Valid traversal: step index within the beam, inside the grid, and
        # short of the endpoint cell for hit beams (k < steps), through the
        # final cell for misses (k <= steps).
        limit = np.where(hit, steps, steps + 1)
        valid = (ks[None, :] < limit[:, None]) \
            & (fx >= 0) & (fx < grid.width) & (fy >= 0) & (fy < grid.height)
        free_flat.append((fy[valid] * grid.width + fx[valid]))

    if free_flat:
        free_cells = np.unique(np.concatenate(free_flat))
    else:
        free_cells = np.array([], dtype=np.int64)
    occ_cells = np.unique(ey[hit] * grid.width + ex[hit])
    free_cells = np.setdiff1d(free_cells, occ_cells, assume_unique=True)

    flat = grid.log_odds.reshape(-1)
    flat[free_cells] += l_free
    flat[occ_cells] += l_occ
    grid.clip_log_odds()


class GridMapper:
    """Rao-Blackwellized particle filter over (pose, map) hypotheses."""

    def __init__(self, origin: Pose2D, width: int, height: int,
                 cfg: MapperConfig = MapperConfig(), seed: int = 0,
                 start_pose: Pose2D = Pose2D(), sensor_offset: Pose2D = Pose2D()):
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)
        self.sensor_offset = sensor_offset
        blank = OccupancyGrid.blank(cfg.resolution, origin, width, height)
        self.particles = [
            MapParticle(pose=start_pose, weight=1.0 / cfg.n_particles,
                        grid=blank.copy())
            for _ in range(cfg.n_particles)
        ]
        self.updates = 0
        self.resamples = 0

    # -- scan matching -------------------------------------------------------

    def _match_points(self, scan: LaserScan) -> np.ndarray:
        pts = scan.points()[:: self.cfg.match_decimation]
        if self.sensor_offset != Pose2D():
            pts = self.sensor_offset.transform_points(pts)
        return pts

    def _distance_field(self, grid: OccupancyGrid) -> np.ndarray | None:
        occupied = grid.occupied_mask(self.cfg.occupied_threshold)
        if not occupied.any():
            return None
        return ndimage.distance_transform_edt(~occupied) * grid.resolution

    def _score_poses(self, grid: OccupancyGrid, dist: np.ndarray,
                     poses: np.ndarray, pts: np.ndarray,
                     range_max: float) -> np.ndarray:
        """Log likelihood of the scan points for a (K, 3) pose batch."""
        c, s = np.cos(poses[:, 2]), np.sin(poses[:, 2])
        ex = poses[:, 0:1] + c[:, None] * pts[:, 0] - s[:, None] * pts[:, 1]
        ey = poses[:, 1:2] + s[:, None] * pts[:, 0] + c[:, None] * pts[:, 1]
        gx = ex - grid.origin.x
        gy = ey - grid.origin.y
        cx = np.clip(gx / grid.resolution - 0.5, 0.0, grid.width - 1.0)
        cy = np.clip(gy / grid.resolution - 0.5, 0.0, grid.height - 1.0)
        x0 = np.clip(np.floor(cx).astype(np.int64), 0, grid.width - 2)
        y0 = np.clip(np.floor(cy).astype(np.int64), 0, grid.height - 2)
        fx, fy = cx - x0, cy - y0
        bottom = dist[y0, x0] * (1 - fx) + dist[y0, x0 + 1] * fx
        top = dist[y0 + 1, x0] * (1 - fx) + dist[y0 + 1, x0 + 1] * fx
        d = bottom * (1 - fy) + top * fy
        gauss = self.cfg.z_hit * np.exp(-0.5 * (d / self.cfg.match_sigma) ** 2)
        return np.log(gauss + self.cfg.z_rand / range_max).sum(axis=1)

    def _refine(self, grid: OccupancyGrid, dist: np.ndarray, pose: Pose2D,
                pts: np.ndarray, range_max: float) -> tuple[Pose2D, float]:
        """Greedy hill climb on the match score around the propagated pose."""
        wx, wy, wt = self.cfg.refine_window
        center = pose.as_array()
        anchor = center.copy()
        offsets = np.array([(dx, dy, dt)
                            for dx in (-1, 0, 1)
                            for dy in (-1, 0, 1)
                            for dt in (-1, 0, 1)], dtype=float)
        score = float(self._score_poses(grid, dist, center[None, :], pts, range_max)[0])
        for step_xy, step_t in self.cfg.refine_steps:
            for _ in range(self.cfg.refine_rounds_iters):
                cand = center[None, :] + offsets * np.array([step_xy, step_xy, step_t])
                cand[:, 0] = np.clip(cand[:, 0], anchor[0] - wx, anchor[0] + wx)
                cand[:, 1] = np.clip(cand[:, 1], anchor[1] - wy, anchor[1] + wy)
                cand[:, 2] = np.clip(cand[:, 2], anchor[2] - wt, anchor[2] + wt)
                scores = self._score_poses(grid, dist, cand, pts, range_max)
                best = int(np.argmax(scores))
                if scores[best] <= score + 1e-12:
                    break
                score = float(scores[best])
                center = cand[best]
        return Pose2D(center[0], center[1], normalize_angle(center[2])), score

    # -- filter update ---------------------------------------------------------

    def update(self, odom_delta: Pose2D, scan: LaserScan) -> dict:
        """One SLAM step: propagate, refine, reweight, map, maybe resample."""
        if not odom_delta.is_finite():
            raise ValueError("odometry delta must be finite")
        cfg = self.cfg
        trans = math.hypot(odom_delta.x, odom_delta.y)
        rot = abs(odom_delta.theta)
        sigma_t = cfg.noise_coeffs[0] * trans + cfg.noise_coeffs[1] * rot
        sigma_r = cfg.noise_coeffs[2] * rot + cfg.noise_coeffs[3] * trans

        pts = self._match_points(scan)
        log_weights = np.empty(len(self.particles))
        for i, particle in enumerate(self.particles):
            noise = Pose2D(
                self.rng.normal(0.0, sigma_t) if sigma_t > 0 else 0.0,
                self.rng.normal(0.0, sigma_t) if sigma_t > 0 else 0.0,
                self.rng.normal(0.0, sigma_r) if sigma_r > 0 else 0.0,
            )
            pose = particle.pose.compose(odom_delta).compose(noise)
            dist = self._distance_field(particle.grid)
            if dist is not None and pts.shape[0] >= 10:
                pose, score = self._refine(particle.grid, dist, pose, pts,
                                           scan.range_max)
                log_weights[i] = score
            else:
                log_weights[i] = 0.0
            particle.pose = pose
            sensor_pose = pose.compose(self.sensor_offset)
            integrate_scan(particle.grid, sensor_pose, scan, cfg.l_occ, cfg.l_free)

        weights = np.array([p.weight for p in self.particles])
        log_post = np.log(np.maximum(weights, 1e-300)) + log_weights
        log_post -= log_post.max()
        weights = np.exp(log_post)
        weights /= weights.sum()
        for particle, w in zip(self.particles, weights):
            particle.weight = float(w)

        n_eff = effective_sample_size(weights)
        resampled = False
        if n_eff < cfg.resample_threshold * cfg.n_particles:
            picks = low_variance_resample(weights, self.rng)
            self.particles = [
                MapParticle(pose=self.particles[j].pose,
                            weight=1.0 / cfg.n_particles,
                            grid=self.particles[j].grid.copy())
                for j in picks
            ]
            self.resamples += 1
            resampled = True
        self.updates += 1
        return {"n_eff": n_eff, "resampled": resampled}

    # -- products ---------------------------------------------------------------

    def best_particle(self) -> MapParticle:
        if not self.particles:
            raise ValueError("mapper has no particles")
        weights = np.array([p.weight for p in self.particles])
        return self.particles[int(np.argmax(weights))]

    def best_map(self) -> OccupancyGrid:
        return self.best_particle().grid

    def n_eff(self) -> float:
        return effective_sample_size(np.array([p.weight for p in self.particles]))


def map_iou(candidate: OccupancyGrid, reference: OccupancyGrid,
            threshold: float = 0.65) -> float:
    """Occupied-cell intersection-over-union between two aligned grids."""
    if not candidate.same_geometry(reference):
        raise ValueError("grids must share geometry")
    a = candidate.occupied_mask(threshold)
    b = reference.occupied_mask(threshold)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)
