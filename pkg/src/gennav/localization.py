"""Monte Carlo localization against a fixed occupancy map.

Particles carry pose hypotheses; the measurement model is a likelihood
field (exact Euclidean distance transform of the occupied cells) evaluated
at decimated beam endpoints, mixed as z_hit * exp(-d^2 / (2 sigma^2)) +
z_rand / range_max and accumulated in log space. Resampling is the
low-variance (systematic) scheme, triggered when the effective sample size
drops below half the particle count.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import FeaturelessMapError
from .geometry import (
    GridGeometry,
    LaserScan,
    OccupancyGrid,
    Pose2D,
    compose_many,
    normalize_angle,
)


class LikelihoodField(GridGeometry):
    """Distance to the nearest occupied cell, sampled bilinearly."""

    def __init__(self, source: OccupancyGrid, distances: np.ndarray,
                 z_hit: float, z_rand: float, sigma_hit: float):
        self.resolution = source.resolution
        self.origin = source.origin
        self.width = source.width
        self.height = source.height
        self.distances = distances
        self.z_hit = z_hit
        self.z_rand = z_rand
        self.sigma_hit = sigma_hit
        self.free = source.free_mask()

    def traversable_at(self, points: np.ndarray) -> np.ndarray:
        """True where a point lies on a known-free map cell."""
        flat = points.reshape(-1, 2)
        ix, iy, ok = self.cells_of_points(flat)
        out = np.zeros(flat.shape[0], dtype=bool)
        out[ok] = self.free[iy[ok], ix[ok]]
        return out.reshape(points.shape[:-1])

    def distance_at(self, points: np.ndarray, outside: float = 1e3) -> np.ndarray:
        """Bilinear distance lookup for world points of any leading shape."""
        flat = points.reshape(-1, 2)
        gx, gy = self._to_grid_frame(flat[:, 0], flat[:, 1])
        cx = gx / self.resolution - 0.5  # continuous cell coordinates
        cy = gy / self.resolution - 0.5
        inside = (cx > -0.5) & (cx < self.width - 0.5) & \
                 (cy > -0.5) & (cy < self.height - 0.5)
        cx = np.clip(cx, 0.0, self.width - 1.0)
        cy = np.clip(cy, 0.0, self.height - 1.0)
        x0 = np.clip(np.floor(cx).astype(np.int64), 0, self.width - 2)
        y0 = np.clip(np.floor(cy).astype(np.int64), 0, self.height - 2)
        fx = cx - x0
        fy = cy - y0
        d = self.distances
        top = d[y0 + 1, x0] * (1 - fx) + d[y0 + 1, x0 + 1] * fx
        bottom = d[y0, x0] * (1 - fx) + d[y0, x0 + 1] * fx
        out = bottom * (1 - fy) + top * fy
        out[~inside] = outside
        return out.reshape(points.shape[:-1])

    def log_likelihood(self, distances: np.ndarray, range_max: float,
                       sigma: float | None = None) -> np.ndarray:
        """Per-endpoint log likelihood of the hit model at the given distances."""
        sigma = self.sigma_hit if sigma is None else sigma
        gauss = self.z_hit * np.exp(-0.5 * (distances / sigma) ** 2)
        with np.errstate(divide="ignore"):
            # z_rand = 0 with a distant endpoint legitimately gives -inf
            return np.log(gauss + self.z_rand / range_max)


def build_likelihood_field(grid: OccupancyGrid, sigma_hit: float = 0.1,
                           z_hit: float = 0.95, z_rand: float = 0.05,
                           occupied_threshold: float = 0.65) -> LikelihoodField:
    """Exact Euclidean distance transform over the map's occupied cells."""
    occupied = grid.occupied_mask(occupied_threshold)
    if not occupied.any():
        raise FeaturelessMapError("map has no occupied cells")
    distances = ndimage.distance_transform_edt(~occupied) * grid.resolution
    return LikelihoodField(grid, distances, z_hit, z_rand, sigma_hit)


def low_variance_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Systematic resampling: particle i is copied floor/ceil(N * w_i) times."""
    n = weights.size
    positions = (rng.random() + np.arange(n)) / n
    cumulative = np.cumsum(weights)
    cumulative[-1] = 1.0  # guard the last bin against rounding
    return np.searchsorted(cumulative, positions)


def effective_sample_size(weights: np.ndarray) -> float:
    return float(1.0 / np.sum(weights**2))


@dataclass(frozen=True)
class MclConfig:
    n_particles: int = 500
    z_hit: float = 0.95
    z_rand: float = 0.05
    sigma_hit: float = 0.1              # m
    decimation: int = 4                 # use every decimation-th beam
    resample_neff_frac: float = 0.5
    # Motion noise: sigma_trans = a[0]*|trans| + a[1]*|rot|,
    #               sigma_rot   = a[2]*|rot|  + a[3]*|trans|
    noise_coeffs: tuple = (0.15, 0.02, 0.25, 0.1)
    min_trans_sigma: float = 0.002      # m, keeps the cloud alive when crawling
    min_rot_sigma: float = 0.002       # rad
    # Global (uniform) initialization anneals the measurement sigma from
    # sigma_start down to sigma_hit over the first meters of travel. A wide
    # sigma widens each mode's attraction basin so 500 particles give
    # coverage; shrinking it then sharpens the fix. Motion noise is boosted
    # over the same phase so the population can migrate within a basin.
    # Tracking starts (Gaussian init) never enter this phase.
    sigma_start: float = 0.5            # m
    anneal_updates: int = 8             # measurement updates from sigma_start to sigma_hit
    anneal_noise_coeffs: tuple = (0.25, 0.04, 0.35, 0.15)
    anneal_min_trans_sigma: float = 0.02
    anneal_min_rot_sigma: float = 0.02
    # The global phase ends once the best particle explains the scan well.
    lock_fit_per_beam: float = -0.3
    # Kidnapped-robot rescue, global phase only: once the anneal has fully
    # cooled, a best-particle fit below this per-beam log likelihood means no
    # hypothesis explains the scan (an alias basin), and the set is reset to
    # uniform. Converged fits sit near -0.05, alias basins near -0.6 and
    # below.
    reset_fit_per_beam: float = -0.4
    warm_penetration_log_penalty: float = -1.5
    # While annealing, resample only on severe weight collapse so the
    # population keeps accumulating evidence across updates instead of being
    # culled by each one.
    anneal_resample_frac: float = 0.1
    # Global phase only: beams whose interior passes through non-free map
    # cells are physically impossible, which the endpoint-only field cannot
    # see. Two interior samples per beam are tested against the map's free
    # mask. This is what kills the square room's rotational aliases.
    penetration_fractions: tuple = (0.5, 0.8)
    penetration_log_penalty: float = -4.0


@dataclass
class ParticleSet:
    """Pose hypotheses (N, 3) with normalized weights (N,)."""

    poses: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return int(self.weights.size)


def motion_update(particles: ParticleSet, odom_delta: Pose2D,
                  noise_coeffs, rng: np.random.Generator,
                  min_trans_sigma: float = 0.0,
                  min_rot_sigma: float = 0.0) -> ParticleSet:
    """Propagate every pose by the odometry delta plus sampled noise."""
    trans = math.hypot(odom_delta.x, odom_delta.y)
    rot = abs(odom_delta.theta)
    sigma_t = max(noise_coeffs[0] * trans + noise_coeffs[1] * rot, min_trans_sigma)
    sigma_r = max(noise_coeffs[2] * rot + noise_coeffs[3] * trans, min_rot_sigma)
    n = particles.n
    noise = np.zeros((n, 3))
    if sigma_t > 0.0:
        noise[:, 0] = rng.normal(0.0, sigma_t, n)
        noise[:, 1] = rng.normal(0.0, sigma_t, n)
    if sigma_r > 0.0:
        noise[:, 2] = rng.normal(0.0, sigma_r, n)
    delta = odom_delta.as_array() + noise
    return ParticleSet(compose_many(particles.poses, delta), particles.weights)


def measurement_update(particles: ParticleSet, scan: LaserScan,
                       field_: LikelihoodField, decimation: int,
                       rng: np.random.Generator,
                       resample_neff_frac: float = 0.5,
                       sensor_offset: Pose2D = Pose2D(),
                       sigma_override: float | None = None,
                       range_cap: float | None = None,
                       penetration: tuple | None = None) -> tuple[ParticleSet, dict]:
    """Reweight by scan likelihood; resample when N_eff collapses.

    `sigma_override` evaluates the hit model at a different width than the
    field default; the global phase anneals it from wide to sharp.
    `penetration`, when given as (fractions, log_penalty), additionally
    penalizes beams whose interior samples cross non-free map cells. Returns
    the updated set plus diagnostics: n_eff, resampled flag, and a `reset`
    flag raised when every weight underflowed (kidnapped case) and the
    distribution was reset to uniform.
    """
    idx = np.arange(0, len(scan), max(int(decimation), 1))
    hit = scan.ranges[idx] < scan.range_max
    idx = idx[hit]
    if range_cap is not None:
        close = idx[scan.ranges[idx] <= range_cap]
        if close.size >= 10:
            idx = close
    info = {"n_eff": effective_sample_size(particles.weights),
            "resampled": False, "reset": False}
    if idx.size == 0:
        return particles, info

    bearings = scan.angle_min + scan.angle_increment * idx
    local = np.column_stack((scan.ranges[idx] * np.cos(bearings),
                             scan.ranges[idx] * np.sin(bearings)))
    if sensor_offset != Pose2D():
        local = sensor_offset.transform_points(local)

    poses = particles.poses
    c, s = np.cos(poses[:, 2]), np.sin(poses[:, 2])
    # endpoints[p, b, :] = pose_p + R(theta_p) @ local_b
    ex = poses[:, 0:1] + c[:, None] * local[:, 0] - s[:, None] * local[:, 1]
    ey = poses[:, 1:2] + s[:, None] * local[:, 0] + c[:, None] * local[:, 1]
    endpoints = np.stack((ex, ey), axis=-1)

    d = field_.distance_at(endpoints)
    # Convergence is judged at the field's native sharpness even when the
    # weights use an annealed sigma.
    info["fit_per_beam"] = float(
        field_.log_likelihood(d, scan.range_max).sum(axis=1).max() / idx.size)
    log_w = field_.log_likelihood(d, scan.range_max, sigma_override).sum(axis=1)

    if penetration is not None:
        # Beams never cross mapped obstacles, however wide the hit model is.
        fractions, log_penalty = penetration
        for frac in fractions:
            px = poses[:, 0:1] + (c[:, None] * local[:, 0] - s[:, None] * local[:, 1]) * frac
            py = poses[:, 1:2] + (s[:, None] * local[:, 0] + c[:, None] * local[:, 1]) * frac
            mid = np.stack((px, py), axis=-1)
            blocked = ~field_.traversable_at(mid)
            log_w = log_w + log_penalty * blocked.sum(axis=1)

    log_post = np.log(np.maximum(particles.weights, 1e-300)) + log_w
    peak = log_post.max()
    if not np.isfinite(peak):
        # every weight underflowed: kidnapped-robot degenerate case
        weights = np.full(particles.n, 1.0 / particles.n)
        info["reset"] = True
    else:
        weights = np.exp(log_post - peak)
        weights = weights / weights.sum()

    n_eff = effective_sample_size(weights)
    info["n_eff"] = n_eff
    out = ParticleSet(poses, weights)
    if n_eff < resample_neff_frac * particles.n:
        picks = low_variance_resample(weights, rng)
        out = ParticleSet(poses[picks].copy(),
                          np.full(particles.n, 1.0 / particles.n))
        info["resampled"] = True
    return out, info


def pose_estimate(particles: ParticleSet) -> tuple[Pose2D, np.ndarray]:
    """Weighted mean pose (circular mean heading) and a 3x3 scatter proxy."""
    if particles.n == 0:
        raise ValueError("empty particle set")
    w = particles.weights
    poses = particles.poses
    mx = float(w @ poses[:, 0])
    my = float(w @ poses[:, 1])
    sin_m = float(w @ np.sin(poses[:, 2]))
    cos_m = float(w @ np.cos(poses[:, 2]))
    mt = math.atan2(sin_m, cos_m)
    dev = np.column_stack((
        poses[:, 0] - mx,
        poses[:, 1] - my,
        normalize_angle(poses[:, 2] - mt),
    ))
    cov = (dev * w[:, None]).T @ dev
    return Pose2D(mx, my, mt), cov


class MonteCarloLocalizer:
    """Owns a particle set plus the map's likelihood field."""

    def __init__(self, grid: OccupancyGrid, cfg: MclConfig = MclConfig(),
                 seed: int = 0, sensor_offset: Pose2D = Pose2D()):
        self.cfg = cfg
        self.map = grid
        self.field = build_likelihood_field(grid, cfg.sigma_hit, cfg.z_hit, cfg.z_rand)
        self.rng = np.random.default_rng(seed)
        self.sensor_offset = sensor_offset
        self.particles = ParticleSet(np.zeros((cfg.n_particles, 3)),
                                     np.full(cfg.n_particles, 1.0 / cfg.n_particles))
        self.initialized = False
        self.last_info: dict = {}
        self._updates_since_init = 0
        self._annealing = False
        self._lock_streak = 0
        self._reset_streak = 0
        self._dist_since_init = 0.0

    def initialize_gaussian(self, pose: Pose2D, sigma_xy: float = 0.15,
                            sigma_theta: float = 0.1) -> None:
        n = self.cfg.n_particles
        poses = np.empty((n, 3))
        poses[:, 0] = pose.x + self.rng.normal(0.0, sigma_xy, n)
        poses[:, 1] = pose.y + self.rng.normal(0.0, sigma_xy, n)
        poses[:, 2] = normalize_angle(pose.theta + self.rng.normal(0.0, sigma_theta, n))
        self.particles = ParticleSet(poses, np.full(n, 1.0 / n))
        self.initialized = True
        self._updates_since_init = 0
        self._annealing = False
        self._reset_streak = 0
        self._dist_since_init = 0.0

    def initialize_uniform(self) -> None:
        """Spread particles uniformly over the map's free cells."""
        free = np.argwhere(self.map.free_mask())
        if free.shape[0] == 0:
            free = np.argwhere(~self.map.occupied_mask())
        n = self.cfg.n_particles
        picks = self.rng.integers(0, free.shape[0], n)
        jitter = self.rng.random((n, 2))
        poses = np.empty((n, 3))
        cells = free[picks]
        ox, oy = self.map.origin.x, self.map.origin.y
        res = self.map.resolution
        poses[:, 0] = ox + (cells[:, 1] + jitter[:, 0]) * res
        poses[:, 1] = oy + (cells[:, 0] + jitter[:, 1]) * res
        poses[:, 2] = self.rng.uniform(-math.pi, math.pi, n)
        self.particles = ParticleSet(poses, np.full(n, 1.0 / n))
        self.initialized = True
        self._updates_since_init = 0
        self._annealing = True
        self._lock_streak = 0
        self._reset_streak = 0
        self._dist_since_init = 0.0

    def _sigma_eff(self) -> float:
        if not self._annealing:
            return self.cfg.sigma_hit
        frac = min(self._updates_since_init / self.cfg.anneal_updates, 1.0)
        return self.cfg.sigma_start + (self.cfg.sigma_hit - self.cfg.sigma_start) * frac

    def is_warm(self) -> bool:
        return self._annealing and self._sigma_eff() > 1.2 * self.cfg.sigma_hit

    def motion_update(self, odom_delta: Pose2D) -> None:
        self._dist_since_init += math.hypot(odom_delta.x, odom_delta.y)
        if self.is_warm():
            # Warm global phase: extra diffusion lets hypotheses migrate.
            coeffs = self.cfg.anneal_noise_coeffs
            floors = (self.cfg.anneal_min_trans_sigma, self.cfg.anneal_min_rot_sigma)
        else:
            coeffs = self.cfg.noise_coeffs
            floors = (self.cfg.min_trans_sigma, self.cfg.min_rot_sigma)
        self.particles = motion_update(
            self.particles, odom_delta, coeffs, self.rng, floors[0], floors[1])

    def measurement_update(self, scan: LaserScan,
                           decimation: int | None = None) -> dict:
        sigma = self._sigma_eff()
        penetration = None
        if self._annealing:
            # Softened while warm: the wide-sigma basin includes poses whose
            # beams clip obstacle corners, but alias basins must still feel a
            # steady tilt or they win the annealing mass war by drift.
            penalty = (self.cfg.warm_penetration_log_penalty if self.is_warm()
                       else self.cfg.penetration_log_penalty)
            penetration = (self.cfg.penetration_fractions, penalty)
        self.particles, info = measurement_update(
            self.particles, scan, self.field,
            self.cfg.decimation if decimation is None else decimation,
            self.rng, self.cfg.resample_neff_frac, self.sensor_offset,
            sigma_override=None if sigma == self.cfg.sigma_hit else sigma,
            penetration=penetration)
        self._updates_since_init += 1
        info["sigma"] = sigma
        fit = info.get("fit_per_beam")
        cooled = self._annealing and not self.is_warm()
        if self._annealing and fit is not None and cooled:
            if fit > self.cfg.lock_fit_per_beam:
                self._lock_streak += 1
                self._reset_streak = 0
                if self._lock_streak >= 3:
                    self._annealing = False  # converged: back to plain tracking
            else:
                self._lock_streak = 0
                if fit < self.cfg.reset_fit_per_beam:
                    self._reset_streak += 1
                else:
                    self._reset_streak = 0
                if self._reset_streak >= 2:
                    # No hypothesis explains the scan twice in a row: the
                    # filter is in an alias basin, start over.
                    self.initialize_uniform()
                    info["reset"] = True
        self.last_info = info
        return info

    def estimate(self) -> tuple[Pose2D, np.ndarray]:
        return pose_estimate(self.particles)
