"""Sensor twist from consecutive laser scans via the planar range-flow
constraint, robustly minimized; integrates to odometry.

For a static point seen at bearing a and range r while the sensor moves
with body twist (vx, vy, w), the scan function r(t, a) obeys

    R_t + R_a * ((vx sin a - vy cos a) / r - w) + vx cos a + vy sin a = 0

where R_t is the temporal and R_a the angular derivative of the range
image. Each beam contributes one residual, linear in (vx, vy, w); the twist
is the iteratively reweighted least-squares minimizer under Cauchy weights.
Temporal gradients use the backward difference over the scan interval;
angular gradients are central differences on the mean of the two scans,
which makes the estimate exactly antisymmetric under scan exchange.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientConstraintsError
from .geometry import LaserScan, Pose2D, Twist2D, integrate_twist

_MIN_RANGE = 0.05  # m; closer returns make the 1/r term explode


@dataclass(frozen=True)
class RangeFlowConfig:
    irls_iterations: int = 10
    rel_tolerance: float = 1e-6         # early exit on relative objective change
    cauchy_scale_factor: float = 3.0    # c = factor * median(|residual|)
    jump_gate: float = 0.5              # m across the central difference; cuts edges
    condition_limit: float = 1e6        # normal-matrix condition number gate
    min_points: int = 10
    fix_vy: bool = False                # hard vy = 0 for non-holonomic plants


@dataclass(frozen=True)
class RangeFlowEstimate:
    twist: Twist2D
    covariance_proxy: np.ndarray        # 3x3, symmetric PSD
    degenerate: bool
    residual_rms: float                 # m/s
    n_points: int
    # (pre_solve, post_solve) weighted objective per IRLS iteration; each
    # solve may not increase its own weighted objective.
    objective_history: tuple = ()


def _check_layout(prev: LaserScan, curr: LaserScan) -> float:
    if len(prev) != len(curr) or prev.angle_min != curr.angle_min \
            or prev.angle_increment != curr.angle_increment \
            or prev.range_max != curr.range_max:
        raise ValueError("scans must share one bearing layout")
    dt = curr.timestamp - prev.timestamp
    if dt <= 0.0:
        raise ValueError("scan pair must advance in time")
    return dt


def constraint_matrix(prev: LaserScan, curr: LaserScan,
                      cfg: RangeFlowConfig = RangeFlowConfig()):
    """Per-beam residual coefficients: rho = b + A @ (vx, vy, w).

    Returns (A, b, mask) over all beams; mask selects beams with returns in
    both scans, valid neighbors for the angular difference, ranges above the
    near-field floor, and no range discontinuity across the difference
    stencil.
    """
    dt = _check_layout(prev, curr)
    r0, r1 = prev.ranges, curr.ranges
    rmax = curr.range_max

    rm = 0.5 * (r0 + r1)
    bearings = curr.bearings
    inc = curr.angle_increment

    r_t = (r1 - r0) / dt
    r_a = np.gradient(rm, inc)

    n = rm.size
    hit = (r0 < rmax) & (r1 < rmax)
    left = np.roll(hit, 1)
    right = np.roll(hit, -1)
    left[0] = True        # edge beams use a one-sided difference
    right[-1] = True
    jump = np.empty(n)
    jump[1:-1] = np.abs(rm[2:] - rm[:-2])
    jump[0] = abs(rm[1] - rm[0])
    jump[-1] = abs(rm[-1] - rm[-2])

    mask = hit & left & right & (rm > _MIN_RANGE) & (jump <= cfg.jump_gate)

    cos_a, sin_a = np.cos(bearings), np.sin(bearings)
    a_mat = np.column_stack((
        r_a * sin_a / rm + cos_a,
        -r_a * cos_a / rm + sin_a,
        -r_a,
    ))
    return a_mat, r_t, mask


def estimate_twist(prev: LaserScan, curr: LaserScan,
                   cfg: RangeFlowConfig = RangeFlowConfig()) -> RangeFlowEstimate:
    """Twist of the sensor between two scans (sensor frame, m/s and rad/s)."""
    a_full, b_full, mask = constraint_matrix(prev, curr, cfg)
    a = a_full[mask]
    b = b_full[mask]
    n_points = int(mask.sum())
    if n_points < cfg.min_points:
        raise InsufficientConstraintsError(
            f"only {n_points} valid range-flow points (need {cfg.min_points})")

    cols = np.array([0, 2]) if cfg.fix_vy else np.array([0, 1, 2])
    a_used = a[:, cols]

    xi = np.zeros(len(cols))
    weights = np.ones(n_points)
    degenerate = False
    history = []
    prev_obj = None
    solution_info = None

    for _ in range(cfg.irls_iterations):
        rho = b + a_used @ xi
        abs_med = float(np.median(np.abs(rho)))
        if abs_med > 1e-12:
            c = cfg.cauchy_scale_factor * abs_med
            weights = 1.0 / (1.0 + (rho / c) ** 2)
        else:
            weights = np.ones(n_points)

        pre = float(np.sum(weights * rho**2))
        aw = a_used * weights[:, None]
        normal = a_used.T @ aw
        rhs = -(aw.T @ b)
        xi, degenerate, solution_info = _solve_normal(normal, rhs, cfg.condition_limit)

        rho_new = b + a_used @ xi
        post = float(np.sum(weights * rho_new**2))
        history.append((pre, post))
        if prev_obj is not None and abs(prev_obj - post) <= cfg.rel_tolerance * max(prev_obj, 1e-30):
            break
        prev_obj = post

    rho = b + a_used @ xi
    rms = float(np.sqrt(np.mean(rho**2)))
    cov = _covariance_proxy(solution_info, rho, weights, cols)

    full = np.zeros(3)
    full[cols] = xi
    if cfg.fix_vy:
        full[1] = 0.0
    return RangeFlowEstimate(
        twist=Twist2D(full[0], full[1], full[2]),
        covariance_proxy=cov,
        degenerate=degenerate,
        residual_rms=rms,
        n_points=n_points,
        objective_history=tuple(history),
    )


def _solve_normal(normal: np.ndarray, rhs: np.ndarray, condition_limit: float):
    """Solve N x = g, zeroing near-null directions when N is ill-conditioned."""
    u, s, vt = np.linalg.svd(normal)
    good = s > s[0] / condition_limit if s[0] > 0.0 else np.zeros_like(s, dtype=bool)
    degenerate = not bool(good.all())
    s_inv = np.where(good, 1.0 / np.where(s > 0.0, s, 1.0), 0.0)
    pinv = (vt.T * s_inv) @ u.T
    return pinv @ rhs, degenerate, pinv


def _covariance_proxy(pinv: np.ndarray, rho: np.ndarray, weights: np.ndarray,
                      cols: np.ndarray) -> np.ndarray:
    dof = max(rho.size - len(cols), 1)
    sigma_sq = float(np.sum(weights * rho**2)) / dof
    small = sigma_sq * pinv
    cov = np.zeros((3, 3))
    cov[np.ix_(cols, cols)] = 0.5 * (small + small.T)
    return cov


class OdometryAccumulator:
    """Integrates twist estimates into a pose in the odometry frame.

    On an estimation failure the pose is held (zero-motion fallback) and
    `dropout_count` increments; the scan is still adopted so the next pair
    stays adjacent in time.
    """

    def __init__(self, first_scan: LaserScan, cfg: RangeFlowConfig = RangeFlowConfig(),
                 pose: Pose2D = Pose2D()):
        self.cfg = cfg
        self.pose = pose
        self.last_scan = first_scan
        self.last_estimate: RangeFlowEstimate | None = None
        self.dropout_count = 0

    @property
    def twist(self) -> Twist2D:
        if self.last_estimate is None:
            return Twist2D()
        return self.last_estimate.twist

    def update(self, curr: LaserScan) -> RangeFlowEstimate | None:
        if curr.timestamp <= self.last_scan.timestamp:
            raise ValueError("scan timestamps must be strictly increasing")
        dt = curr.timestamp - self.last_scan.timestamp
        try:
            estimate = estimate_twist(self.last_scan, curr, self.cfg)
        except InsufficientConstraintsError:
            self.dropout_count += 1
            self.last_scan = curr
            return None
        self.pose = self.pose.compose(integrate_twist(estimate.twist, dt))
        self.last_scan = curr
        self.last_estimate = estimate
        return estimate
