"""Planar indoor navigation stack with LiDAR-only odometry.

Layers, bottom to top: a deterministic simulator (`sim`), range-flow scan
odometry (`rangeflow`), grid SLAM (`mapping`), Monte Carlo localization
(`localization`), inflation costmaps (`costmap`), global and local planners
(`planning`), actuation control with battery compensation (`control`), and
the navigation orchestrator (`navigator`).
"""

from .geometry import (
    LaserScan,
    OccupancyGrid,
    Pose2D,
    Twist2D,
    integrate_twist,
    normalize_angle,
)
from .world import World, load_builtin_world

__all__ = [
    "LaserScan",
    "OccupancyGrid",
    "Pose2D",
    "Twist2D",
    "World",
    "integrate_twist",
    "load_builtin_world",
    "normalize_angle",
]

__version__ = "0.1.0"
