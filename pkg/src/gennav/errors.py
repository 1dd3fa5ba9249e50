"""Exception types raised across the stack.

Every failure that callers are expected to branch on gets its own class;
anything else is a plain ValueError at the point of misuse.
"""


class GennavError(Exception):
    """Base class for all stack-specific errors."""


class OutOfBoundsError(GennavError):
    """A world point or cell index falls outside a grid's extent."""


class InsufficientConstraintsError(GennavError):
    """Too few valid scan points to constrain a twist estimate."""


class FeaturelessMapError(GennavError):
    """Map contains no occupied cells; no likelihood field can be built."""


class NoPathError(GennavError):
    """Goal is traversable but unreachable from the start cell."""


class GoalInObstacleError(GennavError):
    """Goal cell (after snapping) is lethal or off the map."""


class RobotInCollisionError(GennavError):
    """Start cell of a planning request is already lethal."""


class LocalMinimumError(GennavError):
    """No admissible velocity sample exists; local planner is stuck."""


class BatterySenseFaultError(GennavError):
    """Measured battery voltage is non-positive or non-finite."""


class NonHolonomicCommandError(GennavError):
    """A lateral velocity was commanded on a plant that cannot produce one."""
