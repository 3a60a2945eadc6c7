"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value or combination is unusable."""


class OutOfBoundsError(ValueError):
    """A point lies outside the goal-space bounding box."""


class PlannerError(RuntimeError):
    """The waypoint planner could not attach the query to the graph."""
