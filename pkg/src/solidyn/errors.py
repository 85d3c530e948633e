"""Exception types shared by the solvers and trajectory integrators."""


class SolidynError(Exception):
    """Base class for all solver and configuration failures."""


class NonFiniteFieldError(SolidynError):
    """A field acquired NaN/Inf samples (aborted run, step index in message)."""


class NodeEncounterError(SolidynError):
    """Trajectory entered the node-masked region of the guiding wave."""

    def __init__(self, message, last_valid_time):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class BoundaryExitError(SolidynError):
    """Trajectory left the simulation box."""

    def __init__(self, message, last_valid_time):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class TachyonicRegionError(SolidynError):
    """Relativistic trajectory entered a region of negative squared mass."""

    def __init__(self, message, last_valid_time):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class PastOrientedCurrentError(SolidynError):
    """Relativistic trajectory entered a region of non-positive density J0."""

    def __init__(self, message, last_valid_time):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class BoundaryMassError(SolidynError):
    """Too much wave mass accumulated near the periodic box edge."""


class ConfigError(SolidynError):
    """Scenario configuration is malformed (message cites the offending key)."""
