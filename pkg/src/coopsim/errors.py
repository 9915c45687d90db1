"""Exception types raised by the simulator."""


class CoopSimError(Exception):
    """Base class for all simulator errors."""


class ConfigError(CoopSimError, ValueError):
    """A configuration is malformed or violates an invariant."""


class ScheduleSearchError(CoopSimError, ValueError):
    """A scheduler was asked for an exact search that is too large."""


class MetricError(CoopSimError, ValueError):
    """A metric is undefined for the given trace."""


class OracleError(CoopSimError, ValueError):
    """The fluid oracle cannot handle the requested instance."""
