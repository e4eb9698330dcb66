"""Exception types shared across the engine."""


class ParetoTuneError(Exception):
    pass


class InputDomainError(ParetoTuneError, ValueError):
    """A point has the wrong dimension or lies outside its variable bounds."""


class UndefinedMetricError(ParetoTuneError, ValueError):
    """A metric was requested whose denominator (or input set) is empty."""


class ConfigError(ParetoTuneError, ValueError):
    """Invalid problem or run configuration, detected at load time."""


class NoFeasibleFrontError(UndefinedMetricError):
    """The approximation set has no feasible point left to measure."""
