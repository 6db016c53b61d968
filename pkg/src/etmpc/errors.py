"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical failures with 3.
"""


class ConfigError(ValueError):
    """Bad run configuration (unknown names, schema violations, bad values)."""


class DimensionError(ValueError):
    """Vector or matrix argument has the wrong dimension."""


class NumericalFailure(RuntimeError):
    """A numerical routine failed to converge.

    Carries the best estimate computed so far in ``best``, when available.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class IntegrationFailure(NumericalFailure):
    """ODE integration broke down; ``last_time`` is the last valid time."""

    def __init__(self, message, last_time=None, best=None):
        super().__init__(message, best=best)
        self.last_time = last_time


class ThresholdTooSmallError(ValueError):
    """The trigger threshold is too small for a positive inter-update time.

    ``min_delta`` reports the smallest admissible threshold.
    """

    def __init__(self, message, min_delta=None):
        super().__init__(message)
        self.min_delta = min_delta


class EmptySetError(ValueError):
    """A Pontryagin difference produced an empty set."""


class InfeasibleTighteningError(RuntimeError):
    """Constraint tightening emptied the feasible set.

    ``point_index`` identifies the offending mesh point when known.
    """

    def __init__(self, message, point_index=None):
        super().__init__(message)
        self.point_index = point_index


class RefinementFailure(NumericalFailure):
    """Mesh refinement or tightening exceeded its iteration cap.

    ``report`` carries the best refinement report obtained.
    """

    def __init__(self, message, report=None):
        super().__init__(message, best=report)
        self.report = report


class UnboundedWeightError(ValueError):
    """Scaling-weight bound requested from an unbounded constraint box."""
