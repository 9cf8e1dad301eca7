"""Shared exception and warning types."""


class OutsideCavityError(ValueError):
    """The detector worldline left the cavity interior [0, L]."""


class AccuracyError(RuntimeError):
    """An adaptive computation could not meet its error target within budget.

    Carries the best available value and error estimate so callers can
    decide whether to accept a degraded result.
    """

    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


class PlanningError(RuntimeError):
    """Gate synthesis could not produce a plan meeting the constraints."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PerturbativityWarning(UserWarning):
    """Parameters leave the regime where the perturbative expansion is trusted."""


class TruncationWarning(UserWarning):
    """A mode-sum or cutoff hit its configured cap before converging."""
