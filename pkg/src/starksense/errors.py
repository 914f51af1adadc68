"""Exception and warning types raised across the package."""


class StarkSenseError(Exception):
    """Base class for all package errors."""


class InvalidParams(StarkSenseError, ValueError):
    """Parameters violate a documented invariant."""


class NegativeDetuning(StarkSenseError, ValueError):
    """Drive lies at or below the first transition; the displacement cubic
    may have several real roots. Use ``enumerate_alpha_roots`` instead."""


class DegeneratePerturbation(StarkSenseError, ArithmeticError):
    """An energy denominator of the perturbation series is (nearly) zero."""


class NoConvergence(StarkSenseError, RuntimeError):
    """An iterative solver did not reach its tolerance."""


class InconsistentInput(StarkSenseError, ValueError):
    """Measured lines cannot be explained by one drive within their uncertainty."""


class AllCornersFailed(StarkSenseError, RuntimeError):
    """Every corner of an uncertainty box failed to invert."""


class StepSizeFailure(StarkSenseError, RuntimeError):
    """The ODE integrator could not meet its tolerance."""


class WindowTooShort(StarkSenseError, ValueError):
    """A trajectory does not cover the requested averaging window."""


class ConfigError(StarkSenseError, ValueError):
    """Malformed run configuration."""


class ConvergenceWarning(UserWarning):
    """Charge-basis truncation is not converged for the retained levels."""


class IllConditionedWarning(UserWarning):
    """The sensing Jacobian is badly conditioned; estimates are unreliable."""
