"""Exception hierarchy shared by all modules."""


class HwLsfpError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(HwLsfpError, ValueError):
    """Invalid configuration value or malformed config file."""


class DomainError(HwLsfpError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ScenarioInfeasibleError(HwLsfpError, RuntimeError):
    """Geometry constraints could not be met within the retry budget."""


class ModelError(HwLsfpError, ValueError):
    """A statistical model produced an invalid object (e.g. non-PSD covariance)."""


class ContractError(HwLsfpError, ValueError):
    """Array shapes or dimensions do not match the expected layout."""


class NumericalError(HwLsfpError, ArithmeticError):
    """A linear solve or a derived quantity failed numerically."""


class DegenerateInputError(HwLsfpError, ValueError):
    """Input has zero norm or zero energy where a direction is required."""


class ConstraintError(HwLsfpError, ValueError):
    """Power budget or another feasibility constraint is violated."""


class SurrogateError(HwLsfpError, RuntimeError):
    """MM surrogate failed its tangency, gradient or concavity check."""


class InvariantViolationError(HwLsfpError, RuntimeError):
    """An algorithmic invariant (e.g. MM monotonicity) was broken."""
