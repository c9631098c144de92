"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Item counts of two objects disagree."""


class NotBinaryError(ValueError):
    """A binary (0/1) clause or valuation was required."""


class BudgetExceededError(RuntimeError):
    """An exhaustive enumeration would exceed its configured budget."""


class InvalidReportError(ValueError):
    """A mechanism report violates the report invariants."""


class DecisionSpecError(ValueError):
    """A decision-mode run was requested without a usable threshold."""
