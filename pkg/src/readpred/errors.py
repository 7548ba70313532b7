"""Exception hierarchy shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all readpred errors."""


class ValidationError(ToolkitError):
    """Input file or table violates its schema or an invariant."""


class ConvergenceError(ToolkitError):
    """An optimizer failed to converge within its budget."""
