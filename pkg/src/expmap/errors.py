"""Exception types shared across the package.

The CLI maps ConfigError to exit code 2 and every other ExpmapError to
exit code 3; a failed experiment verdict is exit code 1.
"""


class ExpmapError(Exception):
    """Base class for all package errors."""


class ConfigError(ExpmapError):
    """Bad configuration file or override; carries line/field context."""

    def __init__(self, message, *, line=None, field=None):
        self.line = line
        self.field = field
        parts = [message]
        if line is not None:
            parts.append(f"(line {line})")
        if field is not None:
            parts.append(f"(field {field})")
        super().__init__(" ".join(parts))


class DomainError(ExpmapError):
    """Argument outside a family's admissible window or the unit interval."""


class BranchBoundaryError(ExpmapError):
    """Point-derivative requested within machine tolerance of a branch point."""


class DegenerateSeedError(ExpmapError):
    """Point-of-interest map has zero parameter derivative."""


class DegenerateObservableError(ExpmapError):
    """Observable with vanishing asymptotic variance (co-boundary case)."""


class ConvergenceError(ExpmapError):
    """Iterative solver did not reach tolerance; carries the last residual."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (last residual {residual:.3e})"
        super().__init__(message)


class StateError(ExpmapError):
    """Operation requires state that has not been computed yet."""


class InsufficientDataError(ExpmapError):
    """Too few usable data points (e.g. correlation lags above the floor)."""


class DepthCapError(ExpmapError):
    """Requested partition depth exceeds the full-enumeration cap."""


class UsageError(ExpmapError):
    """Arguments are individually valid but mutually inconsistent."""
