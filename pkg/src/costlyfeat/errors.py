"""Exception types shared across the package."""


class CostlyFeatError(Exception):
    """Base class for all package errors."""


class ParseError(CostlyFeatError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(CostlyFeatError, ValueError):
    """An argument or dataset violates a documented precondition."""


class ContractViolation(CostlyFeatError, RuntimeError):
    """A caller broke an operation contract (e.g. stepping with an illegal action)."""


class DivergenceError(CostlyFeatError, RuntimeError):
    """Training blew up; ``diagnostics`` holds the offending statistics."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)
