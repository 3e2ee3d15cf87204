"""Exception types shared across the toolkit."""


class TraceKitError(Exception):
    """Base class for all tracekit errors."""


class DimensionError(TraceKitError, ValueError):
    """Operands have incompatible or invalid dimensions."""


class SymmetryError(TraceKitError, ValueError):
    """A matrix that must be symmetric is not, beyond tolerance."""


class ParameterError(TraceKitError, ValueError):
    """A parameter violates an operation's precondition."""


class BudgetError(ParameterError):
    """A query budget is too small for the requested configuration."""


class SpectrumFloorError(TraceKitError, ArithmeticError):
    """A Ritz value fell at or below the safe floor for f in {log, inverse}."""


class MatrixMarketError(TraceKitError, ValueError):
    """Matrix Market input could not be parsed; message carries a line number."""


class ConfigError(TraceKitError, ValueError):
    """Invalid benchmark or CLI configuration."""
