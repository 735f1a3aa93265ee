"""Exception hierarchy shared across the package."""


class RcmdpError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class StructuralError(RcmdpError, ValueError):
    """An instance or kernel violates stochasticity / range requirements."""

    exit_code = 2


class ErgodicityWarning(UserWarning):
    """A tested policy induces a reducible or periodic chain."""


class SingularChain(RcmdpError):
    """The stationary / Poisson linear system is rank deficient."""

    exit_code = 3


class InfeasibleSet(RcmdpError):
    """The support-function LP reported infeasibility."""

    exit_code = 3


class DivergenceError(RcmdpError):
    """Critic iterates blew past the configured bound."""

    exit_code = 3


class NoConvergence(RcmdpError):
    """Oracle fixed-point iteration stalled above tolerance."""

    exit_code = 4

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BudgetExceeded(RcmdpError):
    """Grid enumeration would exceed the configured budget."""

    exit_code = 2

    def __init__(self, message, count=None):
        super().__init__(message)
        self.count = count


class ConfigError(RcmdpError, ValueError):
    """Invalid solver or experiment configuration."""

    exit_code = 2


class ParamError(ConfigError):
    """Invalid instance-generator parameters."""


class ParseError(ConfigError):
    """A JSON input file could not be parsed into the expected structure."""

    def __init__(self, message, field=None, line=None):
        detail = message
        if field is not None:
            detail += f" (field: {field})"
        if line is not None:
            detail += f" (line {line})"
        super().__init__(detail)
        self.field = field
        self.line = line
