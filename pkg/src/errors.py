"""Exceptions and warnings raised across Crest."""


class CrestError(Exception):
    """Base class for every error raised by the package."""


class DomainError(CrestError, ValueError):
    """An argument lies outside the domain of the function."""


class PoleError(DomainError):
    """A special function was evaluated at one of its poles."""


class UnsupportedParameterError(CrestError, ValueError):
    """A parameter is valid mathematically but not supported by this routine."""


class MethodCapabilityError(CrestError):
    """The requested numerical method cannot handle this case."""


class FactorizationError(CrestError):
    """Gram matrix factorisation failed even with the maximal jitter."""


class DegenerateDenominatorError(CrestError):
    """An unconditional expectation used as a denominator underflowed."""


class ConfigError(CrestError, ValueError):
    """Bad command-line or config-file input."""

    def __init__(self, flag, message):
        self.flag = flag
        super().__init__(f"--{flag}: {message}")


class UsageError(CrestError, ValueError):
    """The command line could not be parsed."""


class CrestWarning(UserWarning):
    """Reliability notice: the result is returned but should be read with care."""
