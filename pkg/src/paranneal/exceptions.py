"""Exception types raised by paranneal."""


class ParannealError(Exception):
    """Base class for all library errors."""


class SingularCovariance(ParannealError, ValueError):
    """Cholesky factorization failed even after the maximum jitter."""


class DegenerateWeights(ParannealError, ValueError):
    """Every log-objective value is -inf, so no weights can be formed."""


class ConfigError(ParannealError, ValueError):
    """Invalid experiment configuration text or value."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
