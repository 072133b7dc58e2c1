"""Exception types shared across the package."""


class RDPFError(Exception):
    """Base class for all errors raised by :mod:`rdpf`."""


class DimensionError(RDPFError, ValueError):
    """Array shapes that must agree do not."""


class NotOnSimplexError(RDPFError, ValueError):
    """A vector or kernel row is not a probability distribution."""


class DegenerateNormalizerError(RDPFError, ArithmeticError):
    """All weight of a log-normalizer sits on entries with log value -inf."""


class SingularRatioError(RDPFError, ArithmeticError):
    """A ratio p(x)/v(x) was requested where v(x) = 0."""


class CurvatureUnavailableError(RDPFError):
    """The f-divergence generator has no second derivative."""


class LambdaInfeasibleError(RDPFError, ValueError):
    """A dual vector lies outside the admissible set of the lower bound.

    ``violating`` holds the reconstruction index of the worst violation,
    or ``None`` when the vector has negative entries.
    """

    def __init__(self, message, violating=None):
        super().__init__(message)
        self.violating = violating


class OracleInfeasibleError(RDPFError):
    """No lattice kernel satisfies both constraints."""


class ConfigError(RDPFError, ValueError):
    """Invalid run configuration."""
