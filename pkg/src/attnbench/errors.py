"""Exception types raised across the package."""


class AttnBenchError(Exception):
    """Base class for all package errors."""


class ShapeError(AttnBenchError, ValueError):
    """Operand shapes are incompatible."""


class NonFiniteError(AttnBenchError, FloatingPointError):
    """An operation produced NaN or Inf."""


class PinvDivergenceError(AttnBenchError, ArithmeticError):
    """The iterative pseudoinverse failed to converge."""


class UnsupportedPatternError(AttnBenchError, ValueError):
    """A mechanism was asked for an attention pattern it cannot model."""


class UnknownMechanismError(AttnBenchError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown mechanism"


class FitError(AttnBenchError, ValueError):
    """Least-squares fit is ill-posed (too few points, singular system)."""


class StatsError(AttnBenchError, ValueError):
    """Missing or degenerate normalization statistics."""


class UnstableStateError(AttnBenchError, ValueError):
    """A state-space model has a non-decaying state (Re(A) >= 0)."""
