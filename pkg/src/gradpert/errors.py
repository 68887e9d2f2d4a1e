"""Exception types shared across the package."""


class NumericalNonConvergence(RuntimeError):
    """A quadrature or iteration did not reach its tolerance."""


class DegenerateScaling(ValueError):
    """The scaling map was requested for a zero mixture weight."""


class DivergenceDetected(RuntimeError):
    """Series terms grew across consecutive orders."""


class JumpTooLarge(ValueError):
    """No partition can keep every part's variation below theta."""


class EtaOutOfRange(ValueError):
    """eta is outside [0, 1/2)."""


class BoundViolation(AssertionError):
    """A computed kernel fell outside its two-sided bound.

    ``worst`` holds the offending sample as a dict.
    """

    def __init__(self, message, worst=None):
        super().__init__(message)
        self.worst = worst


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class TruncationWarning(UserWarning):
    """Mass outside the spatial window exceeds the tolerance."""
