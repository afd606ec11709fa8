"""Exception types shared across the package."""


class QNormalError(Exception):
    """Base class for all errors raised by this package."""


class ParamOutOfRange(QNormalError):
    """A parameter violates its admissible range."""


class OutOfSupport(QNormalError):
    """An evaluation point lies outside the distribution's support."""


class InfiniteProductAtQ1(QNormalError):
    """An infinite product was requested at q = 1 where it diverges."""


class SlowConvergence(QNormalError):
    """A truncated series/product cannot meet its tail tolerance within max_terms."""


class Q1Unsupported(QNormalError):
    """Operation is undefined at q = 1."""


class BadIndexSet(QNormalError):
    """A coordinate index set is empty, unsorted, or out of range."""


class NonCenteredFunction(QNormalError):
    """A zero-mean function was required but the constant coefficient is nonzero."""


class TooManyRejections(QNormalError):
    """Rejection sampler exceeded its per-draw trial budget (envelope bug)."""


class EnvelopeViolation(QNormalError):
    """Debug-mode check found a target/envelope ratio above 1."""


class ToleranceNotMet(QNormalError):
    """Adaptive integration exhausted subdivisions before reaching tolerance.

    Carries the best value and its error estimate.
    """

    def __init__(self, message, value=None, estimate=None):
        super().__init__(message)
        self.value = value
        self.estimate = estimate


class DegenerateDenominator(QNormalError):
    """A closed-form denominator is numerically zero."""


class IllConditioned(QNormalError):
    """An interpolation system is too ill-conditioned to trust."""


class SingularSystem(QNormalError):
    """A linear system is singular or nearly so.

    Carries a condition-number estimate when available.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition
