class ICOSError(ValueError):
    """Base class for all errors raised by this package."""


class ChainError(ICOSError):
    """Malformed or unusable option chain."""


class OutOfBoundsError(ICOSError):
    """A price lies outside the no-arbitrage bounds, or a point lies outside [alpha, beta]."""


class SingularDesignError(ICOSError):
    """The boundary regression design matrix is rank deficient."""


class QuadratureError(ICOSError):
    pass


class DegreesOfFreedomError(ICOSError):
    """The residual degrees of freedom are non-positive (N too close to n)."""
