"""Exception types raised across the package."""


class CovggmError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(CovggmError):
    """Array shapes are inconsistent with each other."""


class NonFinite(CovggmError):
    """NaN or Inf encountered where finite values are required."""


class BinaryViolation(CovggmError):
    """A column declared binary contains a value outside {0, 1}."""


class DegenerateColumn(CovggmError):
    """A continuous column has zero sample variance."""


class SolverDiverged(CovggmError):
    """The penalized least-squares solve produced non-finite values."""


class DegenerateDoF(CovggmError):
    """Residual-variance denominator is not positive."""


class ZeroVariance(CovggmError):
    """Residual sum of squares is exactly zero; sigma^2 would not be positive."""


class FoldTooSmall(CovggmError):
    """Cross-validation requested with more folds than samples."""


class AllZeroGamma(CovggmError):
    """Covariate-effect matrix came out all zero despite positive density."""


class NonPdOmega(CovggmError):
    """A subject precision matrix is not positive definite after repair."""


class SingularAfterRidge(CovggmError):
    """Precision matrix remained singular even after the ridge repair."""
