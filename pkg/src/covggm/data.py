"""Core value objects: datasets, covariate scaling, and penalty configurations."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import BinaryViolation, DegenerateColumn, DimensionMismatch, NonFinite

__all__ = [
    "CovariateKind",
    "Dataset",
    "ScalingRecord",
    "PenaltyConfig",
    "validate_dataset",
    "standardize_covariates",
    "infer_kinds",
    "center_responses",
]


class CovariateKind(str, Enum):
    BINARY = "binary"
    CONTINUOUS = "continuous"


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, order="C")
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Dataset:
    """Response matrix X (n x p), covariate matrix U (n x q) and column kinds.

    Instances are immutable; construct through :func:`validate_dataset` so the
    invariants (matching row counts, finite entries, binary columns in {0,1})
    are guaranteed to hold.
    """

    X: np.ndarray
    U: np.ndarray
    covariate_kinds: tuple[CovariateKind, ...]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.U.shape[1]


def validate_dataset(X, U, kinds) -> Dataset:
    """Check all dataset invariants and return an immutable :class:`Dataset`.

    Raises DimensionMismatch, NonFinite or BinaryViolation when the inputs
    do not form a valid dataset.
    """
    X = np.asarray(X, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    if X.ndim != 2 or U.ndim != 2:
        raise DimensionMismatch("X and U must be 2-d arrays")
    if X.shape[0] != U.shape[0]:
        raise DimensionMismatch(
            f"X has {X.shape[0]} rows but U has {U.shape[0]}"
        )
    n, p = X.shape
    q = U.shape[1]
    if n < 1 or p < 2 or q < 1:
        raise DimensionMismatch(f"need n >= 1, p >= 2, q >= 1; got n={n}, p={p}, q={q}")
    kinds = tuple(CovariateKind(k) for k in kinds)
    if len(kinds) != q:
        raise DimensionMismatch(f"{len(kinds)} kinds for {q} covariate columns")
    if not np.isfinite(X).all():
        raise NonFinite("X contains NaN or Inf")
    if not np.isfinite(U).all():
        raise NonFinite("U contains NaN or Inf")
    for col, kind in enumerate(kinds):
        if kind is CovariateKind.BINARY:
            vals = U[:, col]
            if not np.all((vals == 0.0) | (vals == 1.0)):
                raise BinaryViolation(f"covariate column {col} marked binary has values outside {{0, 1}}")
    return Dataset(X=_freeze(X), U=_freeze(U), covariate_kinds=kinds)


def infer_kinds(U) -> tuple[CovariateKind, ...]:
    """Infer column kinds: a column containing only values in {0, 1} is binary."""
    U = np.asarray(U, dtype=np.float64)
    kinds = []
    for col in range(U.shape[1]):
        vals = U[:, col]
        if np.all((vals == 0.0) | (vals == 1.0)):
            kinds.append(CovariateKind.BINARY)
        else:
            kinds.append(CovariateKind.CONTINUOUS)
    return tuple(kinds)


@dataclass(frozen=True)
class ScalingRecord:
    """Per-column (mean, sd) used to standardize continuous covariates.

    Binary columns carry the identity transform (mean 0, sd 1).
    """

    means: np.ndarray
    sds: np.ndarray

    def inverse(self, U_std: np.ndarray) -> np.ndarray:
        """Map standardized covariates back to the original scale."""
        return U_std * self.sds + self.means


def standardize_covariates(d: Dataset) -> tuple[Dataset, ScalingRecord]:
    """Zero-mean, unit-variance scaling of continuous covariate columns.

    Sample variance uses denominator n - 1.  Binary columns are left
    untouched.  Raises DegenerateColumn for a constant continuous column.
    """
    U = np.array(d.U)
    means = np.zeros(d.q)
    sds = np.ones(d.q)
    for col, kind in enumerate(d.covariate_kinds):
        if kind is CovariateKind.CONTINUOUS:
            mu = U[:, col].mean()
            sd = U[:, col].std(ddof=1) if d.n > 1 else 0.0
            if sd <= 0.0:
                raise DegenerateColumn(f"continuous covariate column {col} has zero variance")
            U[:, col] = (U[:, col] - mu) / sd
            means[col] = mu
            sds[col] = sd
    out = Dataset(X=d.X, U=_freeze(U), covariate_kinds=d.covariate_kinds)
    return out, ScalingRecord(means=_freeze(means), sds=_freeze(sds))


def center_responses(d: Dataset) -> tuple[Dataset, np.ndarray]:
    """Subtract column means from X (optional preprocessing for real data).

    Returns the centered dataset and the vector of removed means.
    """
    means = d.X.mean(axis=0)
    return (
        Dataset(X=_freeze(d.X - means), U=d.U, covariate_kinds=d.covariate_kinds),
        means,
    )


@dataclass(frozen=True)
class PenaltyConfig:
    """Elementwise weight ``lam`` and group weight ``lam_g`` of the penalty.

    The equivalent mixture parametrization is lam = alpha_s * lambda0,
    lam_g = (1 - alpha_s) * lambda0.  When built through
    :meth:`from_mixture`, the originating pair is stored so the two
    parametrizations round-trip exactly.
    """

    lam: float
    lam_g: float
    _alpha_s: float | None = field(default=None, repr=False, compare=False)
    _lambda0: float | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.lam < 0 or self.lam_g < 0:
            raise ValueError("penalty weights must be nonnegative")

    @classmethod
    def from_mixture(cls, alpha_s: float, lambda0: float) -> "PenaltyConfig":
        if not 0.0 <= alpha_s <= 1.0:
            raise ValueError("alpha_s must lie in [0, 1]")
        if lambda0 < 0:
            raise ValueError("lambda0 must be nonnegative")
        # Round the larger component and complement the smaller: the
        # subtraction is then exact (Sterbenz), so lam + lam_g == lambda0.
        if alpha_s >= 0.5:
            lam = alpha_s * lambda0
            lam_g = lambda0 - lam
        else:
            lam_g = (1.0 - alpha_s) * lambda0
            lam = lambda0 - lam_g
        return cls(lam=lam, lam_g=lam_g, _alpha_s=alpha_s, _lambda0=lambda0)

    @property
    def alpha_s(self) -> float:
        if self._alpha_s is not None:
            return self._alpha_s
        total = self.lam + self.lam_g
        return self.lam / total if total > 0 else 1.0

    @property
    def lambda0(self) -> float:
        if self._lambda0 is not None:
            return self._lambda0
        return self.lam + self.lam_g
