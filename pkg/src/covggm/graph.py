"""Symmetrization of nodewise estimates and per-subject prediction."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, SingularAfterRidge

__all__ = [
    "SymmetrizationRule",
    "GraphModel",
    "SubjectPrediction",
    "symmetrize",
    "predict_subject",
    "edge_sets",
]

log = logging.getLogger(__name__)


class SymmetrizationRule(str, Enum):
    AND = "and"
    OR = "or"


@dataclass(frozen=True)
class GraphModel:
    """Fitted model: covariate effects on the mean plus symmetric
    precision-matrix components indexed by covariate.

    ``b_tilde[0]`` carries 1/sigma2 on its diagonal; the other components
    have zero diagonals.  Off-diagonal entries are the symmetrized nodewise
    estimates.
    """

    gamma_hat: np.ndarray  # (p, q)
    b_tilde: tuple[np.ndarray, ...]  # q+1 symmetric (p, p)
    sigma2: np.ndarray  # (p,)
    symmetrization_rule: SymmetrizationRule

    @property
    def p(self) -> int:
        return self.gamma_hat.shape[0]

    @property
    def q(self) -> int:
        return self.gamma_hat.shape[1]


@dataclass(frozen=True)
class SubjectPrediction:
    omega: np.ndarray  # (p, p) symmetric
    mu: np.ndarray  # (p,)
    ridge_added: float


def _pair_value(a: float, b: float, rule: SymmetrizationRule, j: int, k: int, h: int) -> float:
    if rule is SymmetrizationRule.AND:
        if abs(a) < abs(b):
            return a
        if abs(a) > abs(b):
            return b
        # Exact magnitude tie with both nonzero: the strict inequalities
        # would null the entry; keep the j<k estimate instead.
        if a != 0.0:
            log.info("and-rule magnitude tie at (h=%d, %d, %d); keeping row estimate", h, j, k)
        return a
    if abs(a) > abs(b):
        return a
    if abs(a) < abs(b):
        return b
    if a != 0.0 and a != b:
        log.info("or-rule magnitude tie at (h=%d, %d, %d); keeping row estimate", h, j, k)
    return a if a != 0.0 else b


def symmetrize(
    beta_tilde: np.ndarray,
    sigma2: np.ndarray,
    rule: SymmetrizationRule | str = SymmetrizationRule.AND,
) -> tuple[np.ndarray, ...]:
    """Combine per-node rescaled blocks into symmetric component matrices.

    ``beta_tilde`` has shape (p, q+1, p-1): node-major blocks on the
    precision-component scale.  The "and" rule keeps the smaller-magnitude
    member of each (j,k)/(k,j) pair and yields zero unless both are nonzero;
    the "or" rule keeps the larger-magnitude member.  Component 0 gets
    1/sigma2 on the diagonal, the others zero.
    """
    rule = SymmetrizationRule(rule)
    p, n_comp, m = beta_tilde.shape
    if m != p - 1:
        raise DimensionMismatch(f"blocks of length {m} for p={p}")
    if sigma2.shape != (p,):
        raise DimensionMismatch("sigma2 must have one entry per node")
    out = []
    for h in range(n_comp):
        B = np.zeros((p, p))
        for j in range(p):
            for k in range(j + 1, p):
                a = beta_tilde[j, h, k - 1]  # k > j, so k sits at position k-1
                b = beta_tilde[k, h, j]  # j < k, so j sits at position j
                B[j, k] = B[k, j] = _pair_value(float(a), float(b), rule, j, k, h)
        if h == 0:
            np.fill_diagonal(B, 1.0 / sigma2)
        out.append(B)
    return tuple(out)


def predict_subject(model: GraphModel, u: np.ndarray) -> SubjectPrediction:
    """Per-subject precision matrix and mean: Omega(u) = B0 + sum_h B_h u_h,
    mu(u) solves Omega(u) mu = diag(1/sigma2) Gamma u.

    A non-positive-definite Omega(u) is repaired by a ridge shift of
    |lambda_min| + 1e-6 before inversion; the shift is reported.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (model.q,):
        raise DimensionMismatch(f"covariate vector of length {u.size}, expected {model.q}")
    omega = model.b_tilde[0].copy()
    for h in range(1, model.q + 1):
        uh = u[h - 1]
        if uh != 0.0:
            omega += model.b_tilde[h] * uh
    rhs = (model.gamma_hat @ u) / model.sigma2
    ridge = 0.0
    omega_pd = omega
    try:
        np.linalg.cholesky(omega)
    except np.linalg.LinAlgError:
        lam_min = float(np.linalg.eigvalsh(omega)[0])
        ridge = abs(lam_min) + 1e-6
        omega_pd = omega + ridge * np.eye(model.p)
    try:
        mu = np.linalg.solve(omega_pd, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularAfterRidge(
            f"precision matrix singular even after ridge {ridge:.3g}"
        ) from exc
    return SubjectPrediction(omega=omega, mu=mu, ridge_added=ridge)


def edge_sets(model: GraphModel, threshold: float = 0.0) -> list[list[tuple[int, int]]]:
    """Per-component lists of upper-triangle pairs with |entry| > threshold."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    out = []
    for B in model.b_tilde:
        mask = np.abs(np.triu(B, k=1)) > threshold
        pairs = [(int(j), int(k)) for j, k in zip(*np.nonzero(mask))]
        out.append(pairs)
    return out
