"""Per-node regression: interaction design, fitting, and variance estimation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import Dataset, PenaltyConfig
from .errors import DegenerateDoF, NonFinite, SolverDiverged, ZeroVariance
from .solver import SolverOptions, kkt_residual, make_problem, solve

__all__ = [
    "InteractionDesign",
    "NodewiseFit",
    "build_interaction_design",
    "fit_node",
    "estimate_sigma2",
    "rescale_to_theta",
    "SIGMA2_FLOOR",
]

SIGMA2_FLOOR = 1e-12


@dataclass(frozen=True)
class InteractionDesign:
    """Interaction matrix W for one node: blocks [X_-j | X_-j * u_1 | ...].

    Block 0 is X with column ``node`` removed; block h multiplies every one
    of those columns elementwise by covariate h.  Within each block the
    original response order is preserved.
    """

    node: int
    W: np.ndarray
    p: int
    q: int

    def column_of(self, h: int, k: int) -> int:
        """Flat column index of response k within block h (k != node)."""
        if k == self.node:
            raise ValueError("node column is excluded from its own design")
        pos = k if k < self.node else k - 1
        return h * (self.p - 1) + pos

    def blocks(self) -> tuple[np.ndarray, ...]:
        m = self.p - 1
        return tuple(self.W[:, h * m : (h + 1) * m] for h in range(self.q + 1))


@dataclass(frozen=True)
class NodewiseFit:
    node: int
    gamma: np.ndarray
    beta_blocks: tuple[np.ndarray, ...]
    sigma2: float
    objective: float
    iterations: int
    kkt_residual: float


def build_interaction_design(d: Dataset, j: int) -> InteractionDesign:
    if not 0 <= j < d.p:
        raise IndexError(f"node {j} out of range for p={d.p}")
    x_rest = np.delete(d.X, j, axis=1)
    parts = [x_rest] + [x_rest * d.U[:, h : h + 1] for h in range(d.q)]
    W = np.ascontiguousarray(np.hstack(parts))
    return InteractionDesign(node=j, W=W, p=d.p, q=d.q)


def estimate_sigma2(y, fitted, s_beta: int, s_gamma: int, estimator: str = "s2") -> float:
    """Residual variance estimate with a sparsity-adjusted denominator.

    ``s1`` divides by n - s_beta - s_gamma, ``s2`` by n - s_beta - 1.
    Raises DegenerateDoF when the denominator is not positive and
    ZeroVariance when the residual is exactly zero.
    """
    y = np.asarray(y, dtype=np.float64)
    fitted = np.asarray(fitted, dtype=np.float64)
    n = y.size
    rss = float(np.sum((y - fitted) ** 2))
    if estimator == "s1":
        denom = n - s_beta - s_gamma
    elif estimator == "s2":
        denom = n - s_beta - 1
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    if denom <= 0:
        raise DegenerateDoF(f"denominator {denom} <= 0 for estimator {estimator}")
    if rss == 0.0:
        raise ZeroVariance("residual sum of squares is zero")
    return rss / denom


def _sigma2_guarded(y, fitted, s_beta, s_gamma, estimator) -> float:
    try:
        return estimate_sigma2(y, fitted, s_beta, s_gamma, estimator)
    except DegenerateDoF:
        warnings.warn(
            "sparsity-adjusted variance denominator not positive; falling back to n",
            RuntimeWarning,
            stacklevel=3,
        )
        rss = float(np.sum((y - np.asarray(fitted)) ** 2))
        if rss == 0.0:
            warnings.warn(
                "interpolating fit: residual variance floored", RuntimeWarning, stacklevel=3
            )
            return SIGMA2_FLOOR
        return rss / y.size
    except ZeroVariance:
        warnings.warn(
            "interpolating fit: residual variance floored", RuntimeWarning, stacklevel=3
        )
        return SIGMA2_FLOOR


def fit_node(
    d: Dataset,
    j: int,
    penalty: PenaltyConfig,
    opts: SolverOptions | None = None,
    estimator: str = "s2",
) -> NodewiseFit:
    """Solve the penalized regression of response j and estimate its variance."""
    opts = opts or SolverOptions()
    design = build_interaction_design(d, j)
    problem = make_problem(
        d.X[:, j], d.U, design.blocks(), penalty, standardize=opts.standardize_columns
    )
    try:
        sol = solve(problem, opts)
    except NonFinite as exc:
        raise SolverDiverged(f"node {j}: {exc}") from exc
    fitted = problem.design @ problem.flat_coef(sol.gamma, sol.beta_blocks)
    s_gamma = int(np.count_nonzero(sol.gamma))
    s_beta = sum(int(np.count_nonzero(b)) for b in sol.beta_blocks)
    sigma2 = max(
        _sigma2_guarded(d.X[:, j], fitted, s_beta, s_gamma, estimator), SIGMA2_FLOOR
    )
    return NodewiseFit(
        node=j,
        gamma=sol.gamma,
        beta_blocks=sol.beta_blocks,
        sigma2=sigma2,
        objective=sol.objective,
        iterations=sol.outer_iters,
        kkt_residual=kkt_residual(problem, sol),
    )


def rescale_to_theta(fit: NodewiseFit) -> tuple[np.ndarray, ...]:
    """Map regression-scale blocks to precision-component scale: -beta / sigma2."""
    if fit.sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    return tuple(-b / fit.sigma2 for b in fit.beta_blocks)
