"""Penalty-path construction and k-fold cross-validation.

The penalty pair is parametrized as lam = alpha_s * lambda0,
lam_g = (1 - alpha_s) * lambda0; for each alpha_s a log-spaced path of
lambda0 values is fit from the all-zero threshold downward with warm starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, PenaltyConfig
from .errors import FoldTooSmall
from .solver import SglProblem, SolverOptions, solve_path

__all__ = [
    "PenaltyGrid",
    "CvResult",
    "lambda0_max",
    "make_path",
    "fold_assignments",
    "cross_validate",
]

DEFAULT_ALPHAS = tuple(round(0.1 * k, 1) for k in range(1, 11))


@dataclass(frozen=True)
class PenaltyGrid:
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    n_lambda0: int = 100
    lambda_min_ratio: float = 0.01
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.alphas or any(not 0.0 < a <= 1.0 for a in self.alphas):
            raise ValueError("alphas must be nonempty with every value in (0, 1]")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if self.n_lambda0 < 2:
            raise ValueError("need at least 2 path points")
        if not 0.0 < self.lambda_min_ratio < 1.0:
            raise ValueError("lambda_min_ratio must lie in (0, 1)")


@dataclass
class CvResult:
    """Cross-validation table and selected penalty pair for one node."""

    node: int
    alphas: np.ndarray
    lambda0: np.ndarray  # (n_alpha, n_lambda0)
    cv_error: np.ndarray  # (n_alpha, n_lambda0) mean over folds
    cv_se: np.ndarray  # (n_alpha, n_lambda0) standard error over folds
    selected_alpha: float
    selected_lambda0: float
    selected_error: float


def lambda0_max(problem: SglProblem, alpha_s: float) -> float:
    """Smallest lambda0 for which the all-zero vector is optimal.

    Uses the zero-coefficient stationarity conditions on the problem's
    (internally rescaled) columns: an elementwise bound for the covariate
    and first response block, and per grouped block the crossing of the
    soft-thresholded correlation norm with the group weight, found by
    bisection.
    """
    if not 0.0 < alpha_s <= 1.0:
        raise ValueError("alpha_s must lie in (0, 1]")
    c = problem._xt @ problem.y / problem.n
    q, m = problem.q, problem.m
    out = float(np.max(np.abs(c[: q + m]))) / alpha_s if q + m else 0.0
    for h in range(problem.n_groups):
        ch = np.abs(c[q + (h + 1) * m : q + (h + 2) * m])
        top = float(ch.max()) if m else 0.0
        if top == 0.0:
            continue
        if alpha_s == 1.0:
            out = max(out, top)
            continue
        lo, hi = 0.0, top / alpha_s
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            sv = np.maximum(ch - alpha_s * mid, 0.0)
            if np.sqrt(sv @ sv) <= (1.0 - alpha_s) * mid:
                hi = mid
            else:
                lo = mid
        out = max(out, hi)
    return out


def make_path(problem: SglProblem, grid: PenaltyGrid) -> dict[float, np.ndarray]:
    """Per-alpha log-spaced lambda0 sequences from the zero threshold down."""
    paths = {}
    for alpha in grid.alphas:
        top = lambda0_max(problem, alpha)
        exponents = np.linspace(0.0, 1.0, grid.n_lambda0)
        paths[alpha] = top * grid.lambda_min_ratio**exponents
    return paths


def fold_assignments(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Shuffle 0..n-1 into ``folds`` near-equal validation index sets."""
    if n < folds:
        raise FoldTooSmall(f"{folds} folds requested for {n} samples")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(901,))))
    perm = rng.permutation(n)
    sizes = np.full(folds, n // folds)
    sizes[: n % folds] += 1
    out = []
    start = 0
    for s in sizes:
        out.append(np.sort(perm[start : start + s]))
        start += s
    return out


def _penalties_for(alpha: float, lambda0s: np.ndarray) -> list[PenaltyConfig]:
    return [PenaltyConfig.from_mixture(alpha, float(l0)) for l0 in lambda0s]


def cross_validate(
    d: Dataset,
    j: int,
    grid: PenaltyGrid,
    opts: SolverOptions | None = None,
    paths: dict[float, np.ndarray] | None = None,
) -> CvResult:
    """k-fold cross-validation of the penalty pair for node ``j``.

    Fold membership is a seeded shuffle shared by all nodes.  Paths are
    computed from the full-data problem unless supplied (the shared-tuning
    mode passes a common path).  Selection minimizes the mean validation
    error, breaking ties toward larger lambda0 and then larger alpha_s.
    """
    from .nodewise import build_interaction_design
    from .solver import _problem_from_design

    opts = opts or SolverOptions()
    n, q, m = d.n, d.q, d.p - 1
    design = build_interaction_design(d, j)
    F = np.ascontiguousarray(np.hstack([d.U, design.W]))
    y = d.X[:, j]
    if paths is None:
        full_prob = _problem_from_design(y, F, q, m, q, None, opts.standardize_columns)
        paths = make_path(full_prob, grid)
    folds = fold_assignments(n, grid.folds, grid.seed)
    n_alpha, n_t = len(grid.alphas), grid.n_lambda0
    errors = np.empty((n_alpha, n_t, grid.folds))
    for f, val_idx in enumerate(folds):
        mask = np.ones(n, dtype=bool)
        mask[val_idx] = False
        F_tr = np.ascontiguousarray(F[mask])
        y_tr = np.ascontiguousarray(y[mask])
        F_va = F[val_idx]
        y_va = y[val_idx]
        prob_tr = _problem_from_design(y_tr, F_tr, q, m, q, None, opts.standardize_columns)
        for a_i, alpha in enumerate(grid.alphas):
            coefs, _, _, _ = solve_path(prob_tr, _penalties_for(alpha, paths[alpha]), opts)
            resid = y_va[:, None] - F_va @ coefs.T
            errors[a_i, :, f] = np.mean(resid * resid, axis=0)
    cv_mean = errors.mean(axis=2)
    cv_se = errors.std(axis=2, ddof=1) / np.sqrt(grid.folds)
    lambda0_tbl = np.vstack([paths[a] for a in grid.alphas])
    best = float(cv_mean.min())
    rows, cols = np.where(cv_mean == best)
    pick = max(
        range(rows.size),
        key=lambda i: (lambda0_tbl[rows[i], cols[i]], grid.alphas[rows[i]]),
    )
    return CvResult(
        node=j,
        alphas=np.array(grid.alphas),
        lambda0=lambda0_tbl,
        cv_error=cv_mean,
        cv_se=cv_se,
        selected_alpha=float(grid.alphas[rows[pick]]),
        selected_lambda0=float(lambda0_tbl[rows[pick], cols[pick]]),
        selected_error=best,
    )
