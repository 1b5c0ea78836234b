"""Evaluation metrics against simulation ground truth, and the
sparsity-scaling study."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch
from .graph import GraphModel, predict_subject
from .simulate import SimulationTruth

__all__ = [
    "EvalReport",
    "edge_rates",
    "beta_error",
    "gamma_error",
    "omega_error",
    "mu_error",
    "truth_node_blocks",
    "model_node_blocks",
    "evaluate",
    "ScalingRow",
    "ScalingStudyResult",
    "sparsity_scaling_experiment",
]


@dataclass(frozen=True)
class EvalReport:
    tpr: float
    tpr_pop: float
    fpr_pop: float
    tpr_cov: float
    fpr_overall: float
    beta_err: float
    omega_err: float
    omega_tpr: float
    omega_fpr: float
    mu_err: float

    def as_dict(self) -> dict[str, float]:
        return {
            "tpr": self.tpr,
            "tpr_pop": self.tpr_pop,
            "fpr_pop": self.fpr_pop,
            "tpr_cov": self.tpr_cov,
            "fpr_overall": self.fpr_overall,
            "beta_err": self.beta_err,
            "omega_err": self.omega_err,
            "omega_tpr": self.omega_tpr,
            "omega_fpr": self.omega_fpr,
            "mu_err": self.mu_err,
        }


METRIC_NAMES = (
    "tpr",
    "tpr_pop",
    "fpr_pop",
    "tpr_cov",
    "fpr_overall",
    "beta_err",
    "omega_err",
    "omega_tpr",
    "omega_fpr",
    "mu_err",
)

_SCOPES = {"all", "pop", "cov"}


def _support_counts(est, truth, h_range):
    p = truth[0].shape[0]
    iu = np.triu_indices(p, k=1)
    tp = fp = n_true = n_false = 0
    for h in h_range:
        t = truth[h][iu] != 0.0
        e = est[h][iu] != 0.0
        tp += int(np.count_nonzero(t & e))
        fp += int(np.count_nonzero(~t & e))
        n_true += int(np.count_nonzero(t))
        n_false += int(np.count_nonzero(~t))
    return tp, fp, n_true, n_false


def edge_rates(est, truth, scope: str = "all") -> tuple[float, float]:
    """(TPR, FPR) of detected off-diagonal edges over the selected components.

    scope 'pop' uses component 0 only, 'cov' components 1..q, 'all' every
    component.  TPR is 1 when the truth has no edges in scope; the FPR
    denominator is the count of true non-edges.
    """
    if scope not in _SCOPES:
        raise ValueError(f"scope must be one of {sorted(_SCOPES)}")
    if len(est) != len(truth) or est[0].shape != truth[0].shape:
        raise DimensionMismatch("estimate and truth component lists disagree")
    n_comp = len(truth)
    h_range = {"all": range(n_comp), "pop": range(1), "cov": range(1, n_comp)}[scope]
    tp, fp, n_true, n_false = _support_counts(est, truth, h_range)
    tpr = tp / n_true if n_true else 1.0
    fpr = fp / n_false if n_false else 0.0
    return tpr, fpr


def _union_support(mats) -> np.ndarray:
    p = mats[0].shape[0]
    out = np.zeros((p, p), dtype=bool)
    for B in mats:
        out |= B != 0.0
    np.fill_diagonal(out, False)
    return out


def omega_support_rates(est, truth) -> tuple[float, float]:
    """Edge rates of the union support across components (the precision
    pattern seen over all covariate values)."""
    e = _union_support(est)
    t = _union_support(truth)
    iu = np.triu_indices(t.shape[0], k=1)
    te, ee = t[iu], e[iu]
    n_true = int(np.count_nonzero(te))
    n_false = te.size - n_true
    tp = int(np.count_nonzero(te & ee))
    fp = int(np.count_nonzero(~te & ee))
    return (tp / n_true if n_true else 1.0), (fp / n_false if n_false else 0.0)


def truth_node_blocks(truth: SimulationTruth) -> np.ndarray:
    """Per-node blocks of the true components: entry (j, h, pos) is
    [B_h]_{jk} with k running over responses other than j."""
    p = truth.b[0].shape[0]
    n_comp = len(truth.b)
    out = np.empty((p, n_comp, p - 1))
    for j in range(p):
        keep = [k for k in range(p) if k != j]
        for h in range(n_comp):
            out[j, h, :] = truth.b[h][j, keep]
    return out


def model_node_blocks(model: GraphModel) -> np.ndarray:
    """Node blocks reconstructed from symmetrized components (used when the
    pre-symmetrization nodewise estimates are not available)."""
    p = model.p
    out = np.empty((p, model.q + 1, p - 1))
    for j in range(p):
        keep = [k for k in range(p) if k != j]
        for h in range(model.q + 1):
            out[j, h, :] = model.b_tilde[h][j, keep]
    return out


def beta_error(beta_tilde: np.ndarray, truth: SimulationTruth) -> float:
    """Sum over nodes of the l2 error of the rescaled interaction blocks
    against the true component entries."""
    ref = truth_node_blocks(truth)
    if beta_tilde.shape != ref.shape:
        raise DimensionMismatch(
            f"blocks of shape {beta_tilde.shape}, truth has {ref.shape}"
        )
    diff = beta_tilde - ref
    return float(np.sqrt((diff * diff).sum(axis=(1, 2))).sum())


def gamma_error(gamma_hat: np.ndarray, truth: SimulationTruth) -> float:
    diff = gamma_hat - truth.gamma
    return float(np.sqrt((diff * diff).sum(axis=1)).sum())


def _model_omegas(model: GraphModel, U: np.ndarray) -> np.ndarray:
    stack = np.stack(model.b_tilde[1:]) if model.q else np.zeros((0, model.p, model.p))
    return model.b_tilde[0][None] + np.einsum("hjk,nh->njk", stack, U)


def omega_error(model: GraphModel, truth: SimulationTruth) -> float:
    """Mean over subjects of the squared off-diagonal Frobenius error of the
    subject precision matrices."""
    U = truth.dataset.U
    est = _model_omegas(model, U)
    diff = est - truth.omega_per_subject
    idx = np.arange(model.p)
    diff[:, idx, idx] = 0.0
    return float((diff * diff).sum() / U.shape[0])


def mu_error(model: GraphModel, truth: SimulationTruth) -> float:
    """Mean over subjects of the squared l2 error of the predicted means."""
    U = truth.dataset.U
    total = 0.0
    for i in range(U.shape[0]):
        pred = predict_subject(model, U[i])
        delta = pred.mu - truth.mu_per_subject[i]
        total += float(delta @ delta)
    return total / U.shape[0]


def evaluate(
    model: GraphModel,
    truth: SimulationTruth,
    beta_tilde: np.ndarray | None = None,
) -> EvalReport:
    """All benchmark metrics for a fitted model against the ground truth.

    ``beta_tilde`` should be the per-node rescaled blocks before
    symmetrization; when absent they are read off the symmetrized
    components.
    """
    est = list(model.b_tilde)
    tru = list(truth.b)
    tpr, fpr_overall = edge_rates(est, tru, "all")
    tpr_pop, fpr_pop = edge_rates(est, tru, "pop")
    tpr_cov, _ = edge_rates(est, tru, "cov")
    om_tpr, om_fpr = omega_support_rates(est, tru)
    if beta_tilde is None:
        beta_tilde = model_node_blocks(model)
    return EvalReport(
        tpr=tpr,
        tpr_pop=tpr_pop,
        fpr_pop=fpr_pop,
        tpr_cov=tpr_cov,
        fpr_overall=fpr_overall,
        beta_err=beta_error(beta_tilde, truth),
        omega_err=omega_error(model, truth),
        omega_tpr=om_tpr,
        omega_fpr=om_fpr,
        mu_err=mu_error(model, truth),
    )


@dataclass(frozen=True)
class ScalingRow:
    design: str  # 'gamma' or 'graph'
    level: float
    replicate: int
    nonzeros: int
    error: float


@dataclass(frozen=True)
class ScalingStudyResult:
    rows: tuple[ScalingRow, ...]
    slopes: dict[str, float]

    def design_rows(self, design: str) -> list[ScalingRow]:
        return [r for r in self.rows if r.design == design]


def _fit_slope(rows: list[ScalingRow]) -> float:
    pts = [(r.nonzeros, r.error) for r in rows if r.nonzeros > 0 and r.error > 0]
    if len(pts) < 2:
        return float("nan")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope = np.polyfit(x, y, 1)[0]
    return float(slope)


def sparsity_scaling_experiment(
    base_cfg,
    gamma_levels=(0.05, 0.1, 0.2, 0.4, 0.8),
    edge_prob_levels=(0.02, 0.05, 0.1, 0.2, 0.4),
    replicates: int = 50,
    grid=None,
    opts=None,
    cv_opts=None,
    threads: int = 1,
    seed: int = 2024,
) -> ScalingStudyResult:
    """Estimation error versus sparsity under two designs.

    Design 'gamma' redraws the covariate-effect matrix at each density level
    while the precision components stay fixed; design 'graph' redraws the
    precision components at each edge-probability level while the raw
    covariate-effect draw stays fixed.  Each row records the nonzero count
    of the varied part and the total l2 estimation error; the summary fits
    log error on log nonzeros per design (zero-signal rows excluded).
    """
    from .pipeline import _scaling_task, run_parallel

    tasks = []
    for li, level in enumerate(gamma_levels):
        for rep in range(replicates):
            tasks.append((base_cfg, "gamma", float(level), li, rep, grid, opts, cv_opts, seed))
    for li, level in enumerate(edge_prob_levels):
        for rep in range(replicates):
            tasks.append((base_cfg, "graph", float(level), li, rep, grid, opts, cv_opts, seed))
    rows = run_parallel(_scaling_task, tasks, threads)
    result_rows = tuple(ScalingRow(*r) for r in rows)
    slopes = {
        design: _fit_slope([r for r in result_rows if r.design == design])
        for design in ("gamma", "graph")
    }
    return ScalingStudyResult(rows=result_rows, slopes=slopes)
