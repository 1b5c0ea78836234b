"""Penalized nodewise least-squares solver.

The objective is

    (1/2n) ||y - A_gamma g - sum_h A_h b_h||^2
        + lam (||g||_1 + sum_h ||b_h||_1) + lam_g sum_{h>=1} ||b_h||_2

where block 0 and the covariate coefficients g carry only the elementwise
penalty.  Penalties are applied to coefficients of internally rescaled
columns (each column divided by its root mean square) and the returned
coefficients are mapped back to the original scale; pass
``standardize=False`` to :func:`make_problem` to penalize raw-scale
coefficients instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .data import PenaltyConfig
from .errors import DimensionMismatch, NonFinite

__all__ = [
    "SglProblem",
    "SolverOptions",
    "SglSolution",
    "make_problem",
    "soft_threshold",
    "objective",
    "solve",
    "solve_path",
    "kkt_residual",
]


def soft_threshold(z: float, t: float) -> float:
    """sign(z) * max(|z| - t, 0)."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    return math.copysign(max(abs(z) - t, 0.0), z)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-6
    max_outer_iters: int = 10_000
    inner_tol: float = 1e-8
    inner_max_iters: int = 1_000
    standardize_columns: bool = True

    def __post_init__(self):
        if self.tol <= 0 or self.inner_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class SglProblem:
    """One nodewise problem: response, design blocks and penalty.

    ``design`` is the n x d concatenation [A_gamma | A_0 | ... | A_{n_groups}]
    and ``column_scales`` holds the per-column rescaling applied internally
    (all ones when standardization is off).  Columns whose scale came out
    zero are recorded in ``dropped`` and their coefficients stay pinned at 0.
    """

    y: np.ndarray
    design: np.ndarray
    q: int
    m: int
    n_groups: int
    penalty: PenaltyConfig | None
    column_scales: np.ndarray
    dropped: np.ndarray
    _xt: np.ndarray = field(repr=False)
    _nu: np.ndarray = field(repr=False)
    _lips: np.ndarray = field(repr=False)
    _grams: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def dim(self) -> int:
        return self.design.shape[1]

    @property
    def a_gamma(self) -> np.ndarray:
        return self.design[:, : self.q]

    @property
    def a_beta_blocks(self) -> tuple[np.ndarray, ...]:
        out = []
        for h in range(self.n_groups + 1):
            lo = self.q + h * self.m
            out.append(self.design[:, lo : lo + self.m])
        return tuple(out)

    def split_coef(self, coef: np.ndarray) -> tuple[np.ndarray, tuple[np.ndarray, ...]]:
        gamma = coef[: self.q]
        blocks = tuple(
            coef[self.q + h * self.m : self.q + (h + 1) * self.m]
            for h in range(self.n_groups + 1)
        )
        return gamma, blocks

    def flat_coef(self, gamma, beta_blocks) -> np.ndarray:
        gamma = np.asarray(gamma, dtype=np.float64)
        if gamma.size != self.q:
            raise DimensionMismatch(f"gamma has size {gamma.size}, expected {self.q}")
        if len(beta_blocks) != self.n_groups + 1:
            raise DimensionMismatch(
                f"{len(beta_blocks)} beta blocks, expected {self.n_groups + 1}"
            )
        parts = [gamma]
        for h, b in enumerate(beta_blocks):
            b = np.asarray(b, dtype=np.float64)
            if b.size != self.m:
                raise DimensionMismatch(f"block {h} has size {b.size}, expected {self.m}")
            parts.append(b)
        return np.concatenate(parts)


@dataclass
class SglSolution:
    gamma: np.ndarray
    beta_blocks: tuple[np.ndarray, ...]
    objective: float
    outer_iters: int
    converged: bool
    obj_trace: np.ndarray


def make_problem(
    y,
    a_gamma,
    a_beta_blocks,
    penalty: PenaltyConfig | None = None,
    standardize: bool = True,
) -> SglProblem:
    """Assemble and precompute an :class:`SglProblem` from its design blocks."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    a_gamma = np.asarray(a_gamma, dtype=np.float64)
    blocks = [np.asarray(b, dtype=np.float64) for b in a_beta_blocks]
    if a_gamma.ndim != 2 or any(b.ndim != 2 for b in blocks):
        raise DimensionMismatch("design blocks must be 2-d")
    n = y.size
    if a_gamma.shape[0] != n or any(b.shape[0] != n for b in blocks):
        raise DimensionMismatch("design blocks and y disagree on the sample count")
    m = blocks[0].shape[1]
    if any(b.shape[1] != m for b in blocks):
        raise DimensionMismatch("beta blocks must share a common width")
    design = np.ascontiguousarray(np.hstack([a_gamma] + blocks))
    return _problem_from_design(y, design, a_gamma.shape[1], m, len(blocks) - 1, penalty, standardize)


def _problem_from_design(y, design, q, m, n_groups, penalty, standardize) -> SglProblem:
    n, d = design.shape
    if d != q + (n_groups + 1) * m:
        raise DimensionMismatch("design width does not match the block layout")
    rms = np.sqrt(np.mean(design * design, axis=0))
    max_rms = rms.max() if d else 0.0
    dropped = rms <= max_rms * 1e-14
    scales = np.where(dropped, 1.0, rms) if standardize else np.ones(d)
    xt = np.ascontiguousarray((design / scales).T)
    xt[dropped, :] = 0.0
    nu = np.einsum("ij,ij->i", xt, xt) / n
    nu[dropped] = 0.0
    lips = np.zeros(n_groups)
    grams = np.zeros((n_groups, m, m))
    for h in range(n_groups):
        lo = q + (h + 1) * m
        block = xt[lo : lo + m]
        grams[h] = block @ block.T / n
        lips[h] = float(np.linalg.eigvalsh(grams[h])[-1]) if m else 0.0
    return SglProblem(
        y=y,
        design=design,
        q=q,
        m=m,
        n_groups=n_groups,
        penalty=penalty,
        column_scales=scales,
        dropped=np.flatnonzero(dropped),
        _xt=xt,
        _nu=nu,
        _lips=lips,
        _grams=grams,
    )


def objective(problem: SglProblem, gamma, beta_blocks) -> float:
    """Penalized objective at original-scale coefficients.

    Penalties are evaluated on the internally rescaled coefficients carried
    by ``problem.column_scales`` (identical to the raw formula when scales
    are all ones).
    """
    coef = problem.flat_coef(gamma, beta_blocks)
    r = problem.y - problem.design @ coef
    coef_std = coef * problem.column_scales
    pen = problem.penalty
    if pen is None:
        raise ValueError("problem has no penalty configured")
    q, m = problem.q, problem.m
    group_norms = 0.0
    for h in range(1, problem.n_groups + 1):
        seg = coef_std[q + h * m : q + (h + 1) * m]
        group_norms += float(np.linalg.norm(seg))
    return float(
        0.5 * (r @ r) / problem.n
        + pen.lam * np.abs(coef_std).sum()
        + pen.lam_g * group_norms
    )


def _run_kernel(problem, lam_seq, lamg_seq, opts, coef0, trace_len):
    trace = np.full(trace_len, np.nan) if trace_len else np.empty(0)
    coefs, iters, conv, objs, status = kernels.bcd_path(
        problem._xt,
        problem.y,
        problem.q,
        problem.m,
        problem.n_groups,
        problem._nu,
        problem._lips,
        problem._grams,
        np.ascontiguousarray(lam_seq, dtype=np.float64),
        np.ascontiguousarray(lamg_seq, dtype=np.float64),
        opts.tol,
        opts.max_outer_iters,
        opts.inner_tol,
        opts.inner_max_iters,
        coef0,
        trace,
    )
    if status == kernels.STATUS_NONFINITE:
        raise NonFinite("objective became non-finite during block descent")
    return coefs, iters, conv, objs, trace


def _initial_coef(problem, warm_start):
    if warm_start is None:
        return np.zeros(problem.dim)
    coef = problem.flat_coef(warm_start.gamma, warm_start.beta_blocks)
    return coef * problem.column_scales


def solve(
    problem: SglProblem,
    opts: SolverOptions | None = None,
    warm_start: SglSolution | None = None,
) -> SglSolution:
    """Minimize the penalized objective by block coordinate descent."""
    opts = opts or SolverOptions()
    pen = problem.penalty
    if pen is None:
        raise ValueError("problem has no penalty configured")
    coef0 = _initial_coef(problem, warm_start)
    coefs, iters, conv, objs, trace = _run_kernel(
        problem,
        np.array([pen.lam]),
        np.array([pen.lam_g]),
        opts,
        coef0,
        trace_len=opts.max_outer_iters,
    )
    coef = coefs[0] / problem.column_scales
    gamma, blocks = problem.split_coef(coef)
    return SglSolution(
        gamma=gamma.copy(),
        beta_blocks=tuple(b.copy() for b in blocks),
        objective=float(objs[0]),
        outer_iters=int(iters[0]),
        converged=bool(conv[0]),
        obj_trace=trace[np.isfinite(trace)].copy(),
    )


def solve_path(
    problem: SglProblem,
    penalties: list[PenaltyConfig],
    opts: SolverOptions | None = None,
    warm_start: SglSolution | None = None,
):
    """Warm-started solves along a penalty sequence (largest first).

    Returns (coefs, objectives, iters, converged) with original-scale
    coefficient rows, one per penalty.
    """
    opts = opts or SolverOptions()
    lam_seq = np.array([p.lam for p in penalties])
    lamg_seq = np.array([p.lam_g for p in penalties])
    coef0 = _initial_coef(problem, warm_start)
    coefs, iters, conv, objs, _ = _run_kernel(problem, lam_seq, lamg_seq, opts, coef0, 0)
    return coefs / problem.column_scales, objs, iters, conv.astype(bool)


def kkt_residual(problem: SglProblem, sol: SglSolution) -> float:
    """Maximum violation of the first-order optimality conditions.

    Evaluated on the internally rescaled problem actually solved; dropped
    columns are excluded.
    """
    pen = problem.penalty
    if pen is None:
        raise ValueError("problem has no penalty configured")
    lam, lamg = pen.lam, pen.lam_g
    coef = problem.flat_coef(sol.gamma, sol.beta_blocks)
    coef_std = coef * problem.column_scales
    r = problem.y - problem.design @ coef
    c = problem._xt @ r / problem.n
    keep = np.ones(problem.dim, dtype=bool)
    keep[problem.dropped] = False
    q, m = problem.q, problem.m
    viol = 0.0
    for l in range(q + m):
        if not keep[l]:
            continue
        if coef_std[l] != 0.0:
            viol = max(viol, abs(c[l] - lam * np.sign(coef_std[l])))
        else:
            viol = max(viol, abs(c[l]) - lam)
    for h in range(problem.n_groups):
        lo = q + (h + 1) * m
        seg = coef_std[lo : lo + m]
        ck = c[lo : lo + m]
        kp = keep[lo : lo + m]
        if np.any(seg != 0.0):
            ns = float(np.linalg.norm(seg))
            for k in range(m):
                if not kp[k]:
                    continue
                if seg[k] != 0.0:
                    viol = max(
                        viol, abs(ck[k] - lam * np.sign(seg[k]) - lamg * seg[k] / ns)
                    )
                else:
                    viol = max(viol, abs(ck[k]) - lam)
        else:
            sv = np.sign(ck) * np.maximum(np.abs(ck) - lam, 0.0)
            sv[~kp] = 0.0
            viol = max(viol, float(np.linalg.norm(sv)) - lamg)
    return max(viol, 0.0)
