"""Independent reference solvers used to cross-check the package solver.

The main oracle is a monolithic proximal-gradient method on the full
concatenated design with an exact global Lipschitz step: structurally
unrelated to the block-descent path in the package (no blockwise updates,
no zero-group tests, no active sets).  It runs until the objective
plateaus at machine precision or an iteration cap.
"""

from __future__ import annotations

import numpy as np

from covggm.accel import maybe_njit


@maybe_njit(cache=True)
def _pg_iterate(ft, y, q, m, n_groups, lam, lamg, lip, max_iter, window, rel_tol):
    d, n = ft.shape
    b = np.zeros(d)
    r = y.copy()
    go = q + m
    obj_prev = np.inf
    obj = np.inf
    for it in range(max_iter):
        g = np.dot(ft, r) / n
        z = b + g / lip
        z = np.sign(z) * np.maximum(np.abs(z) - lam / lip, 0.0)
        for h in range(n_groups):
            seg = z[go + h * m : go + (h + 1) * m]
            zn = np.sqrt(np.dot(seg, seg))
            if zn > 0.0:
                f = 1.0 - (lamg / lip) / zn
                if f < 0.0:
                    f = 0.0
                for k in range(m):
                    seg[k] = f * seg[k]
        b = z
        r = y - np.dot(b, ft)
        if (it + 1) % window == 0:
            l1 = np.sum(np.abs(b))
            gsum = 0.0
            for h in range(n_groups):
                seg = b[go + h * m : go + (h + 1) * m]
                gsum += np.sqrt(np.dot(seg, seg))
            obj = 0.5 * np.dot(r, r) / n + lam * l1 + lamg * gsum
            if obj_prev - obj < rel_tol * max(1.0, abs(obj)):
                break
            obj_prev = obj
    return b, obj


def prox_gradient_solve(
    design: np.ndarray,
    y: np.ndarray,
    q: int,
    m: int,
    n_groups: int,
    lam: float,
    lamg: float,
    max_iter: int = 500_000,
    window: int = 500,
    rel_tol: float = 1e-15,
):
    """Solve the sparse-group objective on a raw design by proximal gradient.

    Returns (coef, objective).  The step size is 1 / lambda_max(F^T F / n),
    computed exactly by symmetric eigendecomposition.
    """
    design = np.asarray(design, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = y.size
    gram = design.T @ design / n
    lip = float(np.linalg.eigvalsh(gram)[-1])
    if lip <= 0.0:
        return np.zeros(design.shape[1]), float(0.5 * (y @ y) / n)
    ft = np.ascontiguousarray(design.T)
    return _pg_iterate(ft, y, q, m, n_groups, lam, lamg, lip * (1 + 1e-12), max_iter, window, rel_tol)


def lasso_objective(design, y, coef, lam):
    r = y - design @ coef
    return float(0.5 * (r @ r) / y.size + lam * np.abs(coef).sum())
