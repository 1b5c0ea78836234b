"""Block coordinate descent kernels for the penalized nodewise regressions.

All functions operate on a transposed design ``xt`` of shape (d, n) whose
rows are design columns, laid out as: first ``q`` covariate columns, then the
unpenalized-group response block of ``m`` columns, then ``n_groups`` further
blocks of ``m`` interaction columns each.  Coefficients live in a flat vector
with the same layout.  Rows of ``xt`` are assumed C-contiguous and already
scaled; dropped (all-zero) columns must have ``nu == 0`` and a zeroed row.

Each path point screens zero coefficients with a sequential strong rule
(coordinatewise, plus a groupwise test for fully-zero blocks) and solves the
surviving subproblem by block descent; the point ends with an exact
stationarity check of everything screened out and re-solves on violations,
so screening never changes the returned solution.  The residual vector is
maintained incrementally across updates; callers that need certified
optimality should verify the returned solution with a KKT check on a freshly
computed residual.
"""

from __future__ import annotations

import numpy as np

from .accel import maybe_njit

STATUS_OK = 0
STATUS_NONFINITE = 1


@maybe_njit(cache=True)
def soft_threshold(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@maybe_njit(cache=True)
def _l1_block_cd(xt, r, coef, mask, lo, hi, nu, n, lam, inner_tol, inner_max):
    """Cyclic coordinate descent with soft-thresholding on columns lo:hi.

    Coordinates with ``mask == 0`` are skipped.  Updates ``r`` and ``coef``
    in place; returns the max absolute coefficient change relative to the
    block state at entry.
    """
    start = coef[lo:hi].copy()
    for _ in range(inner_max):
        maxd = 0.0
        maxb = 0.0
        for l in range(lo, hi):
            if mask[l] == 0:
                continue
            nl = nu[l]
            if nl <= 0.0:
                continue
            old = coef[l]
            row = xt[l]
            cval = np.dot(row, r) / n + nl * old
            new = soft_threshold(cval, lam) / nl
            if new != old:
                r -= (new - old) * row
                coef[l] = new
            diff = abs(new - old)
            if diff > maxd:
                maxd = diff
            ab = abs(new)
            if ab > maxb:
                maxb = ab
        if maxd < inner_tol * max(1.0, maxb):
            break
    return np.max(np.abs(coef[lo:hi] - start))


@maybe_njit(cache=True)
def _group_block_update(
    xt, r, coef, gram, mask, lo, m, n, lam, lamg, lip, inner_tol, inner_max
):
    """Update one grouped block restricted to unmasked coordinates.

    Runs the zero test, then proximal gradient in coefficient space against
    the cached block gram; the full residual ``r`` is adjusted once at the
    end.  Returns the max absolute coefficient change in the block.
    """
    A = xt[lo : lo + m]
    c_part = np.zeros(m)
    anynz = False
    for k in range(m):
        if coef[lo + k] != 0.0:
            anynz = True
        if mask[lo + k] == 1:
            c_part[k] = np.dot(A[k], r) / n
    if not anynz:
        ss = 0.0
        for k in range(m):
            v = soft_threshold(c_part[k], lam)
            ss += v * v
        if np.sqrt(ss) <= lamg:
            return 0.0
    if lip <= 0.0:
        return 0.0
    b0 = coef[lo : lo + m].copy()
    c_full = c_part + np.dot(gram, b0)
    b = b0.copy()
    step = 1.0 / lip
    for _ in range(inner_max):
        z = b + step * (c_full - np.dot(gram, b))
        nz2 = 0.0
        for k in range(m):
            zk = 0.0
            if mask[lo + k] == 1:
                zk = soft_threshold(z[k], step * lam)
            z[k] = zk
            nz2 += zk * zk
        zn = np.sqrt(nz2)
        shrink = 0.0
        if zn > 0.0:
            f = 1.0 - step * lamg / zn
            if f > 0.0:
                shrink = f
        maxd = 0.0
        maxb = 0.0
        for k in range(m):
            newb = shrink * z[k]
            diff = abs(newb - b[k])
            if diff > maxd:
                maxd = diff
            ab = abs(newb)
            if ab > maxb:
                maxb = ab
            b[k] = newb
        if maxd < inner_tol * max(1.0, maxb):
            break
    mc = 0.0
    for k in range(m):
        dk = b[k] - b0[k]
        if dk != 0.0:
            r -= dk * A[k]
            coef[lo + k] = b[k]
        adk = abs(dk)
        if adk > mc:
            mc = adk
    return mc


@maybe_njit(cache=True)
def _objective_value(coef, rr, n, lam, lamg, q, m, n_groups):
    l1 = np.sum(np.abs(coef))
    go = q + m
    gsum = 0.0
    for h in range(n_groups):
        seg = coef[go + h * m : go + (h + 1) * m]
        gsum += np.sqrt(np.dot(seg, seg))
    return 0.5 * rr / n + lam * l1 + lamg * gsum


@maybe_njit(cache=True)
def _max_abs(coef):
    mx = 0.0
    for l in range(coef.size):
        al = abs(coef[l])
        if al > mx:
            mx = al
    return mx


@maybe_njit(cache=True)
def _group_active(coef, lo, m):
    for k in range(lo, lo + m):
        if coef[k] != 0.0:
            return True
    return False


@maybe_njit(cache=True)
def _sweep(
    xt, r, coef, mask, group_skip, nu, lips, grams, q, m, n_groups, n, lam, lamg,
    inner_tol, inner_max, active_only,
):
    go = q + m
    mc = _l1_block_cd(xt, r, coef, mask, 0, q, nu, n, lam, inner_tol, inner_max)
    mc2 = _l1_block_cd(xt, r, coef, mask, q, go, nu, n, lam, inner_tol, inner_max)
    if mc2 > mc:
        mc = mc2
    for h in range(n_groups):
        lo = go + h * m
        if group_skip[h] == 1:
            continue
        if active_only and not _group_active(coef, lo, m):
            continue
        mch = _group_block_update(
            xt, r, coef, grams[h], mask, lo, m, n, lam, lamg, lips[h],
            inner_tol, inner_max,
        )
        if mch > mc:
            mc = mch
    return mc


@maybe_njit(cache=True, nogil=True)
def bcd_path(
    xt,
    y,
    q,
    m,
    n_groups,
    nu,
    lips,
    grams,
    lam_seq,
    lamg_seq,
    tol,
    max_outer,
    inner_tol,
    inner_max,
    coef,
    trace,
):
    """Solve a sequence of penalty values by warm-started block descent.

    ``coef`` is the starting point and is mutated; one block cycle visits the
    covariate block, the unpenalized-group block and every surviving grouped
    block.  Between full cycles, only blocks with nonzero coefficients are
    iterated.  ``trace`` receives the per-cycle objective of the final
    penalty value when its size is nonzero.

    Returns (coefs, iters, converged, objectives, status) where coefs has one
    row per penalty value.
    """
    d, n = xt.shape
    T = lam_seq.size
    coefs_out = np.empty((T, d))
    iters_out = np.zeros(T, np.int64)
    conv_out = np.zeros(T, np.uint8)
    obj_out = np.full(T, np.nan)
    go = q + m

    r = y.copy()
    for l in range(d):
        cl = coef[l]
        if cl != 0.0:
            r -= cl * xt[l]
    # correlations of every column at the current solution; drives the
    # strong-rule screen of the next point and the violation checks
    c_full = np.dot(xt, r) / n
    surv = np.zeros(d, np.uint8)
    act = np.zeros(d, np.uint8)
    group_skip = np.zeros(n_groups, np.uint8)

    for t in range(T):
        lam = lam_seq[t]
        lamg = lamg_seq[t]
        lam_p = lam_seq[t - 1] if t > 0 else lam
        lamg_p = lamg_seq[t - 1] if t > 0 else lamg
        thr_l = max(2.0 * lam - lam_p, 0.0)
        thr_g = max(2.0 * lamg - lamg_p, 0.0)
        for l in range(d):
            if coef[l] != 0.0:
                surv[l] = 1
            elif nu[l] <= 0.0:
                surv[l] = 0
            else:
                surv[l] = 1 if abs(c_full[l]) >= thr_l else 0
        for h in range(n_groups):
            lo = go + h * m
            if _group_active(coef, lo, m):
                group_skip[h] = 0
                continue
            nsurv = 0
            ss = 0.0
            for k in range(m):
                if surv[lo + k] == 1:
                    nsurv += 1
                v = soft_threshold(c_full[lo + k], thr_l)
                ss += v * v
            group_skip[h] = 1 if (nsurv == 0 or np.sqrt(ss) <= thr_g) else 0

        sweeps = 0
        conv = False
        obj = np.inf
        while True:
            while sweeps < max_outer:
                mc = _sweep(
                    xt, r, coef, surv, group_skip, nu, lips, grams, q, m, n_groups,
                    n, lam, lamg, inner_tol, inner_max, False,
                )
                sweeps += 1
                obj = _objective_value(coef, np.dot(r, r), n, lam, lamg, q, m, n_groups)
                if t == T - 1 and trace.size >= sweeps:
                    trace[sweeps - 1] = obj
                if not np.isfinite(obj):
                    coefs_out[t] = coef
                    iters_out[t] = sweeps
                    obj_out[t] = obj
                    return coefs_out, iters_out, conv_out, obj_out, STATUS_NONFINITE
                if mc < tol * max(1.0, _max_abs(coef)):
                    conv = True
                    break
                for l in range(d):
                    act[l] = 1 if coef[l] != 0.0 else 0
                while sweeps < max_outer:
                    mca = _sweep(
                        xt, r, coef, act, group_skip, nu, lips, grams, q, m,
                        n_groups, n, lam, lamg, inner_tol, inner_max, True,
                    )
                    sweeps += 1
                    obj = _objective_value(
                        coef, np.dot(r, r), n, lam, lamg, q, m, n_groups
                    )
                    if t == T - 1 and trace.size >= sweeps:
                        trace[sweeps - 1] = obj
                    if not np.isfinite(obj):
                        coefs_out[t] = coef
                        iters_out[t] = sweeps
                        obj_out[t] = obj
                        return coefs_out, iters_out, conv_out, obj_out, STATUS_NONFINITE
                    if mca < tol * max(1.0, _max_abs(coef)):
                        break
            # exact stationarity check of everything screened out
            c_full = np.dot(xt, r) / n
            violation = False
            for l in range(go):
                if surv[l] == 0 and nu[l] > 0.0 and abs(c_full[l]) - lam > 1e-12 * max(1.0, lam):
                    surv[l] = 1
                    violation = True
            for h in range(n_groups):
                lo = go + h * m
                if _group_active(coef, lo, m):
                    for k in range(m):
                        if (
                            surv[lo + k] == 0
                            and nu[lo + k] > 0.0
                            and abs(c_full[lo + k]) - lam > 1e-12 * max(1.0, lam)
                        ):
                            surv[lo + k] = 1
                            violation = True
                    continue
                ss = 0.0
                for k in range(m):
                    v = soft_threshold(c_full[lo + k], lam)
                    ss += v * v
                if np.sqrt(ss) - lamg > 1e-12 * max(1.0, lamg):
                    group_skip[h] = 0
                    violation = True
                    for k in range(m):
                        if nu[lo + k] > 0.0:
                            surv[lo + k] = 1
            if not violation or sweeps >= max_outer:
                conv = conv and not violation
                break
            conv = False
        coefs_out[t] = coef
        iters_out[t] = sweeps
        conv_out[t] = 1 if conv else 0
        obj_out[t] = obj
    return coefs_out, iters_out, conv_out, obj_out, STATUS_OK
