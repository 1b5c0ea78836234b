"""File formats: matrix CSVs, model/truth JSON bundles, CV and edge tables.

All floating-point values are serialized with 17 significant digits so that
every file round-trips bit-exactly; matrix CSVs follow RFC 4180 with a
header row of column names.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .data import CovariateKind, Dataset, infer_kinds, validate_dataset
from .graph import GraphModel, SymmetrizationRule
from .simulate import SimulationTruth

__all__ = [
    "fmt",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_kinds",
    "read_kinds",
    "load_dataset",
    "write_model",
    "read_model",
    "write_truth",
    "read_truth",
    "write_cv_table",
    "write_edge_csv",
    "write_fit_log",
    "read_fit_log",
    "write_eval_csv",
    "write_summary",
]


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(path, M: np.ndarray, prefix: str) -> None:
    M = np.atleast_2d(M)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"{prefix}{k}" for k in range(M.shape[1])])
        for row in M:
            w.writerow([fmt(v) for v in row])


def read_matrix_csv(path) -> tuple[np.ndarray, list[str]]:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[float(v) for v in row] for row in r if row]
    M = np.array(rows, dtype=np.float64)
    if M.ndim != 2 or M.shape[1] != len(header):
        raise ValueError(f"{path}: ragged or empty matrix")
    return M, header


def write_kinds(path, kinds) -> None:
    with open(path, "w") as fh:
        json.dump({"kinds": [CovariateKind(k).value for k in kinds]}, fh)
        fh.write("\n")


def read_kinds(path):
    with open(path) as fh:
        data = json.load(fh)
    return tuple(CovariateKind(k) for k in data["kinds"])


def load_dataset(x_path, u_path, kinds_path=None) -> Dataset:
    """Read X and U CSVs; kinds come from the JSON sidecar or are inferred
    (a column containing only {0, 1} is treated as binary)."""
    X, _ = read_matrix_csv(x_path)
    U, _ = read_matrix_csv(u_path)
    kinds = read_kinds(kinds_path) if kinds_path else infer_kinds(U)
    return validate_dataset(X, U, kinds)


def _triplets(B: np.ndarray) -> dict:
    iu = np.triu_indices(B.shape[0], k=1)
    mask = B[iu] != 0.0
    return {
        "rows": [int(v) for v in iu[0][mask]],
        "cols": [int(v) for v in iu[1][mask]],
        "values": [float(v) for v in B[iu][mask]],
    }


def _from_triplets(trip: dict, p: int, diag: np.ndarray | None = None) -> np.ndarray:
    B = np.zeros((p, p))
    for j, k, v in zip(trip["rows"], trip["cols"], trip["values"]):
        B[j, k] = B[k, j] = v
    if diag is not None:
        np.fill_diagonal(B, diag)
    return B


def _dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def write_model(path, model: GraphModel) -> None:
    """Header (dimensions, rule, sigma2) plus sparse upper-triangle triplets
    per component; the component-0 diagonal is stored separately."""
    obj = {
        "p": model.p,
        "q": model.q,
        "rule": model.symmetrization_rule.value,
        "sigma2": [float(v) for v in model.sigma2],
        "gamma_hat": [[float(v) for v in row] for row in model.gamma_hat],
        "diag0": [float(v) for v in np.diag(model.b_tilde[0])],
        "components": [_triplets(B) for B in model.b_tilde],
    }
    _dump_json(obj, path)


def read_model(path) -> GraphModel:
    with open(path) as fh:
        obj = json.load(fh)
    p, q = obj["p"], obj["q"]
    sigma2 = np.array(obj["sigma2"])
    comps = []
    for h, trip in enumerate(obj["components"]):
        diag = np.array(obj["diag0"]) if h == 0 else np.zeros(p)
        comps.append(_from_triplets(trip, p, diag))
    return GraphModel(
        gamma_hat=np.array(obj["gamma_hat"], dtype=np.float64).reshape(p, q),
        b_tilde=tuple(comps),
        sigma2=sigma2,
        symmetrization_rule=SymmetrizationRule(obj["rule"]),
    )


def write_truth(path, truth: SimulationTruth) -> None:
    d = truth.dataset
    obj = {
        "n": d.n,
        "p": d.p,
        "q": d.q,
        "pd_repairs": truth.pd_repairs,
        "gamma": [[float(v) for v in row] for row in truth.gamma],
        "b_diag0": [float(v) for v in np.diag(truth.b[0])],
        "b_components": [_triplets(B) for B in truth.b],
        "kinds": [k.value for k in d.covariate_kinds],
        "mu": [[float(v) for v in row] for row in truth.mu_per_subject],
    }
    _dump_json(obj, path)


def read_truth(path, dataset: Dataset) -> SimulationTruth:
    """Rebuild the truth bundle against its dataset (read separately from
    the X/U CSVs)."""
    with open(path) as fh:
        obj = json.load(fh)
    p = obj["p"]
    comps = []
    for h, trip in enumerate(obj["b_components"]):
        diag = np.array(obj["b_diag0"]) if h == 0 else np.zeros(p)
        comps.append(_from_triplets(trip, p, diag))
    from .simulate import _subject_omegas

    omegas = _subject_omegas(comps, dataset.U)
    return SimulationTruth(
        gamma=np.array(obj["gamma"], dtype=np.float64).reshape(p, obj["q"]),
        b=tuple(comps),
        omega_per_subject=omegas,
        mu_per_subject=np.array(obj["mu"], dtype=np.float64),
        dataset=dataset,
        pd_repairs=obj.get("pd_repairs", 0),
    )


def write_cv_table(path, cv_results) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "alpha_s", "lambda0", "cv_error", "cv_se"])
        for cv in cv_results:
            if cv is None:
                continue
            for a_i, alpha in enumerate(cv.alphas):
                for t in range(cv.lambda0.shape[1]):
                    w.writerow(
                        [
                            cv.node,
                            fmt(alpha),
                            fmt(cv.lambda0[a_i, t]),
                            fmt(cv.cv_error[a_i, t]),
                            fmt(cv.cv_se[a_i, t]),
                        ]
                    )


def write_edge_csv(path, model: GraphModel, threshold: float = 0.0) -> None:
    from .graph import edge_sets

    sets = edge_sets(model, threshold)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["h", "j", "k", "weight"])
        for h, pairs in enumerate(sets):
            for j, k in pairs:
                w.writerow([h, j, k, fmt(model.b_tilde[h][j, k])])


def write_fit_log(path, result, standardize: bool, estimator: str) -> None:
    """Per-node diagnostics plus the rescaled blocks needed to re-verify
    nodewise optimality from files."""
    nodes = []
    for j, nr in enumerate(result.nodes):
        blocks = []
        cols = []
        values = []
        for h, b in enumerate(nr.beta_tilde):
            nz = np.nonzero(b)[0]
            blocks.extend([h] * nz.size)
            cols.extend(int(c) for c in nz)
            values.extend(float(b[c]) for c in nz)
        nodes.append(
            {
                "node": j,
                "alpha_s": float(nr.penalty.alpha_s),
                "lambda0": float(nr.penalty.lambda0),
                "lam": float(nr.penalty.lam),
                "lam_g": float(nr.penalty.lam_g),
                "sigma2": float(nr.fit.sigma2),
                "objective": float(nr.fit.objective),
                "iterations": int(nr.fit.iterations),
                "kkt_residual": float(nr.fit.kkt_residual),
                "failed": bool(nr.failed),
                "beta_tilde": {"blocks": blocks, "cols": cols, "values": values},
            }
        )
    _dump_json({"standardize": standardize, "estimator": estimator, "nodes": nodes}, path)


def read_fit_log(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def fit_log_node_blocks(log_obj: dict, p: int, q: int) -> np.ndarray:
    out = np.zeros((p, q + 1, p - 1))
    for entry in log_obj["nodes"]:
        j = entry["node"]
        bt = entry["beta_tilde"]
        for h, c, v in zip(bt["blocks"], bt["cols"], bt["values"]):
            out[j, h, c] = v
    return out


def write_eval_csv(path, reports) -> None:
    from .metrics import METRIC_NAMES

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate"] + list(METRIC_NAMES))
        for i, rep in enumerate(reports):
            d = rep.as_dict()
            w.writerow([i] + [fmt(d[m]) for m in METRIC_NAMES])


def write_summary(path, bench) -> None:
    """Mean and spread per metric, one row each, CSV."""
    mean = bench.mean()
    sd = bench.sd()
    n = bench.values.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "mean", "se", "replicates"])
        for m in bench.metrics:
            se = "" if n < 2 else fmt(sd[m])
            w.writerow([m, fmt(mean[m]), se, n])


def summary_markdown(bench) -> str:
    mean = bench.mean()
    sd = bench.sd()
    n = bench.values.shape[0]
    lines = ["| metric | mean (se) |", "| --- | --- |"]
    for m in bench.metrics:
        if n < 2:
            lines.append(f"| {m} | {mean[m]:.3f} (--) |")
        else:
            lines.append(f"| {m} | {mean[m]:.3f} ({sd[m]:.3f}) |")
    return "\n".join(lines) + "\n"


def ensure_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out
