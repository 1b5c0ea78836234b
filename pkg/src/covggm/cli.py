"""Command-line interface.

Subcommands: simulate, fit, predict, eval, path, kkt-check, replicate.
Data goes to files (or stdout for tables); log messages go to stderr.
Exit codes: 2 configuration/IO/schema error, 3 generation failure,
4 solver failure, 5 singularity.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import store
from .accel import BACKEND
from .data import PenaltyConfig, center_responses
from .errors import (
    AllZeroGamma,
    CovggmError,
    NonPdOmega,
    SingularAfterRidge,
    SolverDiverged,
)
from .graph import predict_subject
from .metrics import evaluate
from .pipeline import fit_graphical_model, replicate_benchmark
from .simulate import SimulationConfig, generate_dataset
from .solver import SolverOptions
from .tuning import PenaltyGrid

log = logging.getLogger("covggm")

EXIT_CONFIG = 2
EXIT_GENERATION = 3
EXIT_SOLVER = 4
EXIT_SINGULAR = 5


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alphas", type=float, nargs="+", default=None,
                   help="mixture grid (default 0.1 .. 1.0)")
    p.add_argument("--n-lambda0", type=int, default=100)
    p.add_argument("--lambda-min-ratio", type=float, default=0.01)
    p.add_argument("--folds", type=int, default=5)


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True,
                   help="penalize internally rescaled columns")
    p.add_argument("--estimator", choices=("s1", "s2"), default="s2",
                   help="residual-variance denominator rule")
    p.add_argument("--threads", type=int, default=1)


def _grid_from(args, seed: int) -> PenaltyGrid:
    alphas = tuple(args.alphas) if args.alphas else PenaltyGrid().alphas
    return PenaltyGrid(
        alphas=alphas,
        n_lambda0=args.n_lambda0,
        lambda_min_ratio=args.lambda_min_ratio,
        folds=args.folds,
        seed=seed,
    )


def _opts_from(args) -> SolverOptions:
    return SolverOptions(tol=args.tol, standardize_columns=args.standardize)


def cmd_simulate(args) -> int:
    cfg = SimulationConfig(
        n=args.n,
        p=args.p,
        q=args.q,
        q_e=args.q_e,
        edge_prob=args.edge_prob,
        gamma_density=args.gamma_density,
        model=args.model,
        seed=args.seed,
    )
    truth = generate_dataset(cfg)
    out = store.ensure_dir(args.out)
    store.write_matrix_csv(out / "X.csv", truth.dataset.X, "x")
    store.write_matrix_csv(out / "U.csv", truth.dataset.U, "u")
    store.write_kinds(out / "kinds.json", truth.dataset.covariate_kinds)
    store.write_truth(out / "truth.json", truth)
    log.info("seed=%d pd_repairs=%d -> %s", cfg.seed, truth.pd_repairs, out)
    return 0


def _load_dataset(args):
    kinds = getattr(args, "kinds", None)
    return store.load_dataset(args.x, args.u, kinds)


def cmd_fit(args) -> int:
    d = _load_dataset(args)
    x_means = None
    if args.center_x:
        d, x_means = center_responses(d)
    opts = _opts_from(args)
    penalty = None
    grid = None
    if args.lambda0 is not None:
        penalty = PenaltyConfig.from_mixture(args.alpha, args.lambda0)
    else:
        grid = _grid_from(args, args.seed)
    result = fit_graphical_model(
        d,
        grid=grid,
        penalty=penalty,
        opts=opts,
        rule=args.rule,
        estimator=args.estimator,
        threads=args.threads,
        shared_tuning=args.shared_tuning,
        keep_going=args.keep_going,
    )
    out = store.ensure_dir(args.out)
    store.write_model(out / "model.json", result.model)
    store.write_cv_table(out / "cv.csv", [nr.cv for nr in result.nodes])
    store.write_fit_log(out / "fitlog.json", result, args.standardize, args.estimator)
    if x_means is not None:
        store.write_matrix_csv(out / "x_means.csv", x_means[None, :], "x")
    store.write_edge_csv(out / "edges.csv", result.model, args.threshold)
    worst = max(nr.fit.kkt_residual for nr in result.nodes)
    log.info("fit complete: %d nodes, max kkt residual %.3g -> %s", d.p, worst, out)
    return 0


def cmd_predict(args) -> int:
    model = store.read_model(args.model)
    U, _ = store.read_matrix_csv(args.u)
    if U.shape[1] != model.q:
        raise CovggmError(f"U has {U.shape[1]} columns, model expects {model.q}")
    out = store.ensure_dir(args.out)
    mus = np.empty((U.shape[0], model.p))
    ridge_count = 0
    omega_rows = []
    for i in range(U.shape[0]):
        pred = predict_subject(model, U[i])
        mus[i] = pred.mu
        if pred.ridge_added > 0:
            ridge_count += 1
        if args.omega:
            om = pred.omega
            jj, kk = np.nonzero(np.triu(om))
            for j, k in zip(jj, kk):
                omega_rows.append((i, int(j), int(k), om[j, k]))
    store.write_matrix_csv(out / "mu.csv", mus, "mu")
    if args.omega:
        with open(out / "omega.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["subject", "j", "k", "value"])
            for row in omega_rows:
                w.writerow([row[0], row[1], row[2], store.fmt(row[3])])
    log.info("predicted %d subjects, %d ridge repairs -> %s", U.shape[0], ridge_count, out)
    return 0


def cmd_eval(args) -> int:
    d = _load_dataset(args)
    model = store.read_model(args.model)
    truth = store.read_truth(args.truth, d)
    beta_tilde = None
    if args.fit_log:
        log_obj = store.read_fit_log(args.fit_log)
        beta_tilde = store.fit_log_node_blocks(log_obj, model.p, model.q)
    report = evaluate(model, truth, beta_tilde)
    store.write_eval_csv(args.out, [report])
    for name, value in report.as_dict().items():
        print(f"{name},{store.fmt(value)}")
    return 0


def cmd_path(args) -> int:
    from .nodewise import build_interaction_design
    from .solver import _problem_from_design
    from .tuning import lambda0_max

    d = _load_dataset(args)
    nodes = [args.node] if args.node is not None else list(range(d.p))
    writer = csv.writer(sys.stdout)
    writer.writerow(["node", "alpha_s", "index", "lambda0"])
    exponents = np.linspace(0.0, 1.0, args.n_lambda0)
    for j in nodes:
        design = build_interaction_design(d, j)
        F = np.ascontiguousarray(np.hstack([d.U, design.W]))
        prob = _problem_from_design(
            d.X[:, j], F, d.q, d.p - 1, d.q, None, args.standardize
        )
        top = lambda0_max(prob, args.alpha)
        for idx, l0 in enumerate(top * args.lambda_min_ratio**exponents):
            writer.writerow([j, store.fmt(args.alpha), idx, store.fmt(l0)])
    return 0


def cmd_kkt_check(args) -> int:
    from .nodewise import build_interaction_design
    from .solver import SglSolution, kkt_residual, make_problem

    d = _load_dataset(args)
    model = store.read_model(args.model)
    log_obj = store.read_fit_log(args.fit_log)
    beta_tilde = store.fit_log_node_blocks(log_obj, model.p, model.q)
    standardize = bool(log_obj.get("standardize", True))
    worst = 0.0
    writer = csv.writer(sys.stdout)
    writer.writerow(["node", "kkt_residual"])
    for entry in log_obj["nodes"]:
        j = entry["node"]
        pen = PenaltyConfig(lam=entry["lam"], lam_g=entry["lam_g"])
        design = build_interaction_design(d, j)
        problem = make_problem(
            d.X[:, j], d.U, design.blocks(), pen, standardize=standardize
        )
        blocks = tuple(
            -beta_tilde[j, h, :] * entry["sigma2"] for h in range(model.q + 1)
        )
        sol = SglSolution(
            gamma=model.gamma_hat[j],
            beta_blocks=blocks,
            objective=entry["objective"],
            outer_iters=entry["iterations"],
            converged=True,
            obj_trace=np.empty(0),
        )
        resid = kkt_residual(problem, sol)
        worst = max(worst, resid)
        writer.writerow([j, store.fmt(resid)])
    print(f"max,{store.fmt(worst)}")
    return 0


def cmd_replicate(args) -> int:
    cfg = SimulationConfig(
        n=args.n,
        p=args.p,
        q=args.q,
        q_e=args.q_e,
        edge_prob=args.edge_prob,
        gamma_density=args.gamma_density,
        model=args.model,
        seed=args.seed,
    )
    grid = _grid_from(args, args.seed)
    bench = replicate_benchmark(
        cfg,
        replicates=args.reps,
        grid=grid,
        opts=_opts_from(args),
        rule=args.rule,
        estimator=args.estimator,
        threads=args.threads,
    )
    out = store.ensure_dir(args.out)
    from .metrics import EvalReport

    reports = [EvalReport(*row) for row in bench.values]
    store.write_eval_csv(out / "replicates.csv", reports)
    store.write_summary(out / "summary.csv", bench)
    sys.stdout.write(store.summary_markdown(bench))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="covggm",
        description="Covariate-adjusted Gaussian graphical models via nodewise sparse-group regression",
    )
    ap.add_argument("--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset with ground truth")
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--p", type=int, required=True)
    sim.add_argument("--q", type=int, required=True)
    sim.add_argument("--q-e", type=int, default=5)
    sim.add_argument("--edge-prob", type=float, default=0.01)
    sim.add_argument("--gamma-density", type=float, default=0.3)
    sim.add_argument("--model", choices=("natural", "original"), default="natural")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=".")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit the model to X/U CSVs")
    fit.add_argument("--x", required=True)
    fit.add_argument("--u", required=True)
    fit.add_argument("--kinds", default=None)
    fit.add_argument("--out", default=".")
    fit.add_argument("--alpha", type=float, default=0.5, help="fixed mixture (with --lambda0)")
    fit.add_argument("--lambda0", type=float, default=None,
                     help="fixed penalty level; bypasses cross-validation")
    fit.add_argument("--seed", type=int, default=0, help="fold-assignment seed")
    fit.add_argument("--rule", choices=("and", "or"), default="and")
    fit.add_argument("--threshold", type=float, default=0.0, help="edge export threshold")
    fit.add_argument("--center-x", action="store_true", help="mean-center responses first")
    fit.add_argument("--shared-tuning", action="store_true",
                     help="one penalty pair shared by all nodes")
    fit.add_argument("--keep-going", action="store_true",
                     help="warn instead of aborting when a node fails")
    _add_grid_flags(fit)
    _add_solver_flags(fit)
    fit.set_defaults(func=cmd_fit)

    pred = sub.add_parser("predict", help="per-subject precision and mean from a model")
    pred.add_argument("--model", required=True)
    pred.add_argument("--u", required=True)
    pred.add_argument("--out", default=".")
    pred.add_argument("--omega", action="store_true", help="also write per-subject precision triplets")
    pred.set_defaults(func=cmd_predict)

    ev = sub.add_parser("eval", help="benchmark metrics of a model against a truth bundle")
    ev.add_argument("--model", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--x", required=True)
    ev.add_argument("--u", required=True)
    ev.add_argument("--kinds", default=None)
    ev.add_argument("--fit-log", default=None)
    ev.add_argument("--out", default="eval.csv")
    ev.set_defaults(func=cmd_eval)

    pa = sub.add_parser("path", help="print the per-node penalty path")
    pa.add_argument("--x", required=True)
    pa.add_argument("--u", required=True)
    pa.add_argument("--kinds", default=None)
    pa.add_argument("--node", type=int, default=None)
    pa.add_argument("--alpha", type=float, default=0.5)
    pa.add_argument("--n-lambda0", type=int, default=100)
    pa.add_argument("--lambda-min-ratio", type=float, default=0.01)
    pa.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True)
    pa.set_defaults(func=cmd_path)

    kk = sub.add_parser("kkt-check", help="re-verify nodewise optimality of a saved fit")
    kk.add_argument("--model", required=True)
    kk.add_argument("--fit-log", required=True)
    kk.add_argument("--x", required=True)
    kk.add_argument("--u", required=True)
    kk.add_argument("--kinds", default=None)
    kk.set_defaults(func=cmd_kkt_check)

    rep = sub.add_parser("replicate", help="generate/fit/evaluate over replicates")
    rep.add_argument("--n", type=int, required=True)
    rep.add_argument("--p", type=int, required=True)
    rep.add_argument("--q", type=int, required=True)
    rep.add_argument("--q-e", type=int, default=5)
    rep.add_argument("--edge-prob", type=float, default=0.01)
    rep.add_argument("--gamma-density", type=float, default=0.3)
    rep.add_argument("--model", choices=("natural", "original"), default="natural")
    rep.add_argument("--reps", type=int, default=20)
    rep.add_argument("--seed", type=int, default=0)
    rep.add_argument("--rule", choices=("and", "or"), default="and")
    rep.add_argument("--out", default=".")
    _add_grid_flags(rep)
    _add_solver_flags(rep)
    rep.set_defaults(func=cmd_replicate)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    log.debug("kernel backend: %s", BACKEND)
    try:
        return args.func(args)
    except (NonPdOmega, AllZeroGamma) as exc:
        log.error("generation failed: %s", exc)
        return EXIT_GENERATION
    except SingularAfterRidge as exc:
        log.error("singular system: %s", exc)
        return EXIT_SINGULAR
    except SolverDiverged as exc:
        log.error("solver failed: %s", exc)
        return EXIT_SOLVER
    except (OSError, ValueError, KeyError, CovggmError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
