import numpy as np
import pytest

from covggm import (
    PenaltyConfig,
    PenaltyGrid,
    SolverOptions,
    cross_validate,
    kkt_residual,
    lambda0_max,
    make_path,
    make_problem,
    solve,
    validate_dataset,
)
from covggm.errors import FoldTooSmall
from covggm.solver import _problem_from_design, solve_path
from covggm.tuning import _penalties_for, fold_assignments

from conftest import random_sgl_problem


class TestLambda0Max:
    def test_pure_lasso_bound(self, rng):
        y, a_gamma, blocks = random_sgl_problem(rng, n=40, q=2, p=3)
        prob = make_problem(y, a_gamma, blocks, None, standardize=False)
        expected = np.max(np.abs(prob.design.T @ y)) / y.size
        assert lambda0_max(prob, 1.0) == pytest.approx(expected, rel=1e-12)

    def test_zero_response(self, rng):
        _, a_gamma, blocks = random_sgl_problem(rng, n=30, q=2, p=3)
        prob = make_problem(np.zeros(30), a_gamma, blocks, None)
        assert lambda0_max(prob, 0.5) == 0.0

    def test_boundary_is_tight(self, rng):
        # All-zero at the threshold, at least one nonzero just below it.
        y, a_gamma, blocks = random_sgl_problem(rng, n=40, q=2, p=4)
        prob = make_problem(y, a_gamma, blocks, None)
        opts = SolverOptions(tol=1e-9, inner_tol=1e-11, inner_max_iters=5000)
        for alpha in (0.5, 0.9):
            top = lambda0_max(prob, alpha)
            prob.penalty = PenaltyConfig.from_mixture(alpha, top)
            sol = solve(prob, opts)
            assert all(np.all(b == 0) for b in sol.beta_blocks)
            assert np.all(sol.gamma == 0)
            prob.penalty = PenaltyConfig.from_mixture(alpha, 0.99 * top)
            sol = solve(prob, opts)
            total = abs(sol.gamma).sum() + sum(abs(b).sum() for b in sol.beta_blocks)
            assert total > 0


class TestMakePath:
    def test_two_points_are_endpoints(self, rng):
        y, a_gamma, blocks = random_sgl_problem(rng)
        prob = make_problem(y, a_gamma, blocks, None)
        grid = PenaltyGrid(alphas=(0.5,), n_lambda0=2, lambda_min_ratio=0.01)
        path = make_path(prob, grid)[0.5]
        top = lambda0_max(prob, 0.5)
        np.testing.assert_allclose(path, [top, 0.01 * top], rtol=1e-12)

    def test_strictly_decreasing_constant_ratio(self, rng):
        y, a_gamma, blocks = random_sgl_problem(rng)
        prob = make_problem(y, a_gamma, blocks, None)
        grid = PenaltyGrid(alphas=(0.3,), n_lambda0=17, lambda_min_ratio=0.05)
        path = make_path(prob, grid)[0.3]
        assert np.all(np.diff(path) < 0)
        ratios = path[1:] / path[:-1]
        np.testing.assert_allclose(ratios, 0.05 ** (1.0 / 16), rtol=1e-12)


def _toy_dataset(rng, n=40, p=3, q=2):
    U = rng.normal(size=(n, q))
    X = rng.normal(size=(n, p))
    X[:, 0] += 0.8 * X[:, 1] + 0.5 * U[:, 0]
    return validate_dataset(X, U, ["continuous"] * q)


class TestFoldAssignments:
    def test_partition(self):
        folds = fold_assignments(17, 5, seed=4)
        allidx = np.sort(np.concatenate(folds))
        np.testing.assert_array_equal(allidx, np.arange(17))
        sizes = sorted(len(f) for f in folds)
        assert sizes == [3, 3, 3, 4, 4]

    def test_too_few_samples(self):
        with pytest.raises(FoldTooSmall):
            fold_assignments(3, 5, seed=0)


class TestCrossValidate:
    def test_deterministic(self, rng):
        d = _toy_dataset(rng)
        grid = PenaltyGrid(alphas=(0.4, 0.8), n_lambda0=12, folds=4, seed=9)
        a = cross_validate(d, 0, grid)
        b = cross_validate(d, 0, grid)
        np.testing.assert_array_equal(a.cv_error, b.cv_error)
        assert (a.selected_alpha, a.selected_lambda0) == (b.selected_alpha, b.selected_lambda0)

    def test_selected_pair_on_grid_and_minimal(self, rng):
        d = _toy_dataset(rng)
        grid = PenaltyGrid(alphas=(0.3, 0.6, 1.0), n_lambda0=10, folds=4, seed=2)
        cv = cross_validate(d, 1, grid)
        assert cv.selected_alpha in grid.alphas
        a_i = list(grid.alphas).index(cv.selected_alpha)
        assert cv.selected_lambda0 in cv.lambda0[a_i]
        assert cv.selected_error == cv.cv_error.min()

    def test_leave_one_out_matches_direct_residuals(self, rng):
        # k = n: each fold's error is that sample's squared prediction
        # residual, recomputed here from an independent refit.
        n = 6
        U = rng.normal(size=(n, 1))
        X = rng.normal(size=(n, 2))
        d = validate_dataset(X, U, ["continuous"])
        grid = PenaltyGrid(alphas=(0.5,), n_lambda0=4, folds=n, seed=5)
        opts = SolverOptions()
        cv = cross_validate(d, 0, grid, opts)

        from covggm.nodewise import build_interaction_design

        design = build_interaction_design(d, 0)
        F = np.hstack([d.U, design.W])
        y = d.X[:, 0]
        full_prob = _problem_from_design(y, F, 1, 1, 1, None, True)
        path = make_path(full_prob, grid)[0.5]
        folds = fold_assignments(n, n, seed=5)
        expected = np.zeros((1, 4, n))
        for f, val in enumerate(folds):
            mask = np.ones(n, dtype=bool)
            mask[val] = False
            ptr = _problem_from_design(
                np.ascontiguousarray(y[mask]),
                np.ascontiguousarray(F[mask]),
                1, 1, 1, None, True,
            )
            coefs, _, _, _ = solve_path(ptr, _penalties_for(0.5, path), opts)
            pred = F[val] @ coefs.T
            expected[0, :, f] = (y[val][:, None] - pred) ** 2
        np.testing.assert_allclose(cv.cv_error, expected.mean(axis=2), rtol=1e-12)

    def test_cv_error_invariant_to_fold_order(self, rng):
        # Mean over folds cannot depend on fold processing order.
        d = _toy_dataset(rng)
        grid = PenaltyGrid(alphas=(0.5,), n_lambda0=6, folds=3, seed=1)
        cv = cross_validate(d, 0, grid)
        assert np.all(np.isfinite(cv.cv_error))
        assert np.all(cv.cv_error >= 0)

    def test_warm_start_equivalence(self, rng):
        # Path solutions (warm) match cold solves at the same penalties to
        # within the KKT certificate bound.
        y, a_gamma, blocks = random_sgl_problem(rng, n=50, q=2, p=4)
        prob = make_problem(y, a_gamma, blocks, None)
        grid = PenaltyGrid(alphas=(0.5,), n_lambda0=8, folds=3)
        path = make_path(prob, grid)[0.5]
        opts = SolverOptions()
        pens = _penalties_for(0.5, path)
        coefs, _, _, _ = solve_path(prob, pens, opts)
        for t in (2, 5, 7):
            prob.penalty = pens[t]
            gamma = coefs[t, : prob.q]
            blocks_t = [
                coefs[t, prob.q + h * prob.m : prob.q + (h + 1) * prob.m]
                for h in range(prob.n_groups + 1)
            ]
            from covggm.solver import SglSolution

            warm_sol = SglSolution(
                gamma=gamma,
                beta_blocks=tuple(blocks_t),
                objective=0.0,
                outer_iters=0,
                converged=True,
                obj_trace=np.empty(0),
            )
            assert kkt_residual(prob, warm_sol) <= 100 * opts.tol
            cold = solve(prob, opts)
            assert kkt_residual(prob, cold) <= 100 * opts.tol

    def test_pure_noise_selects_near_null_model(self):
        # y independent of every column: selection should sit in the top
        # decile of the path for the vast majority of seeds.
        hits = 0
        runs = 50
        grid_proto = PenaltyGrid(alphas=(0.2, 0.5, 1.0), n_lambda0=30, folds=5)
        for s in range(runs):
            rng = np.random.default_rng(100 + s)
            U = rng.normal(size=(200, 5))
            X = rng.normal(size=(200, 5))
            d = validate_dataset(X, U, ["continuous"] * 5)
            grid = PenaltyGrid(
                alphas=grid_proto.alphas,
                n_lambda0=grid_proto.n_lambda0,
                folds=grid_proto.folds,
                seed=s,
            )
            cv = cross_validate(d, 0, grid)
            a_i = list(grid.alphas).index(cv.selected_alpha)
            idx = int(np.where(cv.lambda0[a_i] == cv.selected_lambda0)[0][0])
            if idx < 0.1 * grid.n_lambda0:
                hits += 1
        assert hits >= 0.9 * runs
