import numpy as np
import pytest

from covggm import (
    PenaltyConfig,
    SolverOptions,
    kkt_residual,
    make_problem,
    objective,
    soft_threshold,
    solve,
)
from covggm.errors import DimensionMismatch

from conftest import random_sgl_problem
from oracles import prox_gradient_solve

TIGHT = SolverOptions(tol=1e-9, inner_tol=1e-11, inner_max_iters=5000)


def _rel_gap(a, b):
    return abs(a - b) / max(1.0, abs(b))


class TestSoftThreshold:
    def test_positive(self):
        assert soft_threshold(3.0, 1.0) == 2.0

    def test_odd_symmetry(self):
        assert soft_threshold(-3.0, 1.0) == -2.0

    def test_inside_threshold(self):
        assert soft_threshold(0.5, 1.0) == 0.0

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            soft_threshold(1.0, -0.1)


class TestObjective:
    def test_all_zero_coefficients(self, rng):
        y, a_gamma, blocks = random_sgl_problem(rng)
        prob = make_problem(y, a_gamma, blocks, PenaltyConfig(0.3, 0.1))
        q, m = a_gamma.shape[1], blocks[0].shape[1]
        val = objective(prob, np.zeros(q), [np.zeros(m)] * len(blocks))
        assert val == pytest.approx(0.5 * (y @ y) / y.size, rel=1e-12)

    def test_least_squares_matches_normal_equations(self, rng):
        # lam = lam_g = 0: value at the exact LS solution is the pure
        # residual term, checked against a direct normal-equations solve.
        n = 10
        F = rng.normal(size=(n, 4))
        y = rng.normal(size=n)
        coef = np.linalg.solve(F.T @ F, F.T @ y)
        expected = 0.5 * np.sum((y - F @ coef) ** 2) / n
        prob = make_problem(y, F[:, :2], [F[:, 2:3], F[:, 3:4]], PenaltyConfig(0.0, 0.0))
        val = objective(prob, coef[:2], [coef[2:3], coef[3:4]])
        assert val == pytest.approx(expected, rel=1e-10)

    def test_unit_column_penalty_only(self):
        y = np.ones(4)
        a_gamma = np.ones((4, 1))
        blocks = [np.zeros((4, 1))]
        prob = make_problem(y, a_gamma, blocks, PenaltyConfig(0.5, 0.0))
        val = objective(prob, np.array([1.0]), [np.zeros(1)])
        assert val == pytest.approx(0.5, abs=1e-15)

    def test_dimension_mismatch(self, rng):
        y, a_gamma, blocks = random_sgl_problem(rng)
        prob = make_problem(y, a_gamma, blocks, PenaltyConfig(0.1, 0.1))
        with pytest.raises(DimensionMismatch):
            objective(prob, np.zeros(prob.q + 1), [np.zeros(prob.m)] * (prob.n_groups + 1))


class TestGammaBlock:
    def test_single_orthonormal_column_closed_form(self, rng):
        # One covariate column with ||a||^2/n = 1 and no active beta blocks:
        # the solution is soft_threshold(a.T y / n, lam).
        n = 40
        a = rng.normal(size=n)
        a /= np.sqrt(np.mean(a * a))
        y = 0.9 * a + rng.normal(size=n) * 0.1
        lam = 0.2
        prob = make_problem(y, a[:, None], [np.zeros((n, 1))], PenaltyConfig(lam, 0.0))
        sol = solve(prob, TIGHT)
        expected = soft_threshold(float(a @ y) / n, lam)
        assert sol.gamma[0] == pytest.approx(expected, abs=1e-9)

    def test_zero_stays_zero_above_threshold(self, rng):
        n = 30
        a_gamma = rng.normal(size=(n, 3))
        y = rng.normal(size=n)
        prob = make_problem(
            y, a_gamma, [np.zeros((n, 1))], PenaltyConfig(1.0, 0.0), standardize=False
        )
        lam_needed = np.max(np.abs(a_gamma.T @ y)) / n
        prob.penalty = PenaltyConfig(lam_needed * 1.001, 0.0)
        sol = solve(prob, TIGHT)
        assert np.all(sol.gamma == 0.0)

    def test_gamma_block_matches_prox_gradient(self, rng):
        n = 20
        a_gamma = rng.normal(size=(n, 3))
        y = rng.normal(size=n)
        blocks = [np.zeros((n, 1))]
        prob = make_problem(y, a_gamma, blocks, PenaltyConfig(0.1, 0.0), standardize=False)
        sol = solve(prob, TIGHT)
        design = np.hstack([a_gamma, blocks[0]])
        _, obj_ref = prox_gradient_solve(design, y, 3, 1, 0, 0.1, 0.0)
        assert _rel_gap(sol.objective, obj_ref) < 1e-8


class TestBetaBlock:
    def test_huge_group_weight_zeroes_group(self, rng):
        y, a_gamma, blocks = random_sgl_problem(rng, n=30, q=2, p=4)
        lamg = np.linalg.norm(blocks[1].T @ y / y.size) * np.sqrt(3) * 10
        prob = make_problem(y, a_gamma, blocks, PenaltyConfig(0.0, lamg))
        sol = solve(prob, TIGHT)
        for h in range(1, len(blocks)):
            assert np.all(sol.beta_blocks[h] == 0.0)

    def test_zero_group_weight_reduces_to_lasso(self, rng):
        # With lam_g = 0, a grouped block must behave exactly like the
        # unpenalized-group block on the same columns.
        n, m = 40, 3
        a_gamma = rng.normal(size=(n, 1))
        cols = rng.normal(size=(n, m))
        other = rng.normal(size=(n, m))
        y = cols @ np.array([1.0, 0.0, -0.5]) + rng.normal(size=n) * 0.2
        lam = 0.05
        grouped = make_problem(y, a_gamma, [other, cols], PenaltyConfig(lam, 0.0))
        merged = make_problem(y, a_gamma, [cols, other], PenaltyConfig(lam, 0.0))
        sol_g = solve(grouped, TIGHT)
        sol_m = solve(merged, TIGHT)
        assert np.max(np.abs(sol_g.beta_blocks[1] - sol_m.beta_blocks[0])) < 1e-7
        assert np.max(np.abs(sol_g.beta_blocks[0] - sol_m.beta_blocks[1])) < 1e-7

    def test_block_solution_matches_long_run_prox_gradient(self, rng):
        n, m = 30, 5
        a_gamma = rng.normal(size=(n, 1))
        blocks = [rng.normal(size=(n, m)) for _ in range(3)]
        y = blocks[1] @ rng.normal(size=m) + rng.normal(size=n) * 0.3
        lam, lamg = 0.05, 0.1
        prob = make_problem(y, a_gamma, blocks, PenaltyConfig(lam, lamg), standardize=False)
        sol = solve(prob, TIGHT)
        design = np.hstack([a_gamma] + blocks)
        coef_ref, _ = prox_gradient_solve(design, y, 1, m, 2, lam, lamg, max_iter=100_000)
        got = np.concatenate([sol.gamma] + [b for b in sol.beta_blocks])
        assert np.max(np.abs(got - coef_ref)) < 1e-7


class TestSolve:
    def test_lambda_max_gives_zero_solution(self, rng):
        from covggm.tuning import lambda0_max

        y, a_gamma, blocks = random_sgl_problem(rng, n=50, q=3, p=4)
        prob = make_problem(y, a_gamma, blocks, None)
        lmax = lambda0_max(prob, 1.0)
        prob.penalty = PenaltyConfig.from_mixture(1.0, lmax)
        sol = solve(prob, TIGHT)
        assert np.all(sol.gamma == 0.0)
        assert all(np.all(b == 0.0) for b in sol.beta_blocks)

    def test_warm_start_at_optimum_converges_immediately(self, rng):
        y, a_gamma, blocks = random_sgl_problem(rng, n=50, q=3, p=4)
        prob = make_problem(y, a_gamma, blocks, PenaltyConfig(0.1, 0.05))
        sol = solve(prob, TIGHT)
        again = solve(prob, TIGHT, warm_start=sol)
        assert again.outer_iters == 1
        assert np.max(np.abs(again.gamma - sol.gamma)) < 1e-9
        for h in range(len(blocks)):
            assert np.max(np.abs(again.beta_blocks[h] - sol.beta_blocks[h])) < 1e-9

    def test_full_problem_matches_prox_gradient_oracle(self, rng):
        n, q, p = 50, 3, 4
        y, a_gamma, blocks = random_sgl_problem(rng, n=n, q=q, p=p)
        lam, lamg = 0.1, 0.05
        prob = make_problem(y, a_gamma, blocks, PenaltyConfig(lam, lamg), standardize=False)
        sol = solve(prob, TIGHT)
        design = np.hstack([a_gamma] + blocks)
        _, obj_ref = prox_gradient_solve(design, y, q, p - 1, q, lam, lamg)
        assert _rel_gap(sol.objective, obj_ref) < 1e-8

    def test_objective_field_matches_recomputation(self, rng):
        for _ in range(5):
            y, a_gamma, blocks = random_sgl_problem(rng)
            prob = make_problem(y, a_gamma, blocks, PenaltyConfig(0.08, 0.04))
            sol = solve(prob)
            recomputed = objective(prob, sol.gamma, sol.beta_blocks)
            assert _rel_gap(sol.objective, recomputed) < 1e-10

    def test_monotone_objective_trace(self, rng):
        for _ in range(10):
            y, a_gamma, blocks = random_sgl_problem(rng)
            prob = make_problem(y, a_gamma, blocks, PenaltyConfig(0.05, 0.02))
            sol = solve(prob)
            trace = sol.obj_trace
            assert np.all(np.diff(trace) <= 1e-12 * np.maximum(1.0, np.abs(trace[:-1])))


class TestKktResidual:
    def test_single_coordinate_lasso_closed_form(self, rng):
        n = 25
        a = rng.normal(size=n)
        a /= np.sqrt(np.mean(a * a))
        y = 1.3 * a + rng.normal(size=n) * 0.05
        lam = 0.1
        coef = soft_threshold(float(a @ y) / n, lam)
        prob = make_problem(y, a[:, None], [np.zeros((n, 1))], PenaltyConfig(lam, 0.0))
        from covggm.solver import SglSolution

        sol = SglSolution(
            gamma=np.array([coef]),
            beta_blocks=(np.zeros(1),),
            objective=0.0,
            outer_iters=0,
            converged=True,
            obj_trace=np.empty(0),
        )
        assert kkt_residual(prob, sol) <= 1e-10

    def test_zero_solution_above_lambda_max(self, rng):
        from covggm.tuning import lambda0_max

        y, a_gamma, blocks = random_sgl_problem(rng, n=40, q=2, p=3)
        prob = make_problem(y, a_gamma, blocks, None)
        lmax = lambda0_max(prob, 1.0)
        prob.penalty = PenaltyConfig.from_mixture(1.0, lmax * 1.01)
        from covggm.solver import SglSolution

        q, m = prob.q, prob.m
        sol = SglSolution(
            gamma=np.zeros(q),
            beta_blocks=tuple(np.zeros(m) for _ in range(prob.n_groups + 1)),
            objective=0.0,
            outer_iters=0,
            converged=True,
            obj_trace=np.empty(0),
        )
        assert kkt_residual(prob, sol) == 0.0

    def test_simulation_design_certificate(self):
        from covggm.nodewise import build_interaction_design
        from covggm.simulate import SimulationConfig, generate_dataset

        cfg = SimulationConfig(n=100, p=10, q=5, q_e=2, seed=7)
        truth = generate_dataset(cfg)
        d = truth.dataset
        design = build_interaction_design(d, 0)
        blocks = [design.W[:, h * 9 : (h + 1) * 9] for h in range(6)]
        prob = make_problem(
            d.X[:, 0], d.U, blocks, PenaltyConfig.from_mixture(0.5, 0.05)
        )
        sol = solve(prob, SolverOptions(tol=1e-8, inner_tol=1e-10, inner_max_iters=5000))
        assert kkt_residual(prob, sol) <= 1e-6


class TestSolverInvariants:
    def test_oracle_equivalence_on_random_problems(self, rng):
        # Reduced-count version of the acceptance sweep, exercised per push.
        for _ in range(10):
            y, a_gamma, blocks = random_sgl_problem(rng)
            q, m, ng = a_gamma.shape[1], blocks[0].shape[1], len(blocks) - 1
            design = np.hstack([a_gamma] + blocks)
            lmax = np.max(np.abs(design.T @ y)) / y.size
            lam = lmax * rng.uniform(0.05, 0.7)
            lamg = lmax * rng.uniform(0.0, 0.7)
            prob = make_problem(y, a_gamma, blocks, PenaltyConfig(lam, lamg), standardize=False)
            sol = solve(prob, TIGHT)
            _, obj_ref = prox_gradient_solve(design, y, q, m, ng, lam, lamg)
            assert _rel_gap(sol.objective, obj_ref) < 1e-7
            assert kkt_residual(prob, sol) <= 100 * TIGHT.tol

    def test_scaling_consistency(self, rng):
        # Internally standardized solve == externally standardized solve
        # mapped back, and both report the same objective value.
        y, a_gamma, blocks = random_sgl_problem(rng, n=40, q=2, p=4)
        pen = PenaltyConfig(0.07, 0.03)
        prob_std = make_problem(y, a_gamma, blocks, pen, standardize=True)
        scales = prob_std.column_scales
        q, m = prob_std.q, prob_std.m
        a_gamma_s = a_gamma / scales[:q]
        blocks_s = [
            blocks[h] / scales[q + h * m : q + (h + 1) * m] for h in range(len(blocks))
        ]
        prob_raw = make_problem(y, a_gamma_s, blocks_s, pen, standardize=False)
        sol_std = solve(prob_std, TIGHT)
        sol_raw = solve(prob_raw, TIGHT)
        gamma_back = sol_raw.gamma / scales[:q]
        assert np.max(np.abs(gamma_back - sol_std.gamma)) < 1e-7
        assert _rel_gap(sol_std.objective, sol_raw.objective) < 1e-8

    def test_zero_variance_column_dropped(self, rng):
        n = 30
        a_gamma = rng.normal(size=(n, 2))
        a_gamma[:, 1] = 0.0
        blocks = [rng.normal(size=(n, 2))]
        y = rng.normal(size=n)
        prob = make_problem(y, a_gamma, blocks, PenaltyConfig(0.01, 0.0))
        assert 1 in prob.dropped
        sol = solve(prob, TIGHT)
        assert sol.gamma[1] == 0.0
