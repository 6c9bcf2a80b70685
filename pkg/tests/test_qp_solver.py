import csv

import numpy as np
import pytest
from numpy.testing import assert_allclose

from sensorplace import (
    LowRankHessian,
    NonconvergenceError,
    QpProblem,
    assemble_normal_matrix_action,
    solve_qp,
    starting_point,
)
from oracles import enumerate_box_budget_qp


def random_problem(rng, n, factored=False, n_nodes=4):
    if factored:
        coef = rng.normal(size=(n_nodes, n))
        root = rng.normal(size=(n_nodes, n_nodes))
        hess = LowRankHessian(coef, root.T @ root)
    else:
        root = rng.normal(size=(n, n))
        hess = root.T @ root + 0.1 * np.eye(n)
    g = rng.normal(size=n)
    low = rng.uniform(-1.0, 0.0, n)
    high = low + rng.uniform(0.5, 1.5, n)
    rhs = rng.uniform(low.sum() + 0.3, high.sum())
    return QpProblem(g, hess, low, high, rhs)


class TestExamples:
    def test_gradient_pushes_to_lower_box(self):
        n = 5
        prob = QpProblem(np.ones(n), np.eye(n), np.zeros(n), np.ones(n), 100.0)
        sol = solve_qp(prob)
        assert np.abs(sol.p).max() < 1e-7

    def test_symmetric_budget_active(self):
        n = 6
        prob = QpProblem(-np.ones(n), np.eye(n), np.zeros(n), np.ones(n), n / 2.0)
        sol = solve_qp(prob)
        assert_allclose(sol.p, np.full(n, 0.5), atol=1e-7)
        # budget multiplier closes the stationarity gap: p - 1 + lam_b = 0
        assert sol.lam[-1] == pytest.approx(0.5, abs=1e-6)

    def test_matches_enumeration_oracle(self, rng):
        for _ in range(15):
            n = int(rng.integers(2, 7))
            prob = random_problem(rng, n)
            p_star, _ = enumerate_box_budget_qp(
                prob.g, prob.hess, prob.box_low, prob.box_high, prob.budget_rhs
            )
            sol = solve_qp(prob, tol=1e-10)
            assert np.abs(sol.p - p_star).max() < 1e-6


class TestKktContract:
    def test_residuals_and_complementarity(self, rng):
        for factored in (False, True):
            prob = random_problem(rng, 30, factored=factored)
            tol = 1e-8
            sol = solve_qp(prob, tol=tol)
            assert sol.residual_dual <= tol
            assert sol.residual_primal <= tol
            assert sol.mu <= tol
            # feasibility within tolerance
            assert np.all(sol.p >= prob.box_low - tol)
            assert np.all(sol.p <= prob.box_high + tol)
            assert sol.p.sum() <= prob.budget_rhs + tol

    def test_complementarity_products_bounded(self, rng):
        prob = random_problem(rng, 12)
        tol = 1e-8
        sol = solve_qp(prob, tol=tol)
        slack = np.concatenate(
            [sol.p - prob.box_low, prob.box_high - sol.p, [prob.budget_rhs - sol.p.sum()]]
        )
        assert np.abs(slack * sol.lam).max() <= 10.0 * tol

    def test_mu_decreases_on_well_conditioned_instance(self, tmp_path):
        n = 10
        prob = QpProblem(np.linspace(-1, 1, n), np.eye(n), np.zeros(n), np.ones(n), 4.0)
        log = tmp_path / "qp.csv"
        solve_qp(prob, log_path=log)
        with open(log, newline="") as fh:
            rows = list(csv.reader(fh))
        mu = np.array([float(r[1]) for r in rows[1:]])
        assert np.all(mu[1:] <= 0.99 * mu[:-1])


class TestStructuredPath:
    def test_structured_matches_dense(self, rng):
        for n in (40, 120, 200):
            coef = rng.normal(size=(7, n))
            root = rng.normal(size=(7, 7))
            g = rng.normal(size=n)
            low = -rng.uniform(0.2, 1.0, n)
            high = rng.uniform(0.2, 1.0, n)
            rhs = rng.uniform(low.sum() + 0.5, high.sum())
            fact = LowRankHessian(coef, root.T @ root)
            s_struct = solve_qp(QpProblem(g, fact, low, high, rhs))
            s_dense = solve_qp(QpProblem(g, fact.dense(), low, high, rhs))
            assert np.abs(s_struct.p - s_dense.p).max() < 1e-6

    def test_zero_core_is_diagonal_plus_rank_one(self, rng):
        n = 25
        fact = LowRankHessian(rng.normal(size=(3, n)), np.zeros((3, 3)))
        prob = random_problem(rng, n)
        prob.hess = fact
        it = starting_point(prob)
        action = assemble_normal_matrix_action(prob, it)
        v = rng.normal(size=n)
        # against the explicit matrix
        d = it.lam / it.s
        x = np.diag(np.maximum(d[:n] + d[n : 2 * n], 1e-14)) + d[2 * n] * np.ones((n, n))
        assert_allclose(action.solve(v), np.linalg.solve(x, v), atol=1e-9)

    def test_rank_one_core_matches_dense_inverse(self, rng):
        n = 15
        fact = LowRankHessian(rng.normal(size=(1, n)), np.array([[2.0]]))
        prob = random_problem(rng, n)
        prob.hess = fact
        it = starting_point(prob)
        action = assemble_normal_matrix_action(prob, it)
        d = it.lam / it.s
        x = (
            fact.dense()
            + np.diag(np.maximum(d[:n] + d[n : 2 * n], 1e-14))
            + d[2 * n] * np.ones((n, n))
        )
        v = rng.normal(size=n)
        assert_allclose(action.solve(v), np.linalg.solve(x, v), atol=1e-9)

    def test_apply_solve_roundtrip(self, rng):
        prob = random_problem(rng, 50, factored=True, n_nodes=9)
        it = starting_point(prob)
        action = assemble_normal_matrix_action(prob, it)
        for _ in range(3):
            v = rng.normal(size=50)
            assert np.abs(action.apply(action.solve(v)) - v).max() < 1e-8


class TestStartingPoint:
    def test_center_with_generous_budget(self):
        prob = QpProblem(np.zeros(4), np.eye(4), np.zeros(4), np.ones(4), 100.0)
        it = starting_point(prob)
        assert_allclose(it.p, np.full(4, 0.5))
        assert np.all(it.s >= 1.0)
        assert_allclose(it.lam, np.ones(9))

    def test_budget_pushes_inside(self):
        prob = QpProblem(np.zeros(4), np.eye(4), np.zeros(4), np.ones(4), 1.0)
        it = starting_point(prob)
        assert it.p.sum() < 1.0
        assert np.all(it.p > 0.0)

    def test_infeasible_budget_rejected(self):
        prob = QpProblem(np.zeros(3), np.eye(3), np.zeros(3), np.ones(3), -0.5)
        with pytest.raises(ValueError):
            starting_point(prob)

    def test_slacks_floored(self):
        prob = QpProblem(np.zeros(3), np.eye(3), np.zeros(3), np.ones(3), 5.0)
        assert np.all(starting_point(prob).s >= 1.0)


class TestErrors:
    def test_non_psd_rejected(self):
        n = 4
        hess = -np.eye(n)
        with pytest.raises(ValueError):
            solve_qp(QpProblem(np.ones(n), hess, np.zeros(n), np.ones(n), 2.0))

    def test_nonconvergence_carries_residuals(self, rng):
        prob = random_problem(rng, 8)
        with pytest.raises(NonconvergenceError) as err:
            solve_qp(prob, tol=1e-12, max_iter=2)
        assert "mu" in err.value.residuals

    def test_iteration_log_written(self, rng, tmp_path):
        prob = random_problem(rng, 6)
        log = tmp_path / "iters.csv"
        solve_qp(prob, log_path=log)
        with open(log, newline="") as fh:
            header = next(csv.reader(fh))
        assert header == ["iter", "mu", "r_dual", "r_primal", "alpha_primal", "alpha_dual"]
