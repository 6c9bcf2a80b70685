"""Sequential quadratic programming outer loop with backtracking line search.

Each iteration builds the quadratic model of the design criterion at the
current weights (gradient and Hessian from the surrogate, or exact dense
ones in oracle mode), solves the box-plus-budget QP for a step p, and
backtracks on the true objective until the sufficient-decrease condition

    phi(w + a p) <= phi(w) + xi * a * g^T p

holds.  Duals follow the convex-combination update
lam <- lam + a (lam_qp - lam).  The loop stops once the objective decrease
falls below ``epsilon``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .chebyshev import LowRankKernel
from .exceptions import NonconvergenceError
from .objective import (
    BayesSetup,
    DesignWeights,
    PosteriorEngine,
    dense_objective_and_derivatives,
    dense_objective_value,
)
from .qp_solver import LowRankHessian, QpProblem, solve_qp

__all__ = ["SqpConfig", "SqpResult", "initial_point", "solve_relaxed"]


@dataclass(frozen=True)
class SqpConfig:
    """Outer-loop constants; defaults follow the line-search recipe
    (shrink factor 0.5, sufficient-decrease coefficient 1e-3)."""

    epsilon: float = 1e-3
    backtrack_factor: float = 0.5
    sufficient_decrease: float = 1e-3
    max_outer: int = 200
    max_backtracks: int = 40
    qp_tol: float = 1e-8
    qp_max_iter: int = 100

    def __post_init__(self):
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not (0.0 < self.sufficient_decrease < 1.0):
            raise ValueError("sufficient_decrease must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class SqpResult:
    weights: DesignWeights
    objective_trace: np.ndarray
    dual: np.ndarray
    iterations: int
    status: str
    step_lengths: list = field(default_factory=list)
    qp_iterations: list = field(default_factory=list)


def initial_point(n_weights: int, budget: float, row_group=None) -> DesignWeights:
    """Uniform strictly feasible start w_i = budget / n_weights."""
    if not (0.0 < budget <= n_weights):
        raise ValueError("budget must lie in (0, n_weights]")
    w = np.full(n_weights, budget / n_weights)
    return DesignWeights(w, budget, row_group=row_group)


class _SurrogateObjective:
    def __init__(self, lowrank: LowRankKernel, setup: BayesSetup, row_group=None):
        self.engine = PosteriorEngine(lowrank, setup, row_group)
        self.n_weights = self.engine.n_weights

    def value(self, w):
        return self.engine.value(w)

    def derivatives(self, w):
        value, deriv = self.engine.derivatives(w)
        hess = LowRankHessian(deriv.coef_weights, deriv.htilde)
        return value, deriv.gradient, hess


class _DenseObjective:
    def __init__(self, f_matrix: np.ndarray, setup: BayesSetup, row_group=None):
        self.f = np.asarray(f_matrix, dtype=float)
        self.setup = setup
        self.row_group = row_group
        self.n_weights = (
            self.f.shape[0] if row_group is None else int(np.max(row_group)) + 1
        )

    def _weights(self, w):
        return DesignWeights(w, budget=float(self.n_weights), row_group=self.row_group)

    def value(self, w):
        return dense_objective_value(self.f, self._weights(w), self.setup)

    def derivatives(self, w):
        return dense_objective_and_derivatives(
            self.f, self._weights(w), self.setup, oracle_cap=max(self.f.shape)
        )


def _make_model(kernel_matrix, setup, row_group):
    if isinstance(kernel_matrix, LowRankKernel):
        return _SurrogateObjective(kernel_matrix, setup, row_group)
    return _DenseObjective(kernel_matrix, setup, row_group)


def solve_relaxed(
    kernel_matrix,
    setup: BayesSetup,
    budget: float,
    config: SqpConfig = SqpConfig(),
    row_group=None,
    log_path=None,
) -> SqpResult:
    """Minimize the relaxed design criterion over 0 <= w <= 1, sum w <= n0.

    ``kernel_matrix`` is a LowRankKernel (surrogate mode) or a dense array
    (exact oracle mode).  Line-search objective values use the same route
    as the derivatives, so the Armijo test sees the function the model
    describes.  QP failures propagate with the outer-iteration context.
    """
    model = _make_model(kernel_matrix, setup, row_group)
    n_w = model.n_weights
    start = initial_point(n_w, budget, row_group=row_group)
    w = start.w.copy()
    dual = np.zeros(2 * n_w + 1)
    current = model.value(w)
    trace = [current]
    steps: list[float] = []
    qp_iters: list[int] = []
    log_rows = []
    status = "max_iter"
    iterations = 0

    for k in range(config.max_outer):
        current, g, hess = model.derivatives(w)
        qp = QpProblem(
            g=g,
            hess=hess,
            box_low=-w,
            box_high=1.0 - w,
            budget_rhs=budget - w.sum(),
        )
        try:
            sol = solve_qp(qp, tol=config.qp_tol, max_iter=config.qp_max_iter)
        except NonconvergenceError as err:
            raise NonconvergenceError(
                f"QP subproblem failed at outer iteration {k}: {err}",
                err.residuals,
            ) from err
        p = sol.p
        slope = float(g @ p)
        # Convexity bounds any decrease along p by |g^T p|; once that is
        # below round-off the epsilon stopping test cannot fail.
        if slope >= -1e-13 * (1.0 + abs(current)):
            status = "converged"
            iterations = k
            break

        alpha = 1.0
        accepted = False
        candidate_value = current
        for _ in range(config.max_backtracks):
            candidate = np.clip(w + alpha * p, 0.0, 1.0)
            candidate_value = model.value(candidate)
            if candidate_value <= current + config.sufficient_decrease * alpha * slope:
                accepted = True
                break
            alpha *= config.backtrack_factor
        iterations = k + 1
        if not accepted:
            status = "max_iter"
            break

        w = np.clip(w + alpha * p, 0.0, 1.0)
        dual = dual + alpha * (sol.lam - dual)
        trace.append(candidate_value)
        steps.append(alpha)
        qp_iters.append(sol.iterations)
        log_rows.append([k, candidate_value, alpha, slope, sol.iterations])
        if current - candidate_value < config.epsilon:
            status = "converged"
            break

    _write_sqp_log(log_path, log_rows)
    weights = DesignWeights(w, budget, row_group=row_group)
    return SqpResult(
        weights=weights,
        objective_trace=np.asarray(trace),
        dual=dual,
        iterations=iterations,
        status=status,
        step_lengths=steps,
        qp_iterations=qp_iters,
    )


def _write_sqp_log(path, rows) -> None:
    if path is None:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "objective", "step_length", "slope", "qp_iterations"])
        writer.writerows(rows)
