"""Interior-point solver for box-plus-budget quadratic programs.

Solves

    min  g^T p + 1/2 p^T H p
    s.t. box_low <= p <= box_high,  sum(p) <= budget_rhs,

the subproblem shape produced by the SQP outer loop.  In constraint form
A p >= b with A = (I; -I; -1^T) the primal-dual Newton step reduces to the
normal equation

    (H + D + d_b 1 1^T) dp = rhs,

where D is diagonal and d_b is a scalar, both from the slack/multiplier
ratios.  When H is supplied in factored form C^T Htilde C (rank N << n),
the solve uses a truncated eigendecomposition of Htilde, the Woodbury
identity against D, and a rank-one Sherman-Morrison update for the budget
term, costing O(n N^2) per iteration; a dense fallback factorizes
directly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import NonconvergenceError, NumericalFailure

__all__ = [
    "LowRankHessian",
    "QpProblem",
    "QpIterate",
    "QpSolution",
    "NormalMatrixAction",
    "assemble_normal_matrix_action",
    "starting_point",
    "solve_qp",
]

# Eigenvalues of Htilde below this fraction of the largest are dropped
# before inverting (it is PSD but usually rank deficient).
CORE_TRUNCATION = 1e-10

# Slack/multiplier ratios are floored here before inversion; the
# fraction-to-boundary rule keeps iterates away from this in practice.
DIAGONAL_FLOOR = 1e-14

# PSD acceptance slack for the supplied Hessian, relative to its largest
# eigenvalue.
PSD_SLACK = 1e-10


@dataclass(frozen=True)
class LowRankHessian:
    """Factored PSD Hessian H = coef^T core coef with core N x N."""

    coef: np.ndarray
    core: np.ndarray

    @property
    def shape(self):
        n = self.coef.shape[1]
        return (n, n)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.coef.T @ (self.core @ (self.coef @ x))

    def dense(self) -> np.ndarray:
        return self.coef.T @ self.core @ self.coef


@dataclass
class QpProblem:
    """Data of one box-plus-budget QP."""

    g: np.ndarray
    hess: np.ndarray | LowRankHessian
    box_low: np.ndarray
    box_high: np.ndarray
    budget_rhs: float

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        self.box_low = np.asarray(self.box_low, dtype=float)
        self.box_high = np.asarray(self.box_high, dtype=float)
        n = self.g.size
        if self.box_low.size != n or self.box_high.size != n:
            raise ValueError("box bounds must match the gradient length")
        if np.any(self.box_low > self.box_high):
            raise ValueError("box_low must not exceed box_high")

    @property
    def n(self) -> int:
        return self.g.size

    def hess_matvec(self, x: np.ndarray) -> np.ndarray:
        if isinstance(self.hess, LowRankHessian):
            return self.hess.matvec(x)
        return self.hess @ x


@dataclass
class QpIterate:
    """Interior-point state: primal p, slacks s > 0, multipliers lam > 0."""

    p: np.ndarray
    s: np.ndarray
    lam: np.ndarray

    @property
    def mu(self) -> float:
        return float(self.s @ self.lam / self.s.size)


@dataclass
class QpSolution:
    p: np.ndarray
    lam: np.ndarray
    iterations: int
    mu: float
    residual_dual: float
    residual_primal: float


def _constraint_apply(p: np.ndarray) -> np.ndarray:
    return np.concatenate([p, -p, [-p.sum()]])


def _constraint_apply_t(y: np.ndarray, n: int) -> np.ndarray:
    return y[:n] - y[n : 2 * n] - y[2 * n]


def _rhs_vector(problem: QpProblem) -> np.ndarray:
    return np.concatenate([problem.box_low, -problem.box_high, [-problem.budget_rhs]])


class NormalMatrixAction:
    """Operator v -> (H + D + d_b 1 1^T) v and its inverse action.

    For factored H the inverse uses the Woodbury identity against the
    truncated eigendecomposition of the core (pass ``core_factors`` to
    reuse it across iterations), then a Sherman-Morrison update for the
    rank-one budget term.
    """

    def __init__(self, problem: QpProblem, iterate: QpIterate, core_factors=None):
        n = problem.n
        d = iterate.lam / iterate.s
        self.problem = problem
        self.diag = np.maximum(d[:n] + d[n : 2 * n], DIAGONAL_FLOOR)
        self.budget_coeff = float(d[2 * n])
        self._ones = np.ones(n)
        if isinstance(problem.hess, LowRankHessian):
            if core_factors is None:
                core_factors = truncated_core(problem.hess.core)
            self._core_factors = core_factors
            theta, basis = core_factors
            self._dense_solver = None
            if theta.size:
                # Scale sqrt(theta) into the rows so the Woodbury core is
                # I + W D^{-1} W^T: far better conditioned than the raw
                # form with theta^{-1} when theta spans many decades.
                self._wrows = np.sqrt(theta)[:, None] * (basis.T @ problem.hess.coef)
                dinv = 1.0 / self.diag
                small = np.eye(theta.size) + (self._wrows * dinv[None, :]) @ self._wrows.T
                try:
                    self._small_chol = np.linalg.cholesky(small)
                except np.linalg.LinAlgError as err:
                    raise NumericalFailure(
                        "inner Woodbury system is singular",
                        {"size": small.shape[0]},
                    ) from err
            else:
                self._wrows = None
                self._small_chol = None
        else:
            x = np.asarray(problem.hess, dtype=float).copy()
            x[np.diag_indices(n)] += self.diag
            x += self.budget_coeff
            self._dense_solver = x
            self._ct = None
            self._core_factors = None
        # Cache X^{-1} 1 for the Sherman-Morrison budget update (the dense
        # path folds the budget term into its factorized matrix instead).
        self._xinv_ones = None if self._dense_solver is not None else self._solve_no_budget(self._ones)

    def apply(self, v: np.ndarray) -> np.ndarray:
        base = _hess_matvec_trunc(self.problem, self._core_factors, v) + self.diag * v
        return base + self.budget_coeff * self._ones * v.sum()

    def _solve_no_budget(self, y: np.ndarray) -> np.ndarray:
        if self._dense_solver is not None:
            # Dense path folds the budget term into the factorized matrix, so
            # "no budget" is recovered by Sherman-Morrison in reverse; solve
            # the full matrix directly instead and skip the update.
            return np.linalg.solve(self._dense_solver, y)
        dinv_y = y / self.diag
        if self._small_chol is None:
            return dinv_y
        t = self._wrows @ dinv_y
        z = np.linalg.solve(self._small_chol, t)
        z = np.linalg.solve(self._small_chol.T, z)
        return dinv_y - (self._wrows.T @ z) / self.diag

    def _solve_once(self, y: np.ndarray) -> np.ndarray:
        z = self._solve_no_budget(y)
        if self._dense_solver is not None:
            return z
        u = self._xinv_ones
        denom = self._ones @ u + 1.0 / self.budget_coeff
        return z - u * (self._ones @ z) / denom

    def solve(self, y: np.ndarray, refine: int = 2) -> np.ndarray:
        """Inverse action with iterative refinement against the exact
        operator; the Woodbury path loses digits when the interior-point
        diagonal spans many orders of magnitude."""
        x = self._solve_once(y)
        for _ in range(refine):
            residual = y - self.apply(x)
            if np.abs(residual).max() <= 1e-14 * max(1.0, float(np.abs(y).max())):
                break
            x = x + self._solve_once(residual)
        return x


def truncated_core(core: np.ndarray):
    """Eigendecomposition of the PSD core, keeping values above threshold."""
    core = 0.5 * (core + core.T)
    lam, vec = np.linalg.eigh(core)
    lam = lam[::-1]
    vec = vec[:, ::-1]
    if lam.size == 0 or lam[0] <= 0.0:
        return lam[:0], vec[:, :0]
    keep = lam > CORE_TRUNCATION * lam[0]
    return lam[keep], vec[:, keep]


def assemble_normal_matrix_action(problem: QpProblem, iterate: QpIterate) -> NormalMatrixAction:
    """Build the normal-equation operator for the current iterate."""
    return NormalMatrixAction(problem, iterate)


def starting_point(problem: QpProblem) -> QpIterate:
    """Strictly interior cold start.

    p sits at the box center, blended toward the lower corner when the
    budget cuts through the center; slacks are the constraint slacks
    floored at 1 and multipliers start at 1.
    """
    low, high = problem.box_low, problem.box_high
    if np.any(low >= high):
        raise ValueError("box interior is empty")
    low_sum = low.sum()
    if problem.budget_rhs <= low_sum:
        raise ValueError("budget leaves no interior above the lower bounds")
    p = 0.5 * (low + high)
    margin = 0.1 * (problem.budget_rhs - low_sum)
    target = problem.budget_rhs - margin
    if p.sum() > target:
        theta = min(0.99, (p.sum() - target) / (p.sum() - low_sum))
        p = p + theta * (low - p)
    s = np.maximum(_constraint_apply(p) - _rhs_vector(problem), 1.0)
    lam = np.ones(2 * problem.n + 1)
    return QpIterate(p, s, lam)


def _check_psd(problem: QpProblem) -> None:
    if isinstance(problem.hess, LowRankHessian):
        lam = np.linalg.eigvalsh(0.5 * (problem.hess.core + problem.hess.core.T))
    else:
        lam = np.linalg.eigvalsh(0.5 * (problem.hess + np.asarray(problem.hess).T))
    if lam.size and lam[0] < -PSD_SLACK * max(lam[-1], 1e-30):
        raise ValueError("Hessian is not positive semi-definite")


def solve_qp(
    problem: QpProblem,
    tol: float = 1e-8,
    max_iter: int = 100,
    sigma: float = 0.1,
    boundary_factor: float = 0.995,
    log_path=None,
) -> QpSolution:
    """Primal-dual interior-point solve to KKT tolerance ``tol``.

    Fixed centering sigma, one corrector-free step per iteration, and the
    fraction-to-boundary rule applied separately to slacks and
    multipliers.  Stops when max(||r_d||_inf, ||r_p||_inf, mu) <= tol;
    raises NonconvergenceError past ``max_iter``.
    """
    _check_psd(problem)
    n = problem.n
    it = starting_point(problem)
    b = _rhs_vector(problem)
    core_factors = None
    if isinstance(problem.hess, LowRankHessian):
        core_factors = truncated_core(problem.hess.core)

    log_rows = []
    p, s, lam = it.p, it.s, it.lam
    r_d = r_p = None
    mu = it.mu
    for k in range(max_iter):
        hp = _hess_matvec_trunc(problem, core_factors, p)
        r_d = hp + problem.g - _constraint_apply_t(lam, n)
        r_p = _constraint_apply(p) - s - b
        mu = float(s @ lam / s.size)
        err_d = float(np.abs(r_d).max())
        err_p = float(np.abs(r_p).max())
        if max(err_d, err_p, mu) <= tol:
            _write_qp_log(log_path, log_rows)
            return QpSolution(p, lam, k, mu, err_d, err_p)

        d = lam / s
        action = NormalMatrixAction(problem, QpIterate(p, s, lam), core_factors)
        rhs = -r_d + _constraint_apply_t(d * (-r_p - s + sigma * mu / lam), n)
        dp = action.solve(rhs)
        ds = _constraint_apply(dp) + r_p
        dlam = -d * (_constraint_apply(dp) + r_p) - lam + sigma * mu / s

        alpha_p = _fraction_to_boundary(s, ds, boundary_factor)
        alpha_d = _fraction_to_boundary(lam, dlam, boundary_factor)
        p = p + alpha_p * dp
        s = s + alpha_p * ds
        lam = lam + alpha_d * dlam
        log_rows.append([k, mu, err_d, err_p, alpha_p, alpha_d])

    _write_qp_log(log_path, log_rows)
    raise NonconvergenceError(
        f"interior-point solve did not reach tol={tol} in {max_iter} iterations",
        {"mu": mu, "r_dual": float(np.abs(r_d).max()), "r_primal": float(np.abs(r_p).max())},
    )


def _hess_matvec_trunc(problem, core_factors, x):
    # Use the truncated core consistently so the Newton model and the
    # residuals describe the same (PSD-perturbed) problem.
    if core_factors is None:
        return problem.hess_matvec(x)
    theta, basis = core_factors
    if theta.size == 0:
        return np.zeros_like(x)
    cx = basis.T @ (problem.hess.coef @ x)
    return problem.hess.coef.T @ (basis @ (theta * cx))


def _fraction_to_boundary(x: np.ndarray, dx: np.ndarray, factor: float) -> float:
    neg = dx < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, factor * np.min(-x[neg] / dx[neg])))


def _write_qp_log(path, rows) -> None:
    if path is None:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "mu", "r_dual", "r_primal", "alpha_primal", "alpha_dual"])
        writer.writerows(rows)
