"""Posterior-covariance design criteria and their derivatives.

For a kernel matrix F, weights w, and noise/prior ratio alpha, the
posterior covariance of the Bayesian linear inverse problem is

    Gamma_post = sigma2_noise * (F^T W F + alpha I)^(-1),

with W = diag of the per-row weights.  The A-criterion is its trace, the
D-criterion its log-determinant.  Everything here comes in two routes:

* a fast spectral route through the low-rank surrogate F_s, costing
  O(n log^2 n) per evaluation, with gradients and Hessians interpolated
  from node-space matrices M1, M2;
* an exact dense route used as a validation oracle on small problems.

Space-time designs attach one weight to a group of rows (all measurement
times along one beam); gradients and Hessians then sum the per-row
quantities over each group.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chebyshev import LowRankKernel
from .exceptions import NumericalFailure

__all__ = [
    "DesignWeights",
    "BayesSetup",
    "PosteriorSpectrum",
    "InterpolatedDerivatives",
    "PosteriorEngine",
    "posterior_spectrum",
    "objective_value",
    "apply_posterior_inverse",
    "interpolated_derivatives",
    "dense_objective_value",
    "dense_objective_and_derivatives",
    "group_reduce",
    "group_reduce_matrix",
    "DEFAULT_ORACLE_CAP",
]

DEFAULT_ORACLE_CAP = 2000

# Eigenvalues below this fraction of the largest are dropped from the
# posterior spectrum; keeps lam/(alpha + lam) well-defined.
SPECTRUM_TRUNCATION = 1e-12

# Solver round-off can push weights slightly negative; anything beyond
# this is a real constraint violation.
WEIGHT_CLAMP = 1e-12


@dataclass
class DesignWeights:
    """Relaxed or binary design weights with a total budget.

    ``row_group`` maps each row of F to its weight index for space-time
    designs (None means one weight per row).  Weights are clamped into
    [0, 1] within round-off; true violations raise.
    """

    w: np.ndarray
    budget: float
    row_group: np.ndarray | None = None
    binary: bool = False

    def __post_init__(self):
        w = np.array(self.w, dtype=float, copy=True)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a nonempty vector")
        if w.min() < -WEIGHT_CLAMP or w.max() > 1.0 + WEIGHT_CLAMP:
            raise ValueError("weights must lie in [0, 1]")
        np.clip(w, 0.0, 1.0, out=w)
        if self.binary and not np.all((w == 0.0) | (w == 1.0)):
            raise ValueError("binary weights must be exactly 0 or 1")
        if w.sum() > self.budget + 1e-9 * max(1.0, self.budget):
            raise ValueError("weights exceed the budget")
        self.w = w
        if self.row_group is not None:
            rg = np.asarray(self.row_group, dtype=int)
            _check_groups(rg, w.size)
            self.row_group = rg

    @property
    def n_weights(self) -> int:
        return self.w.size

    @property
    def n_rows(self) -> int:
        return self.w.size if self.row_group is None else self.row_group.size

    def row_weights(self) -> np.ndarray:
        if self.row_group is None:
            return self.w
        return self.w[self.row_group]

    def group_rows(self) -> list[np.ndarray]:
        """Rows owned by each weight, the map view of ``row_group``."""
        if self.row_group is None:
            return [np.array([i]) for i in range(self.n_weights)]
        order = np.argsort(self.row_group, kind="stable")
        splits = np.searchsorted(self.row_group[order], np.arange(1, self.n_weights))
        return np.split(order, splits)


@dataclass(frozen=True)
class BayesSetup:
    """Noise/prior constants and criterion choice.

    ``alpha`` is sigma2_noise / sigma2_prior.  ``time_precision`` is the
    per-location inverse noise covariance in time (SPD, defaults to the
    identity); it is folded in by pre-whitening rows with its Cholesky
    factor.
    """

    alpha: float
    sigma2_noise: float = 1.0
    criterion: str = "A"
    time_precision: np.ndarray | None = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.sigma2_noise <= 0:
            raise ValueError("sigma2_noise must be positive")
        if self.criterion not in ("A", "D"):
            raise ValueError("criterion must be 'A' or 'D'")
        if self.time_precision is not None:
            p = np.asarray(self.time_precision, dtype=float)
            if p.ndim != 2 or p.shape[0] != p.shape[1]:
                raise ValueError("time_precision must be square")
            if not np.allclose(p, p.T, atol=1e-12):
                raise ValueError("time_precision must be symmetric")
            if np.linalg.eigvalsh(p).min() <= 0:
                raise ValueError("time_precision must be positive definite")
            object.__setattr__(self, "time_precision", p)


@dataclass(frozen=True)
class PosteriorSpectrum:
    """Orthonormal factor Q and eigenvalues of F_s^T W F_s.

    Enables O(n log n) objective values and inverse applications:
    F_s^T W F_s = Q diag(lam) Q^T with lam descending and truncated at
    SPECTRUM_TRUNCATION relative to the largest.
    """

    q: np.ndarray
    lam: np.ndarray

    @property
    def rank(self) -> int:
        return self.lam.size

    @property
    def n(self) -> int:
        return self.q.shape[0]


@dataclass(frozen=True)
class InterpolatedDerivatives:
    """Node-space derivative data for the surrogate objective.

    ``m1[i, j] = ftil_i^T (F_s^T W F_s + alpha I)^(-1) ftil_j`` and ``m2``
    the same with the squared inverse, where ftil_i are the columns of
    coef_in^T node_values^T.  ``htilde`` is the node-space Hessian core
    (2 sigma2 * m1 o m2 for the A-criterion, m1 o m1 for D) so the weight
    Hessian is coef_weights^T htilde coef_weights; ``gradient`` is already
    summed over weight groups.
    """

    m1: np.ndarray
    m2: np.ndarray
    htilde: np.ndarray
    gradient: np.ndarray
    coef_weights: np.ndarray


def _check_groups(row_group: np.ndarray, n_groups: int) -> None:
    if row_group.ndim != 1 or row_group.size == 0:
        raise ValueError("row_group must be a nonempty vector")
    if row_group.min() < 0 or row_group.max() >= n_groups:
        raise ValueError("group ids must lie in [0, n_groups)")
    if np.unique(row_group).size != n_groups:
        raise ValueError("every group must own at least one row")


def _whiten_rows(coef_or_matrix: np.ndarray, time_precision: np.ndarray, rows_axis: int):
    """Scale each location block by the Cholesky factor of the precision."""
    p = time_precision
    n_t = p.shape[0]
    chol = np.linalg.cholesky(p)
    if rows_axis == 1:  # (N, n_rows) coefficient layout
        n_out, n_rows = coef_or_matrix.shape
        if n_rows % n_t:
            raise ValueError("row count is not a multiple of the time block size")
        blocks = coef_or_matrix.reshape(n_out, n_rows // n_t, n_t)
        return (blocks @ chol).reshape(n_out, n_rows)
    n_rows, m = coef_or_matrix.shape
    if n_rows % n_t:
        raise ValueError("row count is not a multiple of the time block size")
    blocks = coef_or_matrix.reshape(n_rows // n_t, n_t, m)
    out = np.einsum("st,lsm->ltm", chol, blocks)
    return out.reshape(n_rows, m)


class PosteriorEngine:
    """Repeated-evaluation workhorse for one surrogate kernel.

    Precomputes the weight-independent SVD of the input factor
    B = coef_in^T node_values^T once, after which each objective value
    costs one small eigendecomposition: F_s^T W F_s = B G B^T with
    G = coef_out W coef_out^T, so the nonzero spectrum is that of
    (S1 V1^T) G (V1 S1).  With row groups, per-group Gram matrices are
    precomputed and G is their weighted sum.
    """

    def __init__(self, lowrank: LowRankKernel, setup: BayesSetup, row_group=None):
        self.setup = setup
        coef_rows = lowrank.coef_out
        if setup.time_precision is not None:
            coef_rows = _whiten_rows(coef_rows, setup.time_precision, rows_axis=1)
        self.coef_rows = coef_rows
        self.row_group = None if row_group is None else np.asarray(row_group, dtype=int)
        self.n_ambient = lowrank.n_cols
        b = lowrank.input_factor  # (n_cols, N_out)
        try:
            u1, s1, v1t = np.linalg.svd(b, full_matrices=False)
        except np.linalg.LinAlgError as err:
            raise NumericalFailure(
                "SVD of the input factor failed",
                {"shape": b.shape, "fro_norm": float(np.linalg.norm(b))},
            ) from err
        self.u1 = u1
        self.sv1t = s1[:, None] * v1t  # (r1, N_out)
        self.input_columns = b  # columns ftil_i live along axis 1
        if self.row_group is not None:
            self.n_weights = int(self.row_group.max()) + 1
            _check_groups(self.row_group, self.n_weights)
            n_out = coef_rows.shape[0]
            grams = np.empty((self.n_weights, n_out, n_out))
            for k in range(self.n_weights):
                ck = coef_rows[:, self.row_group == k]
                grams[k] = ck @ ck.T
            self.group_grams = grams
        else:
            self.n_weights = coef_rows.shape[1]
            self.group_grams = None

    def weighted_gram(self, w: np.ndarray) -> np.ndarray:
        w = np.clip(np.asarray(w, dtype=float), 0.0, None)
        if self.group_grams is not None:
            return np.tensordot(w, self.group_grams, axes=1)
        cw = self.coef_rows * w[None, :]
        g = cw @ self.coef_rows.T
        return 0.5 * (g + g.T)

    def _core_eigh(self, w):
        g = self.weighted_gram(w)
        k = self.sv1t @ g @ self.sv1t.T
        k = 0.5 * (k + k.T)
        try:
            lam, vec = np.linalg.eigh(k)
        except np.linalg.LinAlgError as err:
            raise NumericalFailure(
                "eigendecomposition of the posterior core failed",
                {"size": k.shape[0], "fro_norm": float(np.linalg.norm(k))},
            ) from err
        return lam[::-1], vec[:, ::-1]

    def eigenvalues(self, w) -> np.ndarray:
        lam, _ = self._core_eigh(w)
        return _truncate(lam)

    def spectrum(self, w) -> PosteriorSpectrum:
        lam, vec = self._core_eigh(w)
        lam = _truncate(lam)
        q = self.u1 @ vec[:, : lam.size]
        return PosteriorSpectrum(q, lam)

    def value(self, w) -> float:
        return _value_from_eigs(self.eigenvalues(w), self.setup, self.n_ambient)

    def derivatives(self, w):
        """Objective value, per-weight gradient, and node-space Hessian data."""
        setup = self.setup
        spectrum = self.spectrum(w)
        value = _value_from_eigs(spectrum.lam, setup, self.n_ambient)
        ftil = self.input_columns
        minv = apply_posterior_inverse(spectrum, setup, ftil)
        m1 = ftil.T @ minv
        m1 = 0.5 * (m1 + m1.T)
        m2 = minv.T @ minv
        m2 = 0.5 * (m2 + m2.T)
        c = self.coef_rows
        if setup.criterion == "A":
            per_row = -setup.sigma2_noise * np.sum(c * (m2 @ c), axis=0)
            htilde = 2.0 * setup.sigma2_noise * (m1 * m2)
        else:
            per_row = -np.sum(c * (m1 @ c), axis=0)
            htilde = m1 * m1
        gradient = group_reduce(per_row, self.row_group, self.n_weights)
        return value, InterpolatedDerivatives(m1, m2, htilde, gradient, self.coef_weights)

    @cached_property
    def coef_weights(self) -> np.ndarray:
        """Output coefficients summed over each weight group (N, n_weights)."""
        if self.row_group is None:
            return self.coef_rows
        summed = np.zeros((self.n_weights, self.coef_rows.shape[0]))
        np.add.at(summed, self.row_group, self.coef_rows.T)
        return summed.T


def _truncate(lam: np.ndarray) -> np.ndarray:
    lam = np.clip(lam, 0.0, None)
    if lam.size == 0 or lam[0] <= 0.0:
        return lam[:0]
    keep = lam > SPECTRUM_TRUNCATION * lam[0]
    return lam[keep]


def _value_from_eigs(lam: np.ndarray, setup: BayesSetup, n: int) -> float:
    alpha, s2 = setup.alpha, setup.sigma2_noise
    r = lam.size
    if setup.criterion == "A":
        return float(s2 * ((n - r) / alpha + np.sum(1.0 / (alpha + lam))))
    return float(np.sum(np.log(s2 / (alpha + lam))) + (n - r) * np.log(s2 / alpha))


def posterior_spectrum(lowrank: LowRankKernel, weights: DesignWeights, setup: BayesSetup) -> PosteriorSpectrum:
    """Spectrum of F_s^T W F_s via SVDs of the two thin factors."""
    engine = PosteriorEngine(lowrank, setup, weights.row_group)
    return engine.spectrum(weights.w)


def objective_value(spectrum: PosteriorSpectrum, setup: BayesSetup, n: int) -> float:
    """Design criterion from the posterior spectrum.

    A: sigma2 * ((n - r)/alpha + sum 1/(alpha + lam_i));
    D: sum log(sigma2/(alpha + lam_i)) + (n - r) log(sigma2/alpha).
    """
    return _value_from_eigs(spectrum.lam, setup, n)


def apply_posterior_inverse(spectrum: PosteriorSpectrum, setup: BayesSetup, v: np.ndarray) -> np.ndarray:
    """(F_s^T W F_s + alpha I)^(-1) v through the spectrum.

    Works columnwise for 2-D ``v``; costs O(n r) per column.
    """
    alpha = setup.alpha
    lam = spectrum.lam
    q = spectrum.q
    if lam.size == 0:
        return np.asarray(v, dtype=float) / alpha
    shrink = lam / (alpha + lam)
    qtv = q.T @ v
    return (v - q @ (shrink[:, None] * qtv if v.ndim == 2 else shrink * qtv)) / alpha


def interpolated_derivatives(
    lowrank: LowRankKernel,
    weights: DesignWeights,
    setup: BayesSetup,
    spectrum: PosteriorSpectrum | None = None,
) -> InterpolatedDerivatives:
    """Gradient and node-space Hessian of the surrogate objective.

    Per row i with coefficient vector c_i: the A-gradient is
    -sigma2 * c_i^T M2 c_i and the Hessian core is 2 sigma2 * M1 o M2
    (D: -c_i^T M1 c_i and M1 o M1); group entries sum their rows.
    Supplying the precomputed spectrum skips the inner SVD pass.
    """
    if spectrum is None:
        spectrum = posterior_spectrum(lowrank, weights, setup)
    ftil = lowrank.input_factor
    minv = apply_posterior_inverse(spectrum, setup, ftil)
    m1 = ftil.T @ minv
    m1 = 0.5 * (m1 + m1.T)
    m2 = minv.T @ minv
    m2 = 0.5 * (m2 + m2.T)
    coef_rows = lowrank.coef_out
    if setup.time_precision is not None:
        coef_rows = _whiten_rows(coef_rows, setup.time_precision, rows_axis=1)
    if setup.criterion == "A":
        per_row = -setup.sigma2_noise * np.sum(coef_rows * (m2 @ coef_rows), axis=0)
        htilde = 2.0 * setup.sigma2_noise * (m1 * m2)
    else:
        per_row = -np.sum(coef_rows * (m1 @ coef_rows), axis=0)
        htilde = m1 * m1
    row_group = weights.row_group
    gradient = group_reduce(per_row, row_group, weights.n_weights)
    if row_group is None:
        coef_weights = coef_rows
    else:
        summed = np.zeros((weights.n_weights, coef_rows.shape[0]))
        np.add.at(summed, row_group, coef_rows.T)
        coef_weights = summed.T
    return InterpolatedDerivatives(m1, m2, htilde, gradient, coef_weights)


def dense_objective_value(f_matrix: np.ndarray, weights: DesignWeights, setup: BayesSetup) -> float:
    """Exact criterion value from a dense kernel matrix."""
    f = np.asarray(f_matrix, dtype=float)
    if setup.time_precision is not None:
        f = _whiten_rows(f, setup.time_precision, rows_axis=0)
    v = np.clip(weights.row_weights(), 0.0, None)
    root = np.sqrt(v)[:, None] * f
    gram = root.T @ root
    lam = np.clip(np.linalg.eigvalsh(gram), 0.0, None)
    return _value_from_eigs(lam, setup, f.shape[1])


def dense_objective_and_derivatives(
    f_matrix: np.ndarray,
    weights: DesignWeights,
    setup: BayesSetup,
    oracle_cap: int = DEFAULT_ORACLE_CAP,
):
    """Exact value, gradient, and Hessian by dense factorization.

    Validation oracle: refuses matrices larger than ``oracle_cap`` in
    either dimension.  Per-row formulas (A-criterion)

        g_i = -sigma2 * || (F^T W F + alpha I)^(-1) f_i ||^2,
        H_ij = 2 sigma2 * (f_i^T (.)^(-1) f_j) (f_i^T (.)^(-2) f_j),

    with f_i the i-th row of F; the D-criterion uses
    g_i = -f_i^T (.)^(-1) f_i and H_ij = (f_i^T (.)^(-1) f_j)^2.
    Group entries sum their rows (and row pairs).
    """
    f = np.asarray(f_matrix, dtype=float)
    if max(f.shape) > oracle_cap:
        raise ValueError(f"oracle refuses matrices beyond {oracle_cap} rows/cols")
    if setup.time_precision is not None:
        f = _whiten_rows(f, setup.time_precision, rows_axis=0)
    v = np.clip(weights.row_weights(), 0.0, None)
    if v.size != f.shape[0]:
        raise ValueError("weights do not match the row count")
    m = f.shape[1]
    a = f.T @ (v[:, None] * f) + setup.alpha * np.eye(m)
    lam = np.clip(np.linalg.eigvalsh(a) - setup.alpha, 0.0, None)
    value = _value_from_eigs(lam, setup, m)
    s = np.linalg.solve(a, f.T)  # columns: (.)^(-1) f_i
    m1 = f @ s
    m1 = 0.5 * (m1 + m1.T)
    m2 = s.T @ s
    sigma2 = setup.sigma2_noise
    if setup.criterion == "A":
        g_rows = -sigma2 * np.diag(m2)
        h_rows = 2.0 * sigma2 * (m1 * m2)
    else:
        g_rows = -np.diag(m1)
        h_rows = m1 * m1
    gradient = group_reduce(g_rows, weights.row_group, weights.n_weights)
    hessian = group_reduce_matrix(h_rows, weights.row_group, weights.n_weights)
    return value, gradient, hessian


def group_reduce(values: np.ndarray, row_group: np.ndarray | None, n_groups: int | None = None) -> np.ndarray:
    """Sum per-row values into per-group entries.

    With ``row_group`` None this is the identity.  Group ids must form a
    partition of the rows (every id in [0, n_groups) used at least once).
    """
    values = np.asarray(values, dtype=float)
    if row_group is None:
        return values.copy()
    row_group = np.asarray(row_group, dtype=int)
    if n_groups is None:
        n_groups = int(row_group.max()) + 1
    _check_groups(row_group, n_groups)
    if row_group.size != values.size:
        raise ValueError("row_group does not match the value count")
    return np.bincount(row_group, weights=values, minlength=n_groups)


def group_reduce_matrix(matrix: np.ndarray, row_group: np.ndarray | None, n_groups: int | None = None) -> np.ndarray:
    """Sum a per-row-pair matrix into per-group blocks (both axes)."""
    matrix = np.asarray(matrix, dtype=float)
    if row_group is None:
        return matrix.copy()
    row_group = np.asarray(row_group, dtype=int)
    if n_groups is None:
        n_groups = int(row_group.max()) + 1
    _check_groups(row_group, n_groups)
    indicator = np.zeros((n_groups, row_group.size))
    indicator[row_group, np.arange(row_group.size)] = 1.0
    return indicator @ matrix @ indicator.T
