"""Linear regression under squared, pinball, and part-balancing errors.

The pinball (quantile) and part-balancing (biased-mean) fits are linear
programs.  Their row counts grow with the sample, so the fitters solve the
equivalent bounded-column dual, whose basis stays (d+1)-sized, and read the
coefficients off the row multipliers; optimality of the stated primal is
certified by recomputing the objective from the residuals and matching the
LP value.  The literal primal formulations with auxiliary part variables
are also provided: the sparse module embeds them in its MILP, and the test
suite cross-checks the two routes.

Identity used throughout for the biased-mean error with bias x:
max{E[Z_-] - x_+, E[Z_+] - x_-} = (E|Z| - |x|)/2 + |E[Z] + x|/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .functionals import BiasParam, _bias_of, _alpha_open
from .lp_core import LpError, LpProblem, solve_lp

OBJ_MATCH_TOL = 1e-8
ZERO_RESIDUAL_RTOL = 1e-11


@dataclass(frozen=True)
class Dataset:
    """Design matrix (one observation per row) and response vector."""

    design: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        design = np.asarray(self.design, dtype=float)
        response = np.asarray(self.response, dtype=float)
        if design.ndim != 2:
            raise ValueError("design must be 2-d (n x d)")
        if response.ndim != 1 or response.size != design.shape[0]:
            raise ValueError("response length must match design rows")
        if design.shape[0] < 1:
            raise ValueError("need at least one observation")
        if not (np.all(np.isfinite(design)) and np.all(np.isfinite(response))):
            raise ValueError("data must be finite")
        object.__setattr__(self, "design", design)
        object.__setattr__(self, "response", response)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def d(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class LinearModel:
    """Affine predictor f(x) = intercept + coefficients . x.

    ``equiv_alpha`` is set by the part-balancing fitters: the pinball level
    at which the same coefficients are exactly optimal (read off the fit's
    dual multipliers; always inside the induced residual-sign interval).
    """

    intercept: float
    coefficients: np.ndarray
    regularized: bool = False
    objective: float | None = None
    equiv_alpha: float | None = None

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        object.__setattr__(self, "coefficients", coeffs)
        if not (np.isfinite(self.intercept) and np.all(np.isfinite(coeffs))):
            raise ValueError("model parameters must be finite")

    def predict(self, design: np.ndarray) -> np.ndarray:
        design = np.asarray(design, dtype=float)
        return self.intercept + design @ self.coefficients


@dataclass(frozen=True)
class Residuals:
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))


@dataclass(frozen=True)
class NewsvendorSpec:
    """Unit buying cost and selling price; implies level 1 - gamma/delta."""

    gamma: float
    delta: float

    def __post_init__(self):
        if not (self.delta > self.gamma > 0.0):
            raise ValueError("prices must satisfy delta > gamma > 0")

    @property
    def alpha(self) -> float:
        return 1.0 - self.gamma / self.delta


def residuals(model: LinearModel, data: Dataset) -> Residuals:
    return Residuals(data.response - model.predict(data.design))


def kb_error(z: np.ndarray, alpha: float) -> float:
    """Normalized pinball loss E[(alpha/(1-alpha)) z_+ + z_-]."""
    a = alpha / (1.0 - alpha)
    return float(np.mean(a * np.maximum(z, 0.0) + np.maximum(-z, 0.0)))


def se_error(z: np.ndarray, x=0.0) -> float:
    """Part-balancing error max{E[z_-] - x_+, E[z_+] - x_-}."""
    b = _bias_of(x)
    return max(float(np.mean(np.maximum(-z, 0.0))) - b.x_plus,
               float(np.mean(np.maximum(z, 0.0))) - b.x_minus)


def mse_error(z: np.ndarray) -> float:
    return float(np.mean(z * z))


def induced_alpha(res: Residuals, zero_rtol: float = ZERO_RESIDUAL_RTOL):
    """[P(z < 0), P(z <= 0)] as exact empirical fractions.

    Residuals within ``zero_rtol * max(1, |z|_inf)`` of zero count as zero:
    LP vertices interpolate observations exactly in exact arithmetic but
    carry float dust in practice.
    """
    z = res.z
    atol = zero_rtol * max(1.0, float(np.max(np.abs(z), initial=0.0)))
    below = float(np.mean(z < -atol))
    at_or_below = float(np.mean(z <= atol))
    return below, at_or_below


# -- ordinary least squares -------------------------------------------------

def fit_ols(data: Dataset) -> LinearModel:
    """Least squares by normal equations; ridge fallback on rank deficiency.

    The fallback adds 1e-10 * trace(G)/dim to the Gram diagonal and flags
    the model as regularized instead of failing.
    """
    ones = np.ones((data.n, 1))
    full = np.hstack((ones, data.design))
    gram = full.T @ full
    rhs = full.T @ data.response
    regularized = False
    try:
        chol = np.linalg.cholesky(gram)
        beta = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    except np.linalg.LinAlgError:
        regularized = True
        bump = 1e-10 * np.trace(gram) / gram.shape[0]
        beta = np.linalg.solve(gram + bump * np.eye(gram.shape[0]), rhs)
    z = data.response - full @ beta
    return LinearModel(intercept=float(beta[0]), coefficients=beta[1:],
                       regularized=regularized, objective=float(np.mean(z * z)))


# -- compact dual LPs for the piecewise-linear fits ---------------------------

def _fit_by_dual(data: Dataset, lam_lo: float, lam_hi: float,
                 mean_bound: float | None, mean_rhs_shift: float = 0.0,
                 split_level: float = 0.5):
    """Solve the bounded-column dual of a residual-splitting LP.

    Variables are one multiplier per observation in [lam_lo, lam_hi], plus a
    mean-row multiplier in [-mean_bound, mean_bound] when requested.  Rows
    force the multipliers orthogonal to the intercept and design columns;
    the row duals are the negated fit coefficients.

    A crash start assigns each multiplier to the bound its residual sign
    would dictate at an OLS fit split at ``split_level``; that leaves only a
    small imbalance for phase 1 and keeps iteration counts near the number
    of misclassified observations rather than n.
    """
    n, d = data.n, data.d
    with_mean = mean_bound is not None
    num = n + (1 if with_mean else 0)
    problem = LpProblem(num)
    obj = np.empty(num)
    obj[:n] = -data.response
    for i in range(n):
        problem.set_bounds(i, lam_lo, lam_hi)
    xbar = data.design.mean(axis=0) if d else np.zeros(0)
    ybar = float(data.response.mean())
    if with_mean:
        obj[n] = -(ybar + mean_rhs_shift)
        problem.set_bounds(n, -mean_bound, mean_bound)
    problem.set_objective(obj)

    row = np.ones(num) if with_mean else np.ones(n)
    problem.add_row(row.copy(), "=", 0.0)
    for j in range(d):
        col = np.empty(num)
        col[:n] = data.design[:, j]
        if with_mean:
            col[n] = xbar[j]
        problem.add_row(col, "=", 0.0)

    warm = _crash_basis(data, num, d + 1, with_mean, split_level, mean_rhs_shift)
    sol = solve_lp(problem, warm=warm, max_iterations=60_000 + 30 * n)
    if sol.status != "optimal":
        raise LpError(f"regression LP ended with status {sol.status}")
    c0 = -float(sol.duals[0])
    coeffs = -sol.duals[1:1 + d].copy()
    nu = float(sol.x[n]) if with_mean else None
    return c0, coeffs, -float(sol.objective), sol, nu


def _crash_basis(data: Dataset, num_vars: int, num_rows: int,
                 with_mean: bool, split_level: float, mean_rhs_shift: float):
    """Slack basis plus residual-sign bound statuses for the dual multipliers."""
    from .lp_core.simplex import AT_LOWER, AT_UPPER, BASIC

    z = residuals(fit_ols(data), data).z
    if with_mean:
        threshold = float(np.mean(z)) + mean_rhs_shift
    else:
        threshold = float(np.quantile(z, split_level))
    vstate = np.full(num_vars + num_rows, AT_LOWER, dtype=np.int8)
    vstate[:data.n][z > threshold] = AT_UPPER
    basis = np.arange(num_vars, num_vars + num_rows, dtype=np.intp)
    if with_mean:
        # The mean-row multiplier absorbs the sign imbalance in one step if
        # it starts basic in place of the first row's slack.
        basis = basis.copy()
        basis[0] = num_vars - 1
    vstate[basis] = BASIC
    return basis, vstate


def fit_quantile(data: Dataset, alpha) -> LinearModel:
    """Pinball-loss fit at an interior level.

    The split-residual LP minimizes (1/n) sum[(alpha/(1-alpha)) z_+ + z_-];
    its dual has multipliers in [-1/n, alpha/((1-alpha) n)] orthogonal to
    the design, and is what actually gets solved.
    """
    a = _alpha_open(alpha)
    ratio = a / (1.0 - a)
    c0, coeffs, lp_value, _, _ = _fit_by_dual(data, -1.0 / data.n, ratio / data.n, None,
                                              split_level=a)
    z = data.response - c0 - data.design @ coeffs
    obj = kb_error(z, a)
    if abs(obj - lp_value) > OBJ_MATCH_TOL * max(1.0, abs(lp_value)):
        raise LpError(f"pinball objective {obj} disagrees with LP optimum {lp_value}")
    return LinearModel(intercept=c0, coefficients=coeffs, objective=obj)


def fit_biased_mean(data: Dataset, x, formulation: str = "compact") -> LinearModel:
    """Part-balancing fit: minimize max{E[z_-] - x_+, E[z_+] - x_-}.

    ``compact`` solves the bounded dual of the equivalent problem
    min 0.5*E|z| + 0.5*|mean(z) + x| - |x|/2; ``aux`` solves the literal
    epigraph LP with per-observation part variables.  Either way the
    intercept is recentred so the residual mean equals -x exactly: for any
    slope vector the optimal intercept slice contains that point, so the
    shift never degrades the objective.
    """
    b = _bias_of(x)
    equiv_alpha = None
    if formulation == "compact":
        half_n = 0.5 / data.n
        c0, coeffs, lp_value, _, nu = _fit_by_dual(data, -half_n, half_n, 0.5, b.x)
        lp_value -= 0.5 * abs(b.x)
        equiv_alpha = min(max(0.5 + nu, 0.0), 1.0)
    elif formulation == "aux":
        c0, coeffs, lp_value = _solve_bmr_aux(data, b)
    else:
        raise ValueError(f"unknown formulation {formulation!r}")
    z = data.response - c0 - data.design @ coeffs
    c0 += float(np.mean(z)) + b.x
    z = data.response - c0 - data.design @ coeffs
    obj = se_error(z, b)
    if abs(obj - lp_value) > OBJ_MATCH_TOL * max(1.0, abs(lp_value)):
        raise LpError(f"part-balancing objective {obj} disagrees with LP optimum {lp_value}")
    mean_gap = abs(float(np.mean(z)) + b.x)
    if mean_gap > 1e-7:
        raise LpError(f"residual mean misses -x by {mean_gap}")
    return LinearModel(intercept=c0, coefficients=coeffs, objective=obj,
                       equiv_alpha=equiv_alpha)


def fit_se(data: Dataset) -> LinearModel:
    """Zero-bias part-balancing fit, the LP counterpart of least squares.

    Identical to ``fit_biased_mean`` at x = 0; residuals average to zero and
    the optimal value equals half the mean absolute residual.
    """
    return fit_biased_mean(data, 0.0)


# -- literal primal formulations ---------------------------------------------

def se_lp_problem(data: Dataset):
    """Epigraph LP for the zero-bias fit with one part variable per row.

    Variables [c0, c(1..d), t, u(1..n)]: minimize t subject to
    t >= mean(u), t >= mean(u) - mean(z), u >= 0, u_i >= z_i.
    Returns (problem, index map).
    """
    n, d = data.n, data.d
    num = d + 2 + n
    idx_c0, idx_c, idx_t = 0, np.arange(1, d + 1), d + 1
    idx_u = np.arange(d + 2, d + 2 + n)
    problem = LpProblem(num)
    obj = np.zeros(num)
    obj[idx_t] = 1.0
    problem.set_objective(obj)
    for i in range(n):
        problem.set_bounds(idx_u[i], 0.0, None)

    inv_n = 1.0 / n
    row = np.zeros(num)
    row[idx_t] = 1.0
    row[idx_u] = -inv_n
    problem.add_row(row.copy(), ">=", 0.0)
    # t - mean(u) + mean(z) >= 0 with mean(z) = ybar - c0 - c . xbar
    row[idx_c0] = -1.0
    if d:
        row[idx_c] = -data.design.mean(axis=0)
    problem.add_row(row, ">=", -float(data.response.mean()))
    for i in range(n):
        r = np.zeros(num)
        r[idx_u[i]] = 1.0
        r[idx_c0] = 1.0
        if d:
            r[idx_c] = data.design[i]
        problem.add_row(r, ">=", float(data.response[i]))
    index = {"c0": idx_c0, "c": idx_c, "t": idx_t, "u": idx_u}
    return problem, index


def bmr_aux_lp_problem(data: Dataset, x):
    """Epigraph LP for the biased fit with split part variables p, q.

    Variables [c0, c, t, p(1..n), q(1..n)]: minimize t subject to
    t >= mean(q) - x_+, t >= mean(p) - x_-, p_i >= z_i, q_i >= -z_i,
    p, q >= 0.
    """
    b = _bias_of(x)
    n, d = data.n, data.d
    num = d + 2 + 2 * n
    idx_c0, idx_c, idx_t = 0, np.arange(1, d + 1), d + 1
    idx_p = np.arange(d + 2, d + 2 + n)
    idx_q = np.arange(d + 2 + n, num)
    problem = LpProblem(num)
    obj = np.zeros(num)
    obj[idx_t] = 1.0
    problem.set_objective(obj)
    for i in range(n):
        problem.set_bounds(idx_p[i], 0.0, None)
        problem.set_bounds(idx_q[i], 0.0, None)

    inv_n = 1.0 / n
    row = np.zeros(num)
    row[idx_t] = 1.0
    row[idx_q] = -inv_n
    problem.add_row(row, ">=", -b.x_plus)
    row = np.zeros(num)
    row[idx_t] = 1.0
    row[idx_p] = -inv_n
    problem.add_row(row, ">=", -b.x_minus)
    for i in range(n):
        r = np.zeros(num)
        r[idx_p[i]] = 1.0
        r[idx_c0] = 1.0
        if d:
            r[idx_c] = data.design[i]
        problem.add_row(r, ">=", float(data.response[i]))
        r = np.zeros(num)
        r[idx_q[i]] = 1.0
        r[idx_c0] = -1.0
        if d:
            r[idx_c] = -data.design[i]
        problem.add_row(r, ">=", -float(data.response[i]))
    index = {"c0": idx_c0, "c": idx_c, "t": idx_t, "p": idx_p, "q": idx_q}
    return problem, index


def _solve_bmr_aux(data: Dataset, b: BiasParam):
    problem, index = bmr_aux_lp_problem(data, b)
    sol = solve_lp(problem)
    if sol.status != "optimal":
        raise LpError(f"regression LP ended with status {sol.status}")
    p = sol.x[index["p"]]
    q = sol.x[index["q"]]
    worst = float(np.max(p * q, initial=0.0))
    if worst > 1e-8:
        raise LpError(f"part variables overlap: max p*q = {worst}")
    c0 = float(sol.x[index["c0"]])
    coeffs = sol.x[index["c"]].copy()
    return c0, coeffs, float(sol.objective)


# -- applications -------------------------------------------------------------

def newsvendor_policy(data: Dataset, spec: NewsvendorSpec):
    """Order policy minimizing expected underage/overage cost.

    The loss-minimizing policy is the pinball fit at level 1 - gamma/delta.
    """
    alpha = spec.alpha
    model = fit_quantile(data, alpha)
    return model, alpha


def newsvendor_price(data: Dataset, x, gamma: float):
    """Selling price consistent with a demand-unit target above the mean.

    Fits the part-balancing regression at bias x, takes the upper end of the
    induced level interval (the cdf of the residuals at zero), and prices at
    delta = gamma / (1 - alpha*).
    """
    if gamma <= 0.0:
        raise ValueError("gamma must be positive")
    model = fit_biased_mean(data, x)
    _, alpha_star = induced_alpha(residuals(model, data))
    if alpha_star >= 1.0:
        raise ValueError("induced level is 1; price undefined")
    delta = gamma / (1.0 - alpha_star)
    return model, alpha_star, delta
