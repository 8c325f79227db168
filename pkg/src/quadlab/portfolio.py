"""Scenario portfolio optimization under tail-deviation objectives.

Losses follow the convention X_i = -w . r_i, with a budget row sum(w) = 1
and a target-mean row E[-X] = mu.  Both objectives (part-balancing
deviation at bias x, and the alpha-tail-average deviation) are linear
programs whose natural formulation carries one row per scenario; the
module instead solves the bounded-column dual, whose basis stays
(assets+1)-sized, recovers the weights from the row multipliers, and then
re-evaluates the deviation exactly on the induced loss sample as a check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import EmpiricalSample, make_sample
from .functionals import _alpha_open, _bias_of, cvar, pos_part_mean, probability_interval_at, var
from .lp_core import LpError, LpProblem, solve_lp

DEV_MATCH_TOL = 1e-8
BUDGET_TOL = 1e-8
MEAN_TOL = 1e-7
THRESHOLD_RTOL = 1e-9


class InfeasibleTarget(LpError):
    """The target mean return cannot be met on the budget simplex."""


@dataclass(frozen=True)
class PortfolioProblem:
    """Scenario return matrix (n x m), target mean, and sign policy."""

    returns: np.ndarray
    target_mean: float
    long_only: bool = False

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        object.__setattr__(self, "returns", r)
        if r.ndim != 2 or r.shape[0] < 1 or r.shape[1] < 2:
            raise ValueError("returns must be n x m with m >= 2")
        if not np.all(np.isfinite(r)):
            raise ValueError("returns must be finite")
        if not np.isfinite(self.target_mean):
            raise ValueError("target mean must be finite")

    @property
    def n(self) -> int:
        return self.returns.shape[0]

    @property
    def m(self) -> int:
        return self.returns.shape[1]


@dataclass(frozen=True)
class PortfolioSolution:
    weights: np.ndarray
    losses: EmpiricalSample
    deviation: float
    alpha_interval: tuple[float, float]


def _loss_sample(returns: np.ndarray, weights: np.ndarray) -> EmpiricalSample:
    return make_sample(-(returns @ weights))


def _validate(problem: PortfolioProblem, weights: np.ndarray, losses: EmpiricalSample):
    if abs(weights.sum() - 1.0) > BUDGET_TOL:
        raise LpError(f"budget violated: sum(w) = {weights.sum()}")
    if abs(-losses.mean() - problem.target_mean) > MEAN_TOL:
        raise LpError(f"target mean missed: {-losses.mean()} vs {problem.target_mean}")
    if problem.long_only and np.min(weights) < -BUDGET_TOL:
        raise LpError("long-only violated")


def se_deviation_of(losses: EmpiricalSample, x) -> float:
    """Part-balancing deviation E[X - E[X] - x]_+ - x_- of a loss sample."""
    b = _bias_of(x)
    return pos_part_mean(losses, losses.mean() + b.x) - b.x_minus


def cvar_deviation_of(losses: EmpiricalSample, alpha) -> float:
    """Tail-average deviation CVaR_alpha(X) - E[X] of a loss sample."""
    return cvar(losses, alpha) - losses.mean()


def _tail_crash(problem: PortfolioProblem, threshold_fn, num_vars: int, num_rows: int):
    """Bound statuses from the equal-weight portfolio's tail scenarios."""
    from .lp_core.simplex import AT_LOWER, BASIC, FREE_ZERO, AT_UPPER

    x0 = -problem.returns.mean(axis=1)
    vstate = np.full(num_vars + num_rows, AT_LOWER, dtype=np.int8)
    vstate[:problem.n][x0 > threshold_fn(x0)] = AT_UPPER
    vstate[problem.n:num_vars] = FREE_ZERO
    basis = np.arange(num_vars, num_vars + num_rows, dtype=np.intp)
    vstate[basis] = BASIC
    return basis, vstate


def optimize_se_dev(problem: PortfolioProblem, x, warm=None):
    """Minimize the part-balancing deviation of the loss at bias x.

    Dual variables are one multiplier per scenario in [0, 1/n] constrained
    orthogonal (against centered returns) to each asset column; weights come
    off the asset-row multipliers.  ``warm`` chains a basis from a nearby
    solve (the sweep uses it); the extended solution for such chaining is
    available through ``optimize_se_dev_raw``.
    """
    sol, _ = optimize_se_dev_raw(problem, x, warm)
    return sol


def optimize_se_dev_raw(problem: PortfolioProblem, x, warm=None):
    b = _bias_of(x)
    r = problem.returns
    n, m = problem.n, problem.m
    rbar = r.mean(axis=0)
    centered = r - rbar

    lp = LpProblem(n + 2)
    obj = np.zeros(n + 2)
    obj[:n] = b.x
    obj[n] = -1.0          # budget-row multiplier
    obj[n + 1] = -problem.target_mean
    lp.set_objective(obj)
    for i in range(n):
        lp.set_bounds(i, 0.0, 1.0 / n)
    relation = "<=" if problem.long_only else "="
    for j in range(m):
        col = np.empty(n + 2)
        col[:n] = centered[:, j]
        col[n] = 1.0
        col[n + 1] = rbar[j]
        lp.add_row(col, relation, 0.0)
    if warm is None:
        warm = _tail_crash(problem, lambda x0: x0.mean() + b.x, n + 2, m)
    sol = solve_lp(lp, warm=warm, dual_tol=1e-12)
    if sol.status == "unbounded":
        raise InfeasibleTarget(f"target mean {problem.target_mean} unattainable")
    if sol.status != "optimal":
        raise LpError(f"portfolio LP ended with status {sol.status}")

    weights = -sol.duals[:m]
    losses = _loss_sample(r, weights)
    _validate(problem, weights, losses)
    deviation = se_deviation_of(losses, b)
    lp_value = -float(sol.objective) - b.x_minus
    if abs(deviation - lp_value) > DEV_MATCH_TOL * max(1.0, abs(lp_value)):
        raise LpError(f"deviation {deviation} disagrees with LP optimum {lp_value}")
    interval = map_x_to_alpha(losses, b)
    return PortfolioSolution(weights=weights, losses=losses,
                             deviation=deviation, alpha_interval=interval), sol


def optimize_cvar_dev(problem: PortfolioProblem, alpha, warm=None):
    """Minimize the tail-average deviation of the loss at level alpha.

    Same dual pattern with multipliers in [0, 1/((1-alpha) n)] summing to 1;
    an extra free multiplier pins the tail threshold row.
    """
    sol, _ = optimize_cvar_dev_raw(problem, alpha, warm)
    return sol


def optimize_cvar_dev_raw(problem: PortfolioProblem, alpha, warm=None):
    a = _alpha_open(alpha)
    r = problem.returns
    n, m = problem.n, problem.m
    rbar = r.mean(axis=0)
    kappa = 1.0 / (1.0 - a)

    lp = LpProblem(n + 2)
    obj = np.zeros(n + 2)
    obj[n] = -1.0
    obj[n + 1] = -problem.target_mean
    lp.set_objective(obj)
    for i in range(n):
        lp.set_bounds(i, 0.0, kappa / n)
    # threshold row: multipliers sum to one
    row = np.zeros(n + 2)
    row[:n] = 1.0
    lp.add_row(row, "=", 1.0)
    relation = "<=" if problem.long_only else "="
    for j in range(m):
        col = np.empty(n + 2)
        col[:n] = r[:, j]
        col[n] = 1.0
        col[n + 1] = rbar[j]
        lp.add_row(col, relation, float(rbar[j]))
    if warm is None:
        warm = _tail_crash(problem, lambda x0: np.quantile(x0, a), n + 2, m + 1)
    sol = solve_lp(lp, warm=warm, dual_tol=1e-12)
    if sol.status == "unbounded":
        raise InfeasibleTarget(f"target mean {problem.target_mean} unattainable")
    if sol.status != "optimal":
        raise LpError(f"portfolio LP ended with status {sol.status}")

    weights = -sol.duals[1:1 + m]
    losses = _loss_sample(r, weights)
    _validate(problem, weights, losses)
    deviation = cvar_deviation_of(losses, a)
    lp_value = -float(sol.objective)
    if abs(deviation - lp_value) > DEV_MATCH_TOL * max(1.0, abs(lp_value)):
        raise LpError(f"deviation {deviation} disagrees with LP optimum {lp_value}")
    # CDF jump interval at the loss quantile; it brackets alpha.
    quantile = var(losses, a).lower
    scale = max(1.0, float(np.max(np.abs(losses.atoms))))
    interval = probability_interval_at(losses, quantile, atol=THRESHOLD_RTOL * scale)
    return PortfolioSolution(weights=weights, losses=losses,
                             deviation=deviation, alpha_interval=interval), sol


def map_x_to_alpha(losses: EmpiricalSample, x) -> tuple[float, float]:
    """[P(X < x + E[X]), P(X <= x + E[X])] on the optimal loss sample.

    Atoms within a relative float-dust band of the threshold count as equal,
    which keeps solver-active scenarios inside the interval.
    """
    b = _bias_of(x)
    threshold = b.x + losses.mean()
    scale = max(1.0, float(np.max(np.abs(losses.atoms))))
    return probability_interval_at(losses, threshold, atol=THRESHOLD_RTOL * scale)


def equivalence_sweep(returns, target_mean: float, x_grid, long_only: bool = False):
    """Cross-evaluate the two deviation objectives along a bias grid.

    For each x: solve the part-balancing problem, map the solution to a tail
    level alpha (upper end of the induced interval), solve the tail-average
    problem there, and evaluate each objective at the other optimum.  Solver
    failures are recorded per point and the sweep continues.
    """
    x_grid = list(x_grid)
    if not x_grid:
        raise ValueError("x grid must be nonempty")
    problem = PortfolioProblem(np.asarray(returns, dtype=float), target_mean, long_only)
    rows = []
    warm_se = warm_cvar = None
    for x in x_grid:
        row = {"x": float(x), "alpha": np.nan,
               "se_dev_opt": np.nan, "cvar_dev_at_se_opt": np.nan,
               "cvar_dev_opt": np.nan, "se_dev_at_cvar_opt": np.nan,
               "error": ""}
        try:
            se_sol, se_lp = optimize_se_dev_raw(problem, x, warm_se)
            warm_se = (se_lp.basis, se_lp.vstate)
            alpha = se_sol.alpha_interval[1]
            row["se_dev_opt"] = se_sol.deviation
            row["alpha"] = alpha
            row["cvar_dev_at_se_opt"] = cvar_deviation_of(se_sol.losses, alpha)
            cvar_sol, cvar_lp = optimize_cvar_dev_raw(problem, alpha, warm_cvar)
            warm_cvar = (cvar_lp.basis, cvar_lp.vstate)
            row["cvar_dev_opt"] = cvar_sol.deviation
            row["se_dev_at_cvar_opt"] = se_deviation_of(cvar_sol.losses, x)
        except (LpError, ValueError) as exc:
            row["error"] = str(exc)
        rows.append(row)
    return rows


# -- direct scenario-row formulations, used as test oracles -------------------

def se_dev_primal_lp(problem: PortfolioProblem, x):
    """One-row-per-scenario LP for the part-balancing objective."""
    b = _bias_of(x)
    r = problem.returns
    n, m = problem.n, problem.m
    centered = r - r.mean(axis=0)
    lp = LpProblem(m + n)
    obj = np.zeros(m + n)
    obj[m:] = 1.0 / n
    lp.set_objective(obj)
    for i in range(n):
        lp.set_bounds(m + i, 0.0, None)
    if problem.long_only:
        for j in range(m):
            lp.set_bounds(j, 0.0, None)
    for i in range(n):
        row = np.zeros(m + n)
        row[:m] = centered[i]
        row[m + i] = 1.0
        lp.add_row(row, ">=", -b.x)
    budget = np.zeros(m + n)
    budget[:m] = 1.0
    lp.add_row(budget, "=", 1.0)
    mean_row = np.zeros(m + n)
    mean_row[:m] = r.mean(axis=0)
    lp.add_row(mean_row, "=", problem.target_mean)
    return lp


def cvar_dev_primal_lp(problem: PortfolioProblem, alpha):
    """One-row-per-scenario LP for the tail-average objective."""
    a = _alpha_open(alpha)
    r = problem.returns
    n, m = problem.n, problem.m
    kappa = 1.0 / (1.0 - a)
    # variables: w(m), zeta, v(n)
    lp = LpProblem(m + 1 + n)
    obj = np.zeros(m + 1 + n)
    obj[:m] = r.mean(axis=0)
    obj[m] = 1.0
    obj[m + 1:] = kappa / n
    lp.set_objective(obj)
    for i in range(n):
        lp.set_bounds(m + 1 + i, 0.0, None)
    if problem.long_only:
        for j in range(m):
            lp.set_bounds(j, 0.0, None)
    for i in range(n):
        row = np.zeros(m + 1 + n)
        row[:m] = r[i]
        row[m] = 1.0
        row[m + 1 + i] = 1.0
        lp.add_row(row, ">=", 0.0)
    budget = np.zeros(m + 1 + n)
    budget[:m] = 1.0
    lp.add_row(budget, "=", 1.0)
    mean_row = np.zeros(m + 1 + n)
    mean_row[:m] = r.mean(axis=0)
    lp.add_row(mean_row, "=", problem.target_mean)
    return lp
