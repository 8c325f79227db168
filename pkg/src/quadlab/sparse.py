"""Cardinality-constrained (best-subset) regression.

Two exact solvers and one oracle:

* part-balancing error: big-M mixed-binary LP handed to the branch-and-bound
  layer, with automatic big-M escalation when a coefficient presses against
  the box;
* squared error: a bespoke include/exclude branch and bound whose node bound
  is the least-squares objective with the excluded set forced to zero (valid
  because adding exclusions can only raise the minimum), seeded by greedy
  forward selection;
* ``brute_force_subset``: exhaustive enumeration of all size-k supports,
  guarded to a million combinations.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .lp_core import LpError, solve_mip
from .regression import Dataset, LinearModel, fit_ols, fit_se, se_lp_problem

BRUTE_FORCE_GUARD = 10 ** 6
ZERO_COEFF_TOL = 1e-8


@dataclass(frozen=True)
class SparseProblem:
    """Best-subset instance: data, cardinality bound, error kind, budgets.

    ``big_m`` of None requests the automatic bound 2*max(1, |c_ols|_inf).
    ``max_nodes`` is the deterministic search budget; the wall-clock limit
    stays as a backstop (timing-dependent results are possible once it
    binds).
    """

    data: Dataset
    k: int
    error_kind: str = "se"
    big_m: float | None = None
    time_limit_s: float = 300.0
    gap_tol: float = 1e-9
    max_nodes: int | None = None

    def __post_init__(self):
        if self.error_kind not in ("mse", "se"):
            raise ValueError("error kind must be 'mse' or 'se'")
        if not 1 <= self.k <= self.data.d:
            raise ValueError("cardinality bound must satisfy 1 <= k <= d")
        if self.big_m is not None and self.big_m <= 0:
            raise ValueError("big-M must be positive when given")


@dataclass(frozen=True)
class SparseSolution:
    model: LinearModel
    support: tuple[int, ...]
    objective: float
    bound: float
    gap: float
    status: str
    nodes: int = 0
    time_s: float = 0.0
    big_m_active: bool = False

    def __post_init__(self):
        if len(self.support) == 0 and np.any(self.model.coefficients != 0.0):
            raise ValueError("support empty but coefficients nonzero")


@dataclass(frozen=True)
class RecoveryReport:
    accuracy: float
    k_star: int


def support_accuracy(estimated: LinearModel, true_coeffs, k_star: int,
                     zero_tol: float = ZERO_COEFF_TOL) -> RecoveryReport:
    """Fraction of the true support carrying a nonzero estimated coefficient."""
    if k_star < 1:
        raise ValueError("k_star must be >= 1")
    true_coeffs = np.asarray(true_coeffs, dtype=float)
    est = np.asarray(estimated.coefficients, dtype=float)
    hits = int(np.sum((np.abs(est) > zero_tol) & (true_coeffs != 0.0)))
    return RecoveryReport(accuracy=hits / k_star, k_star=k_star)


def _sparse_model(data: Dataset, support, error_kind: str):
    """Refit on a fixed support and inflate coefficients back to full width."""
    support = tuple(sorted(int(j) for j in support))
    sub = Dataset(data.design[:, support] if support else np.zeros((data.n, 0)),
                  data.response)
    fitted = fit_ols(sub) if error_kind == "mse" else fit_se(sub)
    coeffs = np.zeros(data.d)
    for pos, j in enumerate(support):
        coeffs[j] = fitted.coefficients[pos]
    model = LinearModel(intercept=fitted.intercept, coefficients=coeffs,
                        objective=fitted.objective)
    realized = tuple(j for j in support if abs(coeffs[j]) > ZERO_COEFF_TOL)
    return model, realized, float(fitted.objective)


def brute_force_subset(data: Dataset, k: int, error_kind: str) -> SparseSolution:
    """Exhaustive best subset of size k; the oracle for the exact solvers.

    Size-k enumeration suffices under minimization because enlarging a
    support never increases the restricted optimum.
    """
    if error_kind not in ("mse", "se"):
        raise ValueError("error kind must be 'mse' or 'se'")
    if not 1 <= k <= data.d:
        raise ValueError("cardinality bound must satisfy 1 <= k <= d")
    count = math.comb(data.d, k)
    if count > BRUTE_FORCE_GUARD:
        raise ValueError(f"C(d, k) = {count} exceeds the enumeration guard")
    start = time.perf_counter()
    if error_kind == "mse":
        best_support, best_obj = _brute_force_mse(data, k)
    else:
        best_support, best_obj = None, np.inf
        for combo in itertools.combinations(range(data.d), k):
            _, _, obj = _sparse_model(data, combo, "se")
            if obj < best_obj - 1e-15:
                best_support, best_obj = combo, obj
    model, support, objective = _sparse_model(data, best_support, error_kind)
    return SparseSolution(model=model, support=support, objective=objective,
                          bound=objective, gap=0.0, status="optimal",
                          nodes=count, time_s=time.perf_counter() - start)


class _GramSolver:
    """Least-squares objectives on arbitrary supports from one Gram matrix."""

    def __init__(self, data: Dataset):
        full = np.hstack((np.ones((data.n, 1)), data.design))
        self.gram = full.T @ full
        self.rhs = full.T @ data.response
        self.yty = float(data.response @ data.response)
        self.n = data.n

    def objective(self, support) -> float:
        idx = np.concatenate(([0], np.asarray(support, dtype=np.intp) + 1))
        g = self.gram[np.ix_(idx, idx)]
        h = self.rhs[idx]
        try:
            beta = np.linalg.solve(g, h)
        except np.linalg.LinAlgError:
            bump = 1e-10 * np.trace(g) / g.shape[0]
            beta = np.linalg.solve(g + bump * np.eye(g.shape[0]), h)
        return float((self.yty - beta @ h - beta @ (g @ beta - h)) / self.n)

    def coefficients(self, support):
        idx = np.concatenate(([0], np.asarray(support, dtype=np.intp) + 1))
        g = self.gram[np.ix_(idx, idx)]
        h = self.rhs[idx]
        try:
            beta = np.linalg.solve(g, h)
        except np.linalg.LinAlgError:
            bump = 1e-10 * np.trace(g) / g.shape[0]
            beta = np.linalg.solve(g + bump * np.eye(g.shape[0]), h)
        return beta


def _brute_force_mse(data: Dataset, k: int):
    solver = _GramSolver(data)
    best_support, best_obj = None, np.inf
    for combo in itertools.combinations(range(data.d), k):
        obj = solver.objective(combo)
        if obj < best_obj - 1e-15:
            best_support, best_obj = combo, obj
    return best_support, best_obj


def _greedy_forward(data: Dataset, k: int, error_kind: str):
    """Forward selection: k steps, each adding the largest improvement."""
    chosen: list[int] = []
    remaining = list(range(data.d))
    solver = _GramSolver(data) if error_kind == "mse" else None
    while len(chosen) < k and remaining:
        best_j, best_obj = None, np.inf
        for j in remaining:
            trial = chosen + [j]
            if solver is not None:
                obj = solver.objective(trial)
            else:
                _, _, obj = _sparse_model(data, trial, "se")
            if obj < best_obj - 1e-15:
                best_j, best_obj = j, obj
        chosen.append(best_j)
        remaining.remove(best_j)
    return tuple(sorted(chosen))


def fit_sparse_se(problem: SparseProblem) -> SparseSolution:
    """Best subset under the part-balancing error via a big-M binary LP.

    The epigraph LP gains one indicator per coefficient with the linking
    rows -M z_j <= c_j <= M z_j and a cardinality row.  If an incumbent
    coefficient reaches 0.99*M the box was binding: M doubles and the solve
    repeats, at most three times.
    """
    if problem.error_kind != "se":
        raise ValueError("fit_sparse_se expects error kind 'se'")
    data, k = problem.data, problem.k
    start = time.perf_counter()
    if problem.big_m is not None:
        big_m = float(problem.big_m)
    else:
        ols = fit_ols(data)
        big_m = 2.0 * max(1.0, float(np.max(np.abs(ols.coefficients), initial=0.0)))
    hint_support = _greedy_forward(data, k, "se")
    hint = np.zeros(data.d)
    for j in hint_support:
        hint[j] = 1.0

    escalations = 0
    while True:
        mip = _solve_se_milp(problem, big_m, hint)
        if mip.status == "infeasible":
            raise LpError("sparse relaxation reported infeasible")
        coeffs = mip.x[1:1 + data.d]
        if float(np.max(np.abs(coeffs), initial=0.0)) < 0.99 * big_m:
            break
        escalations += 1
        if escalations > 3:
            raise LpError(f"big-M escalation exhausted at M = {big_m}")
        big_m *= 2.0

    z = mip.x[-data.d:]
    support = tuple(j for j in range(data.d)
                    if z[j] > 0.5 and abs(coeffs[j]) > ZERO_COEFF_TOL)
    model, support, objective = _sparse_model(data, support, "se")
    bound = min(mip.bound, objective)
    gap = abs(objective - bound) / max(1.0, abs(objective))
    return SparseSolution(model=model, support=support, objective=objective,
                          bound=bound, gap=gap, status=mip.status,
                          nodes=mip.nodes, time_s=time.perf_counter() - start,
                          big_m_active=escalations > 0)


def _solve_se_milp(problem: SparseProblem, big_m: float, hint):
    data, k = problem.data, problem.k
    lp, index = se_lp_problem(data)
    base = lp.num_vars
    d = data.d
    # append one indicator per coefficient
    grown = type(lp)(base + d)
    grown.objective[:base] = lp.objective
    grown.lower[:base] = lp.lower
    grown.upper[:base] = lp.upper
    grown.row_index = lp.row_index
    grown.row_value = lp.row_value
    grown.relations = lp.relations
    grown.rhs = lp.rhs
    for j in range(d):
        grown.mark_binary(base + j)
        grown.add_row({int(index["c"][j]): 1.0, base + j: -big_m}, "<=", 0.0)
        grown.add_row({int(index["c"][j]): -1.0, base + j: -big_m}, "<=", 0.0)
    grown.add_row({base + j: 1.0 for j in range(d)}, "<=", float(k))
    full_hint = np.zeros(d)
    full_hint[:] = hint
    return solve_mip(grown, time_limit_s=problem.time_limit_s,
                     gap_tol=problem.gap_tol, max_nodes=problem.max_nodes,
                     incumbent_hint=full_hint)


def fit_sparse_mse(problem: SparseProblem) -> SparseSolution:
    """Best subset under squared error by include/exclude branch and bound.

    A node fixes some variables in and some out; its bound is the
    least-squares objective over in-plus-free, which exclusions can only
    raise.  Branching picks the free variable with the largest coefficient
    in the node's relaxed fit.
    """
    if problem.error_kind != "mse":
        raise ValueError("fit_sparse_mse expects error kind 'mse'")
    data, k = problem.data, problem.k
    start = time.perf_counter()
    solver = _GramSolver(data)
    incumbent_support = _greedy_forward(data, k, "mse")
    incumbent_obj = solver.objective(incumbent_support)

    counter = 0
    root_candidates = tuple(range(data.d))
    root_bound = solver.objective(root_candidates)
    heap = [(root_bound, 0, (), root_candidates)]
    nodes = 0
    best_bound = root_bound
    status = None
    while heap:
        lb = min(heap[0][0], incumbent_obj)
        best_bound = max(best_bound, lb)
        if abs(incumbent_obj - best_bound) / max(1.0, abs(incumbent_obj)) <= problem.gap_tol:
            status = "optimal"
            break
        if problem.max_nodes is not None and nodes >= problem.max_nodes:
            status = "feasible"
            break
        if time.perf_counter() - start > problem.time_limit_s:
            status = "time_limit"
            break
        bound, _, included, free = heapq.heappop(heap)
        if bound >= incumbent_obj - 1e-12:
            continue
        nodes += 1
        if len(included) == k or len(included) + len(free) <= k:
            leaf = tuple(sorted(included if len(included) == k else included + free))
            obj = solver.objective(leaf)
            if obj < incumbent_obj - 1e-15:
                incumbent_support, incumbent_obj = leaf, obj
            continue
        beta = solver.coefficients(included + free)
        free_betas = beta[1 + len(included):]
        branch_pos = int(np.argmax(np.abs(free_betas)))
        j = free[branch_pos]
        rest = free[:branch_pos] + free[branch_pos + 1:]
        for child_in, child_free in (((*included, j), rest), (included, rest)):
            if len(child_in) + len(child_free) < k:
                continue
            if len(child_in) == k:
                obj = solver.objective(tuple(sorted(child_in)))
                if obj < incumbent_obj - 1e-15:
                    incumbent_support, incumbent_obj = tuple(sorted(child_in)), obj
                continue
            child_bound = solver.objective(child_in + child_free)
            if child_bound >= incumbent_obj - 1e-12:
                continue
            counter += 1
            heapq.heappush(heap, (child_bound, counter, child_in, child_free))
    if status is None:
        best_bound = incumbent_obj
        status = "optimal"
    best_bound = min(best_bound, incumbent_obj)

    model, support, objective = _sparse_model(data, incumbent_support, "mse")
    bound = min(best_bound, objective)
    gap = abs(objective - bound) / max(1.0, abs(objective))
    return SparseSolution(model=model, support=support, objective=objective,
                          bound=bound, gap=gap, status=status, nodes=nodes,
                          time_s=time.perf_counter() - start)
