"""Problem and solution containers for the LP/MIP layer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RELATIONS = ("<=", "=", ">=")


class LpError(RuntimeError):
    """Raised on malformed problems or solver breakdowns."""


class SingularBasisError(LpError):
    """The working basis lost invertibility beyond repair."""


class LpProblem:
    """Linear program in minimize form with per-variable bounds.

    Rows are stored sparsely as (indices, values, relation, rhs).  Variables
    default to free; ``set_bounds`` takes ``None`` for an infinite end.
    Binary variables are continuous [0, 1] columns flagged for the MIP layer.
    """

    def __init__(self, num_vars: int):
        if num_vars < 1:
            raise LpError("problem needs at least one variable")
        self.num_vars = num_vars
        self.objective = np.zeros(num_vars)
        self.lower = np.full(num_vars, -np.inf)
        self.upper = np.full(num_vars, np.inf)
        self.is_binary = np.zeros(num_vars, dtype=bool)
        self.row_index: list[np.ndarray] = []
        self.row_value: list[np.ndarray] = []
        self.relations: list[str] = []
        self.rhs: list[float] = []

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    def set_objective(self, coeffs) -> None:
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (self.num_vars,):
            raise LpError("objective length mismatch")
        self.objective = c

    def set_bounds(self, j: int, lo, hi) -> None:
        self.lower[j] = -np.inf if lo is None else float(lo)
        self.upper[j] = np.inf if hi is None else float(hi)
        if self.lower[j] > self.upper[j]:
            raise LpError(f"empty bound interval for variable {j}")

    def mark_binary(self, j: int) -> None:
        self.is_binary[j] = True
        self.lower[j] = max(self.lower[j], 0.0)
        self.upper[j] = min(self.upper[j], 1.0)

    def add_row(self, coeffs, relation: str, rhs: float) -> None:
        """Append a constraint; ``coeffs`` is a dict {index: value} or a dense vector."""
        if relation not in RELATIONS:
            raise LpError(f"unknown relation {relation!r}")
        if isinstance(coeffs, dict):
            idx = np.fromiter(coeffs.keys(), dtype=np.intp, count=len(coeffs))
            val = np.fromiter(coeffs.values(), dtype=float, count=len(coeffs))
            order = np.argsort(idx)
            idx, val = idx[order], val[order]
        else:
            dense = np.asarray(coeffs, dtype=float)
            if dense.shape != (self.num_vars,):
                raise LpError("row length mismatch")
            idx = np.nonzero(dense)[0]
            val = dense[idx]
        if idx.size and (idx.min() < 0 or idx.max() >= self.num_vars):
            raise LpError("row references unknown variable")
        if not np.all(np.isfinite(val)):
            raise LpError("row coefficients must be finite")
        if not np.isfinite(rhs):
            raise LpError("rhs must be finite")
        self.row_index.append(idx)
        self.row_value.append(val)
        self.relations.append(relation)
        self.rhs.append(float(rhs))

    def validate(self) -> None:
        if not np.all(np.isfinite(self.objective)):
            raise LpError("objective has non-finite entries")
        bad = self.is_binary & ((self.lower < -1e-12) | (self.upper > 1.0 + 1e-12))
        if np.any(bad):
            raise LpError("binary variables must have bounds within [0, 1]")

    def dense_matrix(self) -> np.ndarray:
        a = np.zeros((self.num_rows, self.num_vars))
        for r, (idx, val) in enumerate(zip(self.row_index, self.row_value)):
            a[r, idx] = val
        return a

    def copy(self) -> "LpProblem":
        out = LpProblem(self.num_vars)
        out.objective = self.objective.copy()
        out.lower = self.lower.copy()
        out.upper = self.upper.copy()
        out.is_binary = self.is_binary.copy()
        out.row_index = [x.copy() for x in self.row_index]
        out.row_value = [x.copy() for x in self.row_value]
        out.relations = list(self.relations)
        out.rhs = list(self.rhs)
        return out


def dump_problem(problem: LpProblem) -> str:
    """Plain-text dump for diffing: objective, bounds, then one row per line.

    Row lines read ``j:coeff ... REL rhs`` with variable indices ascending;
    bound lines read ``bound j lo hi``.  Floats use repr so the dump is
    lossless.
    """
    lines = ["min " + " ".join(f"{j}:{c!r}" for j, c in enumerate(problem.objective) if c != 0.0)]
    for j in range(problem.num_vars):
        lo, hi = problem.lower[j], problem.upper[j]
        tag = " binary" if problem.is_binary[j] else ""
        if np.isfinite(lo) or np.isfinite(hi) or tag:
            lines.append(f"bound {j} {lo!r} {hi!r}{tag}")
    for idx, val, rel, rhs in zip(problem.row_index, problem.row_value, problem.relations, problem.rhs):
        body = " ".join(f"{j}:{v!r}" for j, v in zip(idx, val))
        lines.append(f"{body} {rel} {rhs!r}")
    return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    """Simplex output; ``duals`` holds one multiplier per input row.

    ``basis``/``vstate`` describe the final basis over the slack-extended
    variable vector and can be fed back in as a warm start.
    """

    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    basis: np.ndarray | None = None
    vstate: np.ndarray | None = None
    message: str = ""


@dataclass
class MipSolution:
    """Branch-and-bound output for binary programs (minimization).

    ``gap`` is |incumbent - bound| / max(1, |incumbent|); ``bound`` is the
    best proven lower bound over the open search tree.
    """

    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    bound: float = -np.inf
    gap: float = np.inf
    nodes: int = 0
    iterations: int = 0
    bound_history: list = field(default_factory=list)
    message: str = ""
