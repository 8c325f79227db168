"""Self-contained linear and mixed-binary programming.

``solve_lp`` runs a revised simplex with two-sided variable bounds and a
deterministic pivot rule; ``solve_mip`` wraps it in best-first branch and
bound over binary variables.  Problems are small to mid-sized by design:
the basis inverse is kept dense.
"""

from .problem import (
    LpProblem,
    LpSolution,
    MipSolution,
    LpError,
    SingularBasisError,
    dump_problem,
)
from .simplex import solve_lp
from .branch_bound import solve_mip

__all__ = [
    "LpProblem",
    "LpSolution",
    "MipSolution",
    "LpError",
    "SingularBasisError",
    "dump_problem",
    "solve_lp",
    "solve_mip",
]
