"""quadlab: risk-quadrangle functionals, LP regression, and scenario optimization.

The package evaluates value-at-risk, conditional value-at-risk, and
superexpectation-type functionals exactly on empirical (finite discrete)
distributions, fits linear models under squared, pinball, and
positive/negative-part-balancing errors through a self-contained simplex
solver, optimizes scenario portfolios under tail-deviation objectives, and
solves cardinality-constrained sparse regression by branch and bound.
"""

__version__ = "0.1.0"

from . import distributions, functionals, lp_core, portfolio, regression, sparse

__all__ = [
    "__version__",
    "distributions",
    "functionals",
    "lp_core",
    "portfolio",
    "regression",
    "sparse",
]
