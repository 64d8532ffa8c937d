"""Exact MILP solution machinery: simplex LP core, branch and bound, MPS I/O."""

from ucproxy.engine.simplex import LpSolution, NumericalError, solve_lp
from ucproxy.engine.branch_bound import BnbParams, MilpResult, solve_milp
from ucproxy.engine.mps import (
    export_standard,
    import_standard,
    import_solution,
    write_solution,
)

__all__ = [
    "LpSolution",
    "NumericalError",
    "solve_lp",
    "BnbParams",
    "MilpResult",
    "solve_milp",
    "export_standard",
    "import_standard",
    "import_solution",
    "write_solution",
]
