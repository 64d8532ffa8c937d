"""Best-first branch and bound over the binary variables of a MilpModel.

Each node re-solves the shared LP core with the dual simplex from its
parent's optimal basis (a bound change keeps the basis dual feasible);
a cold primal solve is the fallback.  Branching picks the most
fractional binary, ties broken by the lowest variable index, so runs
are deterministic for a fixed model and parameter set.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

import numpy as np

from ucproxy.engine import simplex
from ucproxy.engine.simplex import SimplexCore

OPTIMAL = "optimal"
GAP_LIMITED = "gap_limited"
INFEASIBLE = "infeasible"


@dataclass
class BnbParams:
    gap_tol: float = 1e-6
    node_limit: int = 200_000
    time_limit_s: float | None = None
    branching: str = "most_fractional"
    int_tol: float = 1e-6

    def __post_init__(self):
        if self.gap_tol < 0:
            raise ValueError("gap_tol must be >= 0")
        if self.node_limit <= 0:
            raise ValueError("node_limit must be positive")
        if self.branching != "most_fractional":
            raise ValueError(f"unknown branching rule {self.branching!r}")


@dataclass
class MilpResult:
    x: np.ndarray | None
    objective: float
    status: str
    gap: float
    nodes: int
    lp_iterations: int
    root_bound: float
    root_basis: tuple[np.ndarray, np.ndarray] | None = None


def solve_milp(model, params: BnbParams | None = None,
               warm_basis: tuple[np.ndarray, np.ndarray] | None = None,
               trace: list | None = None) -> MilpResult:
    """Minimize ``model`` exactly; binaries are branched, the rest is LP.

    ``warm_basis`` is an optional (basis, vstat) snapshot from a solved
    instance with the same rows and costs (only rhs/bounds may differ);
    the root then starts with the dual simplex and falls back to a cold
    primal solve.  The answer itself never depends on the warm start.
    ``trace``, when given, collects (global_bound, incumbent) pairs per
    processed node.
    """
    params = params or BnbParams()
    t0 = time.perf_counter()
    binaries = model.binary_indices()
    core = SimplexCore.from_model(model)
    lb0, ub0 = model.bounds_arrays()

    lp_iters = 0
    status = simplex.STALLED
    if warm_basis is not None:
        try:
            core.load_basis(warm_basis[0], warm_basis[1])
            status, iters = core.solve_dual()
            lp_iters += iters
        except (simplex.NumericalError, IndexError, ValueError):
            status = simplex.STALLED
    if status in (simplex.STALLED,):
        if warm_basis is not None:
            core.reset_to_slack_basis()
        status, iters = core.solve_primal()
        lp_iters += iters
    if status == simplex.STALLED:
        raise simplex.NumericalError("root LP stalled")
    if status == simplex.INFEASIBLE:
        return MilpResult(None, float("nan"), INFEASIBLE, float("inf"),
                          1, lp_iters, float("nan"))
    if status == simplex.UNBOUNDED:
        raise simplex.NumericalError("MILP relaxation is unbounded")

    root = core.extract_solution(status, iters)
    root_bound = root.objective
    root_basis = core.snapshot_basis()

    frac = _fractional(root.x, binaries, params.int_tol)
    if frac is None:
        x = _rounded(root.x, binaries)
        return MilpResult(x, root.objective, OPTIMAL, 0.0, 1, lp_iters,
                          root_bound, root_basis)

    incumbent_x: np.ndarray | None = None
    incumbent_obj = float("inf")

    def rel_gap(best: float, bound: float) -> float:
        if not np.isfinite(best):
            return float("inf")
        return max(best - bound, 0.0) / max(1.0, abs(best))

    # heap entries: (bound, seq, lb, ub, basis, vstat); seq keeps pops
    # deterministic and shields heapq from comparing arrays
    seq = 0
    heap: list = []
    basis, vstat = core.snapshot_basis()
    for clb, cub in _children(lb0, ub0, frac):
        heapq.heappush(heap, (root.objective, seq, clb, cub, basis, vstat))
        seq += 1

    nodes = 1
    global_bound = root.objective
    hit_limit = False

    while heap:
        bound, _, lb, ub, basis, vstat = heapq.heappop(heap)
        global_bound = bound            # best-first: valid global lower bound
        if trace is not None:
            trace.append((global_bound, incumbent_obj))
        if rel_gap(incumbent_obj, bound) <= params.gap_tol:
            break
        if nodes >= params.node_limit or (
            params.time_limit_s is not None
            and time.perf_counter() - t0 > params.time_limit_s
        ):
            hit_limit = True
            break

        nodes += 1
        core.load_basis(basis, vstat)
        core.set_variable_bounds(lb, ub)
        st, iters = core.solve_dual()
        lp_iters += iters
        if st == simplex.STALLED:
            core.reset_to_slack_basis()
            st, iters = core.solve_primal()
            lp_iters += iters
            if st == simplex.STALLED:
                raise simplex.NumericalError("node LP stalled")
        if st == simplex.INFEASIBLE:
            continue
        if st == simplex.UNBOUNDED:
            raise simplex.NumericalError("node LP unbounded")

        sol = core.extract_solution(st, iters)
        node_obj = max(sol.objective, bound)   # keep bounds monotone
        if node_obj >= incumbent_obj - params.gap_tol * max(1.0, abs(incumbent_obj)):
            continue
        frac = _fractional(sol.x, binaries, params.int_tol)
        if frac is None:
            incumbent_obj = node_obj
            incumbent_x = sol.x.copy()
            continue
        cb, cv = core.snapshot_basis()
        for clb, cub in _children(lb, ub, frac):
            heapq.heappush(heap, (node_obj, seq, clb, cub, cb, cv))
            seq += 1
    else:
        global_bound = incumbent_obj       # tree exhausted: proof complete

    if incumbent_x is None:
        status_out = GAP_LIMITED if hit_limit else INFEASIBLE
        return MilpResult(None, float("nan"), status_out, float("inf"),
                          nodes, lp_iters, root_bound, root_basis)

    achieved = rel_gap(incumbent_obj, global_bound)
    status_out = GAP_LIMITED if hit_limit else OPTIMAL
    return MilpResult(_rounded(incumbent_x, binaries), incumbent_obj,
                      status_out, achieved, nodes, lp_iters, root_bound,
                      root_basis)


def _rounded(x: np.ndarray, binaries: np.ndarray) -> np.ndarray:
    out = x.copy()
    out[binaries] = np.round(out[binaries])
    return out


def _fractional(x: np.ndarray, binaries: np.ndarray, tol: float) -> int | None:
    """Most fractional binary (variable index), or None if integral."""
    if binaries.size == 0:
        return None
    vals = x[binaries]
    dist = np.minimum(vals - np.floor(vals), np.ceil(vals) - vals)
    worst = float(dist.max())
    if worst <= tol:
        return None
    tied = np.nonzero(dist >= worst - 1e-12)[0]
    return int(binaries[tied[0]])


def _children(lb: np.ndarray, ub: np.ndarray, j: int):
    """Down (x_j <= floor) and up (x_j >= ceil) bound sets for branching."""
    down_lb, down_ub = lb.copy(), ub.copy()
    down_ub[j] = 0.0
    up_lb, up_ub = lb.copy(), ub.copy()
    up_lb[j] = 1.0
    return (down_lb, down_ub), (up_lb, up_ub)
