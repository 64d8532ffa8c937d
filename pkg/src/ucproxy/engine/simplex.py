"""Bounded-variable revised simplex with a dense basis inverse.

Solves ``min c'x  s.t.  lo <= Ax <= hi,  lb <= x <= ub`` by appending one
slack per row (``Ax - s = 0`` with ``s`` bounded by the row bounds) and
pivoting on the combined column set.  The basis inverse is kept dense and
updated in product form, with periodic refactorization and a residual
check so numerical drift raises instead of returning a wrong answer.

Two pivoting loops are provided: a primal simplex with a composite
artificial-free phase 1 (minimizing total bound infeasibility), and a
dual simplex used to re-solve cheaply after variable-bound changes
(branch-and-bound nodes share one core and swap bounds).  Anti-cycling:
Dantzig pricing switches to Bland's rule after a run of degenerate
steps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg.blas import dger

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
STALLED = "stalled"

BASIC, AT_LB, AT_UB, FREE = 0, 1, 2, 3

FEAS_TOL = 1e-7       # bound / activity feasibility
DUAL_TOL = 1e-7       # reduced-cost optimality
PIVOT_TOL = 1e-9      # smallest admissible pivot element
RATIO_TIE = 1e-9
REFACTOR_EVERY = 64
DEGEN_SWITCH = 400    # degenerate steps before Bland's rule kicks in


class NumericalError(RuntimeError):
    """Numerical breakdown: factorization or residual checks failed."""


@dataclass
class LpSolution:
    """Primal answer for one LP (structural variables only)."""

    x: np.ndarray
    objective: float
    status: str
    iterations: int
    duals: np.ndarray = field(default=None, repr=False)
    reduced_costs: np.ndarray = field(default=None, repr=False)
    dual_objective: float = field(default=float("nan"), repr=False)


def solve_lp(model, lb=None, ub=None) -> LpSolution:
    """Solve the LP relaxation of a :class:`~ucproxy.milp.MilpModel`.

    Integrality marks are ignored; ``lb``/``ub`` optionally override the
    model's variable bounds (used by branch and bound).
    """
    core = SimplexCore.from_model(model)
    if lb is not None or ub is not None:
        core.set_variable_bounds(lb, ub)
    status, iters = core.solve_primal()
    if status == STALLED:
        raise NumericalError("simplex stalled without reaching optimality")
    return core.extract_solution(status, iters)


class SimplexCore:
    """One LP instance; reusable across bound changes via the dual method."""

    def __init__(self, a_csc: sp.csc_matrix, c: np.ndarray,
                 lb: np.ndarray, ub: np.ndarray,
                 row_lo: np.ndarray, row_hi: np.ndarray):
        self.m, self.n = a_csc.shape
        self.A = a_csc
        self.AT = a_csc.T.tocsr()
        self.c_struct = np.asarray(c, dtype=float)
        nt = self.n + self.m
        self.nt = nt
        self.lb = np.concatenate([lb, row_lo]).astype(float)
        self.ub = np.concatenate([ub, row_hi]).astype(float)
        self.c = np.concatenate([self.c_struct, np.zeros(self.m)])
        self.basis = np.arange(self.n, nt, dtype=np.int64)
        self.vstat = np.full(nt, AT_LB, dtype=np.int8)
        self.xval = np.zeros(nt)
        self.binv = np.asfortranarray(-np.eye(self.m))
        self._updates = 0
        self.reset_to_slack_basis()

    @classmethod
    def from_model(cls, model) -> "SimplexCore":
        rows, cols, vals = [], [], []
        for i, (rc, rv) in enumerate(zip(model.row_cols, model.row_coefs)):
            rows.extend([i] * len(rc))
            cols.extend(rc.tolist())
            vals.extend(rv.tolist())
        a = sp.csc_matrix(
            (vals, (rows, cols)), shape=(model.n_rows, model.n_vars)
        )
        lb, ub = model.bounds_arrays()
        return cls(
            a, model.objective_array(), lb, ub,
            np.asarray(model.row_lo, dtype=float),
            np.asarray(model.row_hi, dtype=float),
        )

    # -- basis management -------------------------------------------------

    def _default_status(self, j: int, prefer_ub: bool = False) -> int:
        lo, hi = self.lb[j], self.ub[j]
        if prefer_ub and np.isfinite(hi):
            return AT_UB
        if np.isfinite(lo):
            return AT_LB
        if np.isfinite(hi):
            return AT_UB
        return FREE

    def _bound_value(self, j: int, status: int) -> float:
        if status == AT_LB:
            return self.lb[j]
        if status == AT_UB:
            return self.ub[j]
        return 0.0

    def reset_to_slack_basis(self) -> None:
        self.basis = np.arange(self.n, self.nt, dtype=np.int64)
        self.binv = np.asfortranarray(-np.eye(self.m))
        self._updates = 0
        for j in range(self.nt):
            st = self._default_status(j)
            self.vstat[j] = st
            self.xval[j] = self._bound_value(j, st)
        self.vstat[self.basis] = BASIC
        self.refresh_basic_values()

    def set_variable_bounds(self, lb=None, ub=None) -> None:
        """Replace structural bounds, keeping the basis warm."""
        if lb is not None:
            self.lb[: self.n] = lb
        if ub is not None:
            self.ub[: self.n] = ub
        for j in range(self.n):
            st = self.vstat[j]
            if st == BASIC:
                continue
            st = self._default_status(j, prefer_ub=(st == AT_UB))
            self.vstat[j] = st
            self.xval[j] = self._bound_value(j, st)
        self.refresh_basic_values()

    def snapshot_basis(self) -> tuple[np.ndarray, np.ndarray]:
        return self.basis.copy(), self.vstat.copy()

    def load_basis(self, basis: np.ndarray, vstat: np.ndarray) -> None:
        self.basis = basis.copy()
        self.vstat = vstat.copy()
        for j in range(self.nt):
            if self.vstat[j] != BASIC:
                st = self._default_status(j, prefer_ub=(self.vstat[j] == AT_UB))
                self.vstat[j] = st
                self.xval[j] = self._bound_value(j, st)
        self.refactorize()

    # -- linear algebra ----------------------------------------------------

    def column(self, j: int) -> np.ndarray:
        col = np.zeros(self.m)
        if j < self.n:
            start, end = self.A.indptr[j], self.A.indptr[j + 1]
            col[self.A.indices[start:end]] = self.A.data[start:end]
        else:
            col[j - self.n] = -1.0
        return col

    def ftran(self, j: int) -> np.ndarray:
        if j < self.n:
            start, end = self.A.indptr[j], self.A.indptr[j + 1]
            return self.binv[:, self.A.indices[start:end]] @ self.A.data[start:end]
        return -self.binv[:, j - self.n]

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        y = self.binv.T @ cost[self.basis]
        z = np.empty(self.nt)
        z[: self.n] = cost[: self.n] - self.AT @ y
        z[self.n:] = cost[self.n:] + y
        return z

    def duals(self) -> np.ndarray:
        return self.binv.T @ self.c[self.basis]

    def refresh_basic_values(self) -> None:
        self.xval[self.basis] = 0.0
        act = self.A @ self.xval[: self.n] - self.xval[self.n:]
        self.xval[self.basis] = -self.binv @ act

    def refactorize(self) -> None:
        cols = np.empty((self.m, self.m))
        for k, j in enumerate(self.basis):
            cols[:, k] = self.column(j)
        try:
            self.binv = np.asfortranarray(np.linalg.inv(cols))
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular basis: {exc}") from exc
        self._updates = 0
        self.refresh_basic_values()
        residual = float(
            np.abs(self.A @ self.xval[: self.n] - self.xval[self.n:]).max()
        ) if self.m else 0.0
        scale = 1.0 + float(np.abs(self.xval).max())
        if residual > 1e-6 * scale:
            raise NumericalError(
                f"basis residual {residual:.2e} exceeds tolerance")

    def _update_binv(self, d: np.ndarray, r: int) -> None:
        piv = d[r]
        if abs(piv) < PIVOT_TOL:
            raise NumericalError(f"pivot element {piv:.2e} too small")
        br = self.binv[r] / piv
        # rank-1 product-form update, fused in place (binv is Fortran-ordered)
        self.binv = dger(-1.0, d, br, a=self.binv, overwrite_a=1)
        self.binv[r] = br
        self._updates += 1
        if self._updates >= REFACTOR_EVERY:
            self.refactorize()

    # -- feasibility measures -----------------------------------------------

    def infeasibility(self) -> float:
        xb = self.xval[self.basis]
        below = self.lb[self.basis] - xb
        above = xb - self.ub[self.basis]
        total = 0.0
        finite_b = np.isfinite(below)
        finite_a = np.isfinite(above)
        if finite_b.any():
            total += float(np.maximum(below[finite_b], 0.0).sum())
        if finite_a.any():
            total += float(np.maximum(above[finite_a], 0.0).sum())
        return total

    def dual_infeasibility(self, z: np.ndarray | None = None) -> float:
        if z is None:
            z = self.reduced_costs(self.c)
        movable = self.lb != self.ub
        worst = 0.0
        sel = (self.vstat == AT_LB) & movable
        if sel.any():
            worst = max(worst, float(np.maximum(-z[sel], 0.0).max()))
        sel = (self.vstat == AT_UB) & movable
        if sel.any():
            worst = max(worst, float(np.maximum(z[sel], 0.0).max()))
        sel = self.vstat == FREE
        if sel.any():
            worst = max(worst, float(np.abs(z[sel]).max()))
        return worst

    # -- primal simplex -----------------------------------------------------

    def _phase1_cost(self) -> np.ndarray:
        cost = np.zeros(self.nt)
        xb = self.xval[self.basis]
        lo, hi = self.lb[self.basis], self.ub[self.basis]
        cost[self.basis[xb < lo - FEAS_TOL]] = -1.0
        cost[self.basis[xb > hi + FEAS_TOL]] = 1.0
        return cost

    def solve_primal(self, max_iters: int | None = None) -> tuple[str, int]:
        if max_iters is None:
            max_iters = 2000 + 60 * (self.m + self.n)
        iters = 0
        degen = 0
        bland = False
        verifies = 0
        feas_budget = FEAS_TOL * (1 + self.m)

        while iters < max_iters:
            phase1 = self.infeasibility() > feas_budget
            cost = self._phase1_cost() if phase1 else self.c
            if phase1 and not cost.any():
                # violations all inside the per-variable tolerance
                phase1 = False
                cost = self.c
            z = self.reduced_costs(cost)
            q = self._price(z, bland)
            if q < 0:
                if phase1:
                    return INFEASIBLE, iters
                # claimed optimal: verify against a fresh factorization
                self.refactorize()
                if (self.infeasibility() <= feas_budget * 10
                        and self.dual_infeasibility() <= 1e-6):
                    return OPTIMAL, iters
                verifies += 1
                if verifies > 3:
                    raise NumericalError("optimality verification keeps failing")
                iters += 1
                continue
            sigma = 1.0 if (
                self.vstat[q] == AT_LB or (self.vstat[q] == FREE and z[q] < 0)
            ) else -1.0
            d = self.ftran(q)
            step, r, kind, leave_status = self._ratio_test(
                q, sigma, d, phase1, bland)
            if kind == "unbounded":
                if phase1:   # phase-1 objective is bounded; must be drift
                    self.refactorize()
                    iters += 1
                    continue
                return UNBOUNDED, iters
            if step <= 1e-10:
                degen += 1
                if degen > DEGEN_SWITCH:
                    bland = True
            else:
                degen = 0
            self._apply_step(q, sigma, d, step, r, kind, leave_status)
            iters += 1
        return STALLED, iters

    def _price(self, z: np.ndarray, bland: bool) -> int:
        viol = np.zeros(self.nt)
        sel = self.vstat == AT_LB
        viol[sel] = -z[sel]
        sel = self.vstat == AT_UB
        viol[sel] = z[sel]
        sel = self.vstat == FREE
        viol[sel] = np.abs(z[sel])
        viol[self.lb == self.ub] = 0.0
        if bland:
            cand = np.nonzero(viol > DUAL_TOL)[0]
            return int(cand[0]) if cand.size else -1
        q = int(np.argmax(viol))
        return q if viol[q] > DUAL_TOL else -1

    def _ratio_test(self, q, sigma, d, phase1, bland):
        """Largest primal step for entering ``q``.

        Returns ``(step, basic_row, kind, leave_status)`` where kind is
        'pivot', 'flip' or 'unbounded'.  In phase 1 a basic beyond a bound
        may travel back to that bound (first-breakpoint rule); a basic
        moving deeper into violation imposes no limit.
        """
        g = sigma * d
        xb = self.xval[self.basis]
        lo, hi = self.lb[self.basis], self.ub[self.basis]

        lim = np.full(self.m, np.inf)
        target = np.full(self.m, AT_LB, dtype=np.int8)

        dec = g > PIVOT_TOL
        inc = g < -PIVOT_TOL
        if phase1:
            above = xb > hi + FEAS_TOL
            below = xb < lo - FEAS_TOL
            sel = dec & above
            lim[sel] = (xb[sel] - hi[sel]) / g[sel]
            target[sel] = AT_UB
            sel = dec & ~above & ~below & np.isfinite(lo)
            lim[sel] = (xb[sel] - lo[sel]) / g[sel]
            target[sel] = AT_LB
            sel = inc & below
            lim[sel] = (lo[sel] - xb[sel]) / (-g[sel])
            target[sel] = AT_LB
            sel = inc & ~below & ~above & np.isfinite(hi)
            lim[sel] = (hi[sel] - xb[sel]) / (-g[sel])
            target[sel] = AT_UB
        else:
            sel = dec & np.isfinite(lo)
            lim[sel] = (xb[sel] - lo[sel]) / g[sel]
            target[sel] = AT_LB
            sel = inc & np.isfinite(hi)
            lim[sel] = (hi[sel] - xb[sel]) / (-g[sel])
            target[sel] = AT_UB
        np.maximum(lim, 0.0, out=lim)

        best = float(lim.min()) if self.m else np.inf
        t_range = self.ub[q] - self.lb[q]
        if t_range <= best:
            if np.isfinite(t_range):
                return t_range, -1, "flip", AT_LB
            return np.inf, -1, "unbounded", AT_LB
        if not np.isfinite(best):
            return np.inf, -1, "unbounded", AT_LB
        near = np.nonzero(lim <= best + RATIO_TIE)[0]
        if bland:
            r = int(near[np.argmin(self.basis[near])])
        else:
            r = int(near[np.argmax(np.abs(g[near]))])
        return best, r, "pivot", int(target[r])

    def _apply_step(self, q, sigma, d, step, r, kind, leave_status) -> None:
        if step > 0:
            self.xval[self.basis] -= sigma * step * d
        if kind == "flip":
            new = AT_UB if self.vstat[q] == AT_LB else AT_LB
            self.vstat[q] = new
            self.xval[q] = self._bound_value(q, new)
            return
        self.xval[q] += sigma * step
        leaving = self.basis[r]
        self.vstat[leaving] = leave_status
        self.xval[leaving] = self._bound_value(leaving, leave_status)
        self.basis[r] = q
        self.vstat[q] = BASIC
        self._update_binv(d, r)

    # -- dual simplex --------------------------------------------------------

    def solve_dual(self, max_iters: int | None = None) -> tuple[str, int]:
        """Dual simplex from the current basis (after bound changes).

        Returns ``stalled`` when the warm basis is not dual feasible or
        progress dies, so callers can fall back to a cold primal solve.
        """
        if max_iters is None:
            max_iters = 1000 + 20 * (self.m + self.n)
        z = self.reduced_costs(self.c)
        if self.dual_infeasibility(z) > 1e-6:
            return STALLED, 0
        iters = 0
        degen = 0
        bland = False
        movable = self.lb != self.ub

        while iters < max_iters:
            xb = self.xval[self.basis]
            below = self.lb[self.basis] - xb
            above = xb - self.ub[self.basis]
            below[~np.isfinite(below)] = -np.inf
            above[~np.isfinite(above)] = -np.inf
            viol = np.maximum(below, above)
            r = int(np.argmax(viol))
            if viol[r] <= FEAS_TOL:
                self.refactorize()
                if (self.infeasibility() <= FEAS_TOL * (1 + self.m) * 10
                        and self.dual_infeasibility() <= 1e-6):
                    return OPTIMAL, iters
                z = self.reduced_costs(self.c)
                if self.dual_infeasibility(z) > 1e-6:
                    return STALLED, iters
                iters += 1
                continue
            leaving_low = below[r] >= above[r]

            rho = self.binv[r]
            alpha = np.empty(self.nt)
            alpha[: self.n] = self.AT @ rho
            alpha[self.n:] = -rho
            atil = alpha if leaving_low else -alpha

            cand_mask = movable & (
                ((self.vstat == AT_LB) & (atil < -PIVOT_TOL))
                | ((self.vstat == AT_UB) & (atil > PIVOT_TOL))
                | ((self.vstat == FREE) & (np.abs(atil) > PIVOT_TOL))
            )
            cand = np.nonzero(cand_mask)[0]
            if cand.size == 0:
                return INFEASIBLE, iters

            ratios = np.abs(z[cand]) / np.abs(atil[cand])
            best = float(ratios.min())
            near = cand[ratios <= best + RATIO_TIE]
            if bland:
                q = int(near[0])
            else:
                q = int(near[np.argmax(np.abs(atil[near]))])

            target_val = (self.lb[self.basis[r]] if leaving_low
                          else self.ub[self.basis[r]])
            delta_q = (target_val - xb[r]) / (-alpha[q])
            d = self.ftran(q)
            self.xval[self.basis] -= d * delta_q
            self.xval[q] += delta_q
            leaving = self.basis[r]
            self.vstat[leaving] = AT_LB if leaving_low else AT_UB
            self.xval[leaving] = target_val
            self.basis[r] = q
            self.vstat[q] = BASIC
            theta = z[q] / alpha[q]
            self._update_binv(d, r)
            if self._updates == 0:
                z = self.reduced_costs(self.c)
            else:
                z = z - theta * alpha
                z[q] = 0.0
            if abs(delta_q) <= 1e-10:
                degen += 1
                if degen > DEGEN_SWITCH:
                    bland = True
            else:
                degen = 0
            iters += 1
        return STALLED, iters

    # -- extraction -----------------------------------------------------------

    def extract_solution(self, status: str, iterations: int) -> LpSolution:
        x = self.xval[: self.n].copy()
        obj = float(self.c_struct @ x) if status == OPTIMAL else float("nan")
        y = self.duals()
        z = self.reduced_costs(self.c)
        dual_obj = self._dual_objective(z) if status == OPTIMAL else float("nan")
        return LpSolution(
            x=x,
            objective=obj,
            status=status,
            iterations=iterations,
            duals=y,
            reduced_costs=z[: self.n].copy(),
            dual_objective=dual_obj,
        )

    def _dual_objective(self, z: np.ndarray) -> float:
        """Lagrangian lower bound implied by the current duals.

        Independent of basis statuses: each variable contributes the bound
        that minimizes ``z_j * x_j``, so a sign error in the reduced costs
        shows up as a gap against the primal objective.
        """
        zc = np.where(np.abs(z) <= 10 * DUAL_TOL, 0.0, z)
        total = 0.0
        pos = zc > 0
        neg = zc < 0
        total += float((zc[pos] * self.lb[pos]).sum()) if pos.any() else 0.0
        total += float((zc[neg] * self.ub[neg]).sum()) if neg.any() else 0.0
        return total
