"""Ad-hoc cross-check of the simplex core against scipy.optimize.linprog."""

import numpy as np
from scipy.optimize import linprog

from ucproxy.milp import MilpModel
from ucproxy.engine.simplex import solve_lp

rng = np.random.default_rng(7)

n_ok = 0
n_infeas = 0
for trial in range(200):
    m = rng.integers(1, 12)
    n = rng.integers(1, 15)
    dens = 0.6
    A = np.where(rng.random((m, n)) < dens, rng.normal(0, 2, (m, n)), 0.0)
    c = rng.normal(0, 1, n)
    lb = rng.uniform(-5, 0, n)
    ub = lb + rng.uniform(0, 8, n)
    # random row bounds: mix of <=, >=, ==, range
    kinds = rng.integers(0, 4, m)
    mid = A @ rng.uniform(lb, ub)
    lo = np.where(kinds == 0, -np.inf, mid - rng.uniform(0, 4, m))
    hi = np.where(kinds == 1, np.inf, mid + rng.uniform(0, 4, m))
    eq = kinds == 2
    lo[eq] = mid[eq]
    hi[eq] = mid[eq]

    model = MilpModel("t")
    for j in range(n):
        model.add_var(f"x{j}", lb=lb[j], ub=ub[j], obj=c[j])
    for i in range(m):
        cols = np.nonzero(A[i])[0]
        if cols.size == 0:
            continue
        model.add_row(f"r{i}", cols, A[i, cols], lo=lo[i], hi=hi[i])

    # scipy reference
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i in range(m):
        if not np.nonzero(A[i])[0].size:
            continue
        if lo[i] == hi[i]:
            A_eq.append(A[i]); b_eq.append(lo[i])
        else:
            if np.isfinite(hi[i]):
                A_ub.append(A[i]); b_ub.append(hi[i])
            if np.isfinite(lo[i]):
                A_ub.append(-A[i]); b_ub.append(-lo[i])
    ref = linprog(c, A_ub=np.array(A_ub) if A_ub else None,
                  b_ub=np.array(b_ub) if b_ub else None,
                  A_eq=np.array(A_eq) if A_eq else None,
                  b_eq=np.array(b_eq) if b_eq else None,
                  bounds=list(zip(lb, ub)), method="highs")

    sol = solve_lp(model)
    if ref.status == 0:
        assert sol.status == "optimal", f"trial {trial}: ours={sol.status} ref=optimal"
        assert abs(sol.objective - ref.fun) <= 1e-6 * (1 + abs(ref.fun)), \
            f"trial {trial}: obj {sol.objective} vs {ref.fun}"
        assert abs(sol.objective - sol.dual_objective) <= 1e-5 * (1 + abs(sol.objective)), \
            f"trial {trial}: duality gap {sol.objective} vs {sol.dual_objective}"
        n_ok += 1
    elif ref.status == 2:
        assert sol.status == "infeasible", f"trial {trial}: ours={sol.status} ref=infeasible"
        n_infeas += 1
    else:
        pass  # unbounded can't happen with finite var bounds

print(f"optimal agreement: {n_ok}, infeasible agreement: {n_infeas}")
