"""Stress the simplex: infeasible LPs, bigger LPs, dual warm starts."""

import numpy as np
from scipy.optimize import linprog

from ucproxy.milp import MilpModel
from ucproxy.engine.simplex import SimplexCore, solve_lp

rng = np.random.default_rng(11)


def random_model(m, n, force_infeasible=False, seed_rng=rng):
    A = np.where(seed_rng.random((m, n)) < 0.4,
                 seed_rng.normal(0, 2, (m, n)), 0.0)
    c = seed_rng.normal(0, 1, n)
    lb = seed_rng.uniform(-5, 0, n)
    ub = lb + seed_rng.uniform(0, 8, n)
    kinds = seed_rng.integers(0, 4, m)
    mid = A @ seed_rng.uniform(lb, ub)
    shift = seed_rng.uniform(-6, 2, m) if force_infeasible else np.zeros(m)
    lo = np.where(kinds == 0, -np.inf, mid - seed_rng.uniform(0, 4, m) + shift)
    hi = np.where(kinds == 1, np.inf, mid + seed_rng.uniform(0, 4, m) + shift)
    eq = kinds == 2
    lo[eq] = mid[eq] + shift[eq]
    hi[eq] = mid[eq] + shift[eq]
    lo = np.minimum(lo, hi)

    model = MilpModel("t")
    for j in range(n):
        model.add_var(f"x{j}", lb=lb[j], ub=ub[j], obj=c[j])
    for i in range(m):
        cols = np.nonzero(A[i])[0]
        if cols.size == 0:
            continue
        model.add_row(f"r{i}", cols, A[i, cols], lo=lo[i], hi=hi[i])
    return model, (A, c, lb, ub, lo, hi)


def scipy_solve(data):
    A, c, lb, ub, lo, hi = data
    A_ub, b_ub, A_eq, b_eq = [], [], [], []
    for i in range(A.shape[0]):
        if not np.nonzero(A[i])[0].size:
            continue
        if lo[i] == hi[i]:
            A_eq.append(A[i]); b_eq.append(lo[i])
        else:
            if np.isfinite(hi[i]):
                A_ub.append(A[i]); b_ub.append(hi[i])
            if np.isfinite(lo[i]):
                A_ub.append(-A[i]); b_ub.append(-lo[i])
    return linprog(c, A_ub=np.array(A_ub) if A_ub else None,
                   b_ub=np.array(b_ub) if b_ub else None,
                   A_eq=np.array(A_eq) if A_eq else None,
                   b_eq=np.array(b_eq) if b_eq else None,
                   bounds=list(zip(lb, ub)), method="highs")


# 1. infeasible detection
agree_inf, agree_opt = 0, 0
for trial in range(150):
    model, data = random_model(rng.integers(2, 15), rng.integers(1, 12),
                               force_infeasible=True)
    ref = scipy_solve(data)
    sol = solve_lp(model)
    if ref.status == 2:
        assert sol.status == "infeasible", f"trial {trial}: {sol.status}"
        agree_inf += 1
    elif ref.status == 0:
        assert sol.status == "optimal" and \
            abs(sol.objective - ref.fun) <= 1e-6 * (1 + abs(ref.fun)), trial
        agree_opt += 1
print(f"infeasible set: {agree_inf} infeasible, {agree_opt} optimal, all agree")

# 2. larger LPs
for trial in range(10):
    model, data = random_model(60, 90)
    ref = scipy_solve(data)
    sol = solve_lp(model)
    assert ref.status == 0 and sol.status == "optimal"
    assert abs(sol.objective - ref.fun) <= 1e-6 * (1 + abs(ref.fun)), \
        (trial, sol.objective, ref.fun)
print("larger LPs agree")

# 3. dual warm start: tighten bounds of one variable and re-solve
n_warm = 0
for trial in range(80):
    model, data = random_model(rng.integers(3, 15), rng.integers(2, 12))
    core = SimplexCore.from_model(model)
    st, _ = core.solve_primal()
    if st != "optimal":
        continue
    A, c, lb, ub, lo, hi = data
    j = int(rng.integers(0, len(c)))
    fix = float(rng.uniform(lb[j], ub[j]))
    lb2, ub2 = lb.copy(), ub.copy()
    lb2[j] = ub2[j] = fix
    core.set_variable_bounds(lb2, ub2)
    st, iters = core.solve_dual()
    ref = scipy_solve((A, c, lb2, ub2, lo, hi))
    if st == "stalled":
        core.reset_to_slack_basis()
        st, _ = core.solve_primal()
    ours = core.extract_solution(st, 0)
    if ref.status == 0:
        assert ours.status == "optimal", (trial, ours.status)
        assert abs(ours.objective - ref.fun) <= 1e-6 * (1 + abs(ref.fun)), \
            (trial, ours.objective, ref.fun)
        n_warm += 1
    elif ref.status == 2:
        assert ours.status == "infeasible", (trial, ours.status)
print(f"dual warm starts agree on {n_warm} optimal cases")
