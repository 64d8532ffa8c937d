import numpy as np
import pytest
from scipy.optimize import linprog

from ucproxy.milp import MilpModel
from ucproxy.engine.simplex import SimplexCore, solve_lp


def build_random_lp(rng, m, n, force_infeasible=False):
    A = np.where(rng.random((m, n)) < 0.4, rng.normal(0, 2, (m, n)), 0.0)
    c = rng.normal(0, 1, n)
    lb = rng.uniform(-5, 0, n)
    ub = lb + rng.uniform(0, 8, n)
    kinds = rng.integers(0, 4, m)
    mid = A @ rng.uniform(lb, ub)
    shift = rng.uniform(-6, 2, m) if force_infeasible else np.zeros(m)
    lo = np.where(kinds == 0, -np.inf, mid - rng.uniform(0, 4, m) + shift)
    hi = np.where(kinds == 1, np.inf, mid + rng.uniform(0, 4, m) + shift)
    eq = kinds == 2
    lo[eq] = mid[eq] + shift[eq]
    hi[eq] = mid[eq] + shift[eq]
    lo = np.minimum(lo, hi)

    model = MilpModel("rand")
    for j in range(n):
        model.add_var(f"x{j}", lb=lb[j], ub=ub[j], obj=c[j])
    for i in range(m):
        cols = np.nonzero(A[i])[0]
        if cols.size:
            model.add_row(f"r{i}", cols, A[i, cols], lo=lo[i], hi=hi[i])
    return model, (A, c, lb, ub, lo, hi)


def scipy_reference(data):
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


class TestTinyLps:
    def test_one_dimensional(self):
        model = MilpModel("t")
        x = model.add_var("x", obj=1.0)
        model.add_row("ge3", [x], [1.0], lo=3.0)
        sol = solve_lp(model)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(3.0, abs=1e-9)
        assert sol.x[0] == pytest.approx(3.0, abs=1e-9)

    def test_two_by_two_transport(self):
        # supplies (3, 2), demands (2, 3), unit costs [[1, 2], [3, 1]];
        # hand solution: x11=2, x12=1, x22=2 -> cost 6
        model = MilpModel("transport")
        x = {}
        costs = {(0, 0): 1.0, (0, 1): 2.0, (1, 0): 3.0, (1, 1): 1.0}
        for (i, j), cost in costs.items():
            x[i, j] = model.add_var(f"x{i}{j}", obj=cost)
        model.add_row("s0", [x[0, 0], x[0, 1]], [1, 1], lo=3.0, hi=3.0)
        model.add_row("s1", [x[1, 0], x[1, 1]], [1, 1], lo=2.0, hi=2.0)
        model.add_row("d0", [x[0, 0], x[1, 0]], [1, 1], lo=2.0, hi=2.0)
        model.add_row("d1", [x[0, 1], x[1, 1]], [1, 1], lo=3.0, hi=3.0)
        sol = solve_lp(model)
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(6.0, abs=1e-9)

    def test_contradictory_bounds_infeasible(self):
        model = MilpModel("bad")
        x = model.add_var("x", lb=0.0, ub=10.0)
        model.add_row("le0", [x], [1.0], hi=0.0)
        model.add_row("ge1", [x], [1.0], lo=1.0)
        sol = solve_lp(model)
        assert sol.status == "infeasible"

    def test_unbounded(self):
        model = MilpModel("unb")
        x = model.add_var("x", lb=-np.inf, ub=np.inf, obj=-1.0)
        model.add_row("ge0", [x], [1.0], lo=0.0)
        sol = solve_lp(model)
        assert sol.status == "unbounded"


class TestRandomizedAgreement:
    def test_matches_reference_solver(self, rng):
        checked = 0
        for _ in range(120):
            model, data = build_random_lp(
                rng, int(rng.integers(1, 14)), int(rng.integers(1, 14)),
                force_infeasible=bool(rng.integers(0, 2)))
            ref = scipy_reference(data)
            sol = solve_lp(model)
            if ref.status == 0:
                assert sol.status == "optimal"
                assert sol.objective == pytest.approx(
                    ref.fun, abs=1e-6 * (1 + abs(ref.fun)))
                checked += 1
            elif ref.status == 2:
                assert sol.status == "infeasible"
        assert checked > 30

    def test_weak_duality_audit(self, rng):
        checked = 0
        for _ in range(60):
            model, data = build_random_lp(
                rng, int(rng.integers(2, 20)), int(rng.integers(2, 16)))
            sol = solve_lp(model)
            if sol.status != "optimal":
                continue
            assert sol.dual_objective == pytest.approx(
                sol.objective, rel=1e-6, abs=1e-6)
            checked += 1
        assert checked > 30

    def test_primal_feasibility_and_reduced_costs_at_optimum(self, rng):
        for _ in range(40):
            model, data = build_random_lp(
                rng, int(rng.integers(2, 15)), int(rng.integers(2, 12)))
            sol = solve_lp(model)
            if sol.status != "optimal":
                continue
            A, c, lb, ub, lo, hi = data
            x = sol.x
            assert (x >= lb - 1e-7).all() and (x <= ub + 1e-7).all()
            act = A @ x
            for i in range(A.shape[0]):
                if not np.nonzero(A[i])[0].size:
                    continue
                assert act[i] >= lo[i] - 1e-6
                assert act[i] <= hi[i] + 1e-6


class TestDualSimplex:
    def test_warm_restart_after_bound_fix(self, rng):
        agreed = 0
        for _ in range(50):
            model, data = build_random_lp(
                rng, int(rng.integers(3, 12)), int(rng.integers(2, 10)))
            core = SimplexCore.from_model(model)
            status, _ = core.solve_primal()
            if status != "optimal":
                continue
            A, c, lb, ub, lo, hi = data
            j = int(rng.integers(0, len(c)))
            fix = float(rng.uniform(lb[j], ub[j]))
            lb2, ub2 = lb.copy(), ub.copy()
            lb2[j] = ub2[j] = fix
            core.set_variable_bounds(lb2, ub2)
            status, _ = core.solve_dual()
            if status == "stalled":
                core.reset_to_slack_basis()
                status, _ = core.solve_primal()
            ours = core.extract_solution(status, 0)
            ref = scipy_reference((A, c, lb2, ub2, lo, hi))
            if ref.status == 0:
                assert ours.status == "optimal"
                assert ours.objective == pytest.approx(
                    ref.fun, abs=1e-6 * (1 + abs(ref.fun)))
                agreed += 1
            elif ref.status == 2:
                assert ours.status == "infeasible"
        assert agreed > 15
