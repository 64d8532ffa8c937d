import numpy as np
import pytest

from ucproxy.engine.branch_bound import BnbParams, solve_milp
from ucproxy.engine.simplex import solve_lp
from ucproxy.formulation import UcOptions, build_milp
from ucproxy.milp import BINARY, MilpModel

from helpers import enumerate_commitments, make_input, random_instance, \
    single_bus_case


def knapsack_model():
    # max 7a + 4b + 3c s.t. 5a + 4b + 3c <= 9; optimum 11 at (1, 1, 0)
    model = MilpModel("knap")
    a = model.add_var("a", kind=BINARY, ub=1.0, obj=-7.0)
    b = model.add_var("b", kind=BINARY, ub=1.0, obj=-4.0)
    c = model.add_var("c", kind=BINARY, ub=1.0, obj=-3.0)
    model.add_row("w", [a, b, c], [5.0, 4.0, 3.0], hi=9.0)
    return model


class TestSmallMilps:
    def test_hand_enumerated_knapsack(self):
        res = solve_milp(knapsack_model())
        assert res.status == "optimal"
        assert res.objective == pytest.approx(-11.0, abs=1e-9)
        assert res.x[:3] == pytest.approx([1.0, 1.0, 0.0])

    def test_integral_relaxation_solves_at_root(self):
        model = MilpModel("int")
        x = model.add_var("x", kind=BINARY, ub=1.0, obj=-1.0)
        model.add_row("le", [x], [1.0], hi=1.0)
        res = solve_milp(model)
        assert res.status == "optimal"
        assert res.nodes == 1
        assert res.objective == pytest.approx(-1.0)

    def test_integer_infeasible(self):
        model = MilpModel("gapless")
        x = model.add_var("x", kind=BINARY, ub=1.0, obj=1.0)
        model.add_row("lo", [x], [1.0], lo=0.3)
        model.add_row("hi", [x], [1.0], hi=0.7)
        res = solve_milp(model)
        assert res.status == "infeasible"

    def test_lp_infeasible_root(self):
        model = MilpModel("inf")
        x = model.add_var("x", kind=BINARY, ub=1.0, obj=1.0)
        model.add_row("impossible", [x], [1.0], lo=2.0)
        res = solve_milp(model)
        assert res.status == "infeasible"

    def test_node_limit_gives_gap_limited(self, rng):
        case, x, horizon = random_instance(rng, max_binaries=8)
        model = build_milp(case, x, UcOptions(horizon=horizon))
        full = solve_milp(model)
        if full.nodes <= 1:
            pytest.skip("relaxation was integral; nothing to limit")
        res = solve_milp(model, BnbParams(node_limit=1))
        assert res.status == "gap_limited"

    def test_deterministic_repeat(self, rng):
        case, x, horizon = random_instance(rng, max_binaries=8)
        model = build_milp(case, x, UcOptions(horizon=horizon))
        r1 = solve_milp(model)
        r2 = solve_milp(model)
        assert r1.objective == r2.objective
        assert np.array_equal(r1.x, r2.x)
        assert r1.nodes == r2.nodes


class TestOracleEquivalence:
    def test_matches_exhaustive_enumeration(self, rng):
        solved = 0
        for _ in range(12):
            case, x, horizon = random_instance(rng, max_binaries=8)
            model = build_milp(case, x, UcOptions(horizon=horizon))
            res = solve_milp(model)
            oracle_obj, _ = enumerate_commitments(model)
            if oracle_obj is None:
                assert res.status == "infeasible"
                continue
            assert res.status == "optimal"
            assert res.objective == pytest.approx(
                oracle_obj, rel=1e-6, abs=1e-6)
            solved += 1
        assert solved >= 10

    def test_objective_bounded_by_relaxation(self, rng):
        for _ in range(8):
            case, x, horizon = random_instance(rng, max_binaries=10)
            model = build_milp(case, x, UcOptions(horizon=horizon))
            res = solve_milp(model)
            if res.status != "optimal":
                continue
            relax = solve_lp(model)
            assert res.objective >= relax.objective - 1e-6 * (
                1 + abs(relax.objective))
            assert res.root_bound == pytest.approx(
                relax.objective, rel=1e-6, abs=1e-6)

    def test_bound_and_incumbent_monotone(self, rng):
        seen_branching = 0
        for _ in range(10):
            case, x, horizon = random_instance(rng, max_binaries=10)
            model = build_milp(case, x, UcOptions(horizon=horizon))
            trace = []
            res = solve_milp(model, trace=trace)
            if len(trace) < 2:
                continue
            seen_branching += 1
            bounds = [b for b, _ in trace]
            incumbents = [i for _, i in trace]
            assert all(b2 >= b1 - 1e-9 for b1, b2 in zip(bounds, bounds[1:]))
            assert all(i2 <= i1 + 1e-9
                       for i1, i2 in zip(incumbents, incumbents[1:]))
            del res
        assert seen_branching >= 1


class TestWarmStart:
    def test_warm_basis_same_answer(self):
        case = single_bus_case(pmin=20.0, pmax=100.0, price=25.0)
        x1 = make_input(case, demand_total=80.0, hours=3)
        x2 = make_input(case, demand_total=95.0, hours=3)
        opts = UcOptions(horizon=3)
        m1 = build_milp(case, x1, opts)
        m2 = build_milp(case, x2, opts)
        r1 = solve_milp(m1)
        warm = solve_milp(m2, warm_basis=r1.root_basis)
        cold = solve_milp(m2)
        assert warm.status == cold.status == "optimal"
        assert warm.objective == pytest.approx(cold.objective, rel=1e-9)
