import dataclasses

import numpy as np
import pytest

from ucproxy.engine.branch_bound import solve_milp
from ucproxy.engine.simplex import SimplexCore
from ucproxy.formulation import (
    BuildError,
    UcOptions,
    build_milp,
    evaluate_cost,
    implied_starts,
    validate_solution,
)
from ucproxy.grid import case_from_dict, case_to_dict, full_topology
from ucproxy.milp import BINARY
from ucproxy.sampler import UcInput
from ucproxy.solve import solve_uc

from helpers import make_input, random_instance, ring3_case, single_bus_case


class TestBuildTinyModel:
    def test_one_gen_two_hours_matches_hand_construction(self):
        # pmin 20, pmax 100, price 30 $/MWh, initially off 24h
        case = single_bus_case(pmin=20.0, pmax=100.0, price=30.0,
                               startup=450.0)
        x = make_input(case, demand_total=70.0, hours=2)
        model = build_milp(case, x, UcOptions(horizon=2))

        kinds = np.array(model.var_kinds)
        assert (kinds == BINARY).sum() == 4          # 2 alpha + 2 start
        alpha = model.meta["alpha"]
        start = model.meta["start"]
        pg = model.meta["pg"]
        ls = model.meta["ls"]
        assert alpha.shape == start.shape == pg.shape == (1, 2)

        # the single balance row per hour reads pg + ls = demand
        for t in range(2):
            i = model.row_names.index(f"bal_0_0_{t}")
            got = dict(zip(model.row_cols[i].tolist(),
                           model.row_coefs[i].tolist()))
            assert got == {int(pg[0, t]): -1.0, int(ls[0, t]): -1.0}
            assert model.row_lo[i] == model.row_hi[i] == -70.0

        # generation link: pg - 20 alpha - seg = 0; cap: seg <= 80 alpha
        i = model.row_names.index("lnk_0_0")
        coefs = dict(zip(model.row_cols[i].tolist(),
                         model.row_coefs[i].tolist()))
        assert coefs[int(pg[0, 0])] == 1.0
        assert coefs[int(alpha[0, 0])] == -20.0
        assert model.row_lo[i] == model.row_hi[i] == 0.0
        i = model.row_names.index("cap_0_0")
        coefs = dict(zip(model.row_cols[i].tolist(),
                         model.row_coefs[i].tolist()))
        assert coefs[int(alpha[0, 0])] == -80.0
        assert model.row_hi[i] == 0.0

        # objective: alpha carries f(pmin) = 600, start carries 450,
        # the single segment prices 30 $/MWh, shedding 1000
        obj = model.objective_array()
        assert obj[alpha[0, 0]] == pytest.approx(600.0)
        assert obj[start[0, 0]] == pytest.approx(450.0)
        assert obj[ls[0, 0]] == pytest.approx(1000.0)

        # LS bounded by the demand column, theta fixed at the reference
        lb, ub = model.bounds_arrays()
        assert ub[ls[0, 0]] == pytest.approx(70.0)
        theta = model.meta["theta"]
        assert lb[theta[0, 0, 0]] == ub[theta[0, 0, 0]] == 0.0

    def test_n1_ring_adds_blocks_per_contingency(self):
        case = ring3_case()
        T = 2
        x = make_input(case, demand_total=60.0, hours=T,
                       spread=[0.0, 0.5, 0.5])
        base = build_milp(case, x, UcOptions(horizon=T, n1_enabled=False))
        secured = build_milp(case, x, UcOptions(horizon=T, n1_enabled=True))
        # per contingency and hour: 3 balance rows + 2 surviving flow rows
        per_block = (3 + 2) * T
        assert secured.n_rows == base.n_rows + 3 * per_block
        assert secured.meta["theta"].shape == (3, 4, T)
        assert tuple(secured.meta["contingency_ids"]) == (1, 2, 3)

    def test_zero_demand_bus_gets_zero_shed_bound(self, desk_case):
        x = make_input(desk_case, demand_total=120.0,
                       spread=[0.5, 0.5, 0, 0, 0, 0], hours=3)
        model = build_milp(desk_case, x, UcOptions(horizon=3))
        lb, ub = model.bounds_arrays()
        ls = model.meta["ls"]
        for bi in range(2, 6):
            for t in range(3):
                assert ub[ls[bi, t]] == 0.0

    def test_islanded_base_topology_rejected(self):
        case = ring3_case()
        x = make_input(case, demand_total=30.0, topology=[0, 0, 1])
        with pytest.raises(BuildError, match="islanded"):
            build_milp(case, x, UcOptions(horizon=2))

    def test_initial_min_up_fixes_alpha(self):
        # on for 2h of a 6h minimum: must stay on 4 more hours
        case = single_bus_case(pmin=10.0, pmax=80.0, min_up=6,
                               initial_on=True, initial_hours=2)
        x = make_input(case, demand_total=40.0, hours=6)
        model = build_milp(case, x, UcOptions(horizon=6))
        lb, ub = model.bounds_arrays()
        alpha = model.meta["alpha"]
        for t in range(4):
            assert lb[alpha[0, t]] == ub[alpha[0, t]] == 1.0
        assert lb[alpha[0, 4]] == 0.0 and ub[alpha[0, 4]] == 1.0


class TestEvaluateCost:
    def test_zero_system_costs_nothing(self):
        case = single_bus_case()
        x = make_input(case, demand_total=0.0, hours=2)
        breakdown = evaluate_cost(
            case, x,
            alpha=np.zeros((1, 2), dtype=int), p_g=np.zeros((1, 2)),
            wind_curtail=np.zeros((0, 2)), load_shed=np.zeros((1, 2)))
        assert breakdown.total == 0.0

    def test_hand_arithmetic_single_start(self):
        # 100 MW for 1 h at 20 $/MWh plus one cold start at 500 $
        case = single_bus_case(pmin=0.0, pmax=150.0, price=20.0,
                               startup=500.0, initial_on=False)
        x = make_input(case, demand_total=100.0, hours=1)
        breakdown = evaluate_cost(
            case, x,
            alpha=np.array([[1]]), p_g=np.array([[100.0]]),
            wind_curtail=np.zeros((0, 1)), load_shed=np.zeros((1, 1)))
        assert breakdown.generation == pytest.approx(2000.0)
        assert breakdown.startup == pytest.approx(500.0)
        assert breakdown.total == pytest.approx(2500.0)

    def test_off_with_dispatch_is_inconsistent(self):
        case = single_bus_case()
        x = make_input(case, demand_total=50.0, hours=1)
        with pytest.raises(ValueError, match="while off"):
            evaluate_cost(case, x,
                          alpha=np.array([[0]]), p_g=np.array([[10.0]]),
                          wind_curtail=np.zeros((0, 1)),
                          load_shed=np.zeros((1, 1)))

    def test_matches_solver_objective_on_random_instances(self, rng):
        checked = 0
        for _ in range(10):
            case, x, horizon = random_instance(rng, max_binaries=8)
            sol = solve_uc(case, x, UcOptions(horizon=horizon))
            if sol.status != "optimal":
                continue
            assert sol.total_cost == pytest.approx(
                sol.solver_objective, rel=1e-6, abs=1e-5)
            checked += 1
        assert checked >= 8

    def test_hot_vs_cold_startup_pricing(self):
        # step schedule: 120 $ if off < 4 h, 320 $ if off >= 4 h
        raw = case_to_dict(single_bus_case(initial_on=False))
        raw["generators"][0]["startup"] = [[1, 120.0], [4, 320.0]]
        raw["generators"][0]["initial_hours"] = 10
        case = case_from_dict(raw)
        x = make_input(case, demand_total=50.0, hours=8)
        # off 10h -> cold start at t0; off 2h mid-horizon -> hot restart
        alpha = np.array([[1, 1, 0, 0, 1, 1, 1, 1]])
        starts, t_off = implied_starts(case, alpha)
        assert starts[0].tolist() == [1, 0, 0, 0, 1, 0, 0, 0]
        assert t_off[0, 0] == 10 and t_off[0, 4] == 2
        p = np.where(alpha > 0, 50.0, 0.0)
        breakdown = evaluate_cost(case, x, alpha=alpha, p_g=p,
                                  wind_curtail=np.zeros((0, 8)),
                                  load_shed=np.zeros((1, 8)))
        assert breakdown.startup == pytest.approx(320.0 + 120.0)


class TestStartLinearization:
    def fix_and_solve(self, case, x, horizon, schedule):
        """Fix alpha to ``schedule`` and solve the LP relaxation."""
        model = build_milp(case, x, UcOptions(horizon=horizon))
        lb, ub = model.bounds_arrays()
        alpha = model.meta["alpha"]
        for gi in range(schedule.shape[0]):
            for t in range(schedule.shape[1]):
                j = int(alpha[gi, t])
                if lb[j] == ub[j] and lb[j] != schedule[gi, t]:
                    return None, None    # conflicts with initial obligations
                lb[j] = ub[j] = float(schedule[gi, t])
        core = SimplexCore.from_model(model)
        core.set_variable_bounds(lb, ub)
        status, iters = core.solve_primal()
        if status != "optimal":
            return None, None
        return model, core.extract_solution(status, iters)

    def test_start_equals_bilinear_product_on_random_schedules(self, rng):
        checked = 0
        for _ in range(12):
            case, x, horizon = random_instance(rng, max_binaries=10)
            n_d = case.n_gens
            schedule = rng.integers(0, 2, size=(n_d, horizon))
            model, sol = self.fix_and_solve(case, x, horizon, schedule)
            if model is None:
                continue
            starts = sol.x[model.meta["start"]]
            expected, _ = implied_starts(case, schedule)
            np.testing.assert_allclose(starts, expected, atol=1e-7)
            checked += 1
        assert checked >= 6

    def test_all_four_transition_patterns(self):
        case = single_bus_case(pmin=0.0, pmax=100.0, initial_on=False)
        # hour pairs covering 00, 01, 10, 11 transitions
        schedule = np.array([[0, 0, 1, 1, 0, 1]])
        x = make_input(case, demand_total=0.0, hours=6)
        model, sol = self.fix_and_solve(case, x, 6, schedule)
        starts = sol.x[model.meta["start"]][0]
        np.testing.assert_allclose(starts, [0, 0, 1, 0, 0, 1], atol=1e-9)


class TestValidateSolution:
    def test_optimal_solutions_report_clean(self, rng):
        checked = 0
        for _ in range(6):
            case, x, horizon = random_instance(rng, max_binaries=8)
            opts = UcOptions(horizon=horizon)
            sol = solve_uc(case, x, opts)
            if sol.status != "optimal":
                continue
            report = validate_solution(case, x, sol, opts)
            assert report.ok(1e-6), report.violations(1e-6)
            checked += 1
        assert checked >= 5

    def test_min_up_violation_is_named(self):
        case = single_bus_case(pmin=10.0, pmax=80.0, min_up=3,
                               initial_on=False)
        x = make_input(case, demand_total=40.0, hours=6)
        opts = UcOptions(horizon=6)
        sol = solve_uc(case, x, opts)
        bad = dataclasses.replace(sol)
        bad.alpha = sol.alpha.copy()
        bad.alpha[0, :] = [0, 1, 1, 0, 0, 0]       # on-run of 2 < min_up 3
        bad.start = implied_starts(case, bad.alpha)[0]
        report = validate_solution(case, x, bad, opts)
        fam = report.families["min_up"]
        assert fam.worst >= 1.0
        assert "gen 1" in fam.where

    def test_theta_perturbation_breaks_balance(self, desk_case):
        x = make_input(desk_case, demand_total=150.0, hours=2)
        opts = UcOptions(horizon=2)
        sol = solve_uc(desk_case, x, opts)
        assert sol.status == "optimal"
        bad = dataclasses.replace(sol)
        bad.theta = sol.theta.copy()
        bad.theta[2, 0, 0] += 0.1
        report = validate_solution(desk_case, x, bad, opts)
        # 0.1 rad swing across lines with b ~ 400-800 MW/rad
        assert report.families["balance"].worst > 1.0

    def test_bound_families_checked(self, desk_case):
        x = make_input(desk_case, demand_total=150.0, hours=2,
                       wind_level=0.5)
        opts = UcOptions(horizon=2)
        sol = solve_uc(desk_case, x, opts)
        bad = dataclasses.replace(sol)
        bad.wind_curtail = sol.wind_curtail.copy()
        bad.wind_curtail[0, 0] = x.wind[0, 0] + 5.0
        report = validate_solution(desk_case, x, bad, opts)
        assert report.families["curtail_bounds"].worst == pytest.approx(5.0)


class TestSolvedInvariants:
    def test_alpha_couples_dispatch(self, rng):
        for _ in range(5):
            case, x, horizon = random_instance(rng, max_binaries=8)
            sol = solve_uc(case, x, UcOptions(horizon=horizon))
            if sol.status != "optimal":
                continue
            for gi, g in enumerate(case.generators):
                on = sol.alpha[gi] == 1
                assert (np.abs(sol.p_g[gi][~on]) <= 1e-6).all()
                assert (sol.p_g[gi][on] >= g.pmin_mw - 1e-6).all()
                assert (sol.p_g[gi][on] <= g.pmax_mw + 1e-6).all()

    def test_curtail_and_shed_within_data(self, rng):
        for _ in range(5):
            case, x, horizon = random_instance(rng, max_binaries=8)
            sol = solve_uc(case, x, UcOptions(horizon=horizon))
            if sol.status != "optimal":
                continue
            assert (sol.wind_curtail >= -1e-7).all()
            assert (sol.wind_curtail <= x.wind[:horizon].T + 1e-7).all()
            assert (sol.load_shed >= -1e-7).all()
            assert (sol.load_shed <= x.demand[:horizon].T + 1e-7).all()

    def test_cost_monotone_in_demand(self):
        case = single_bus_case(pmin=5.0, pmax=120.0, price=24.0)
        costs = []
        for scale in (0.4, 0.6, 0.8, 1.0):
            x = make_input(case, demand_total=100.0 * scale, hours=4)
            sol = solve_uc(case, x, UcOptions(horizon=4))
            assert sol.status == "optimal"
            assert sol.load_shed.sum() <= 1e-9
            costs.append(sol.total_cost)
        assert all(b >= a - 1e-9 for a, b in zip(costs, costs[1:]))

    def test_balance_residual_everywhere(self, desk_case):
        x = make_input(desk_case, demand_total=200.0, hours=3,
                       wind_level=0.4)
        opts = UcOptions(horizon=3, n1_enabled=True)
        sol = solve_uc(desk_case, x, opts)
        assert sol.status == "optimal"
        report = validate_solution(desk_case, x, sol, opts)
        assert report.families["balance"].worst <= 1e-6
        assert report.families["flow"].worst <= 1e-6
