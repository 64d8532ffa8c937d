"""Shared test scaffolding: tiny cases, random instances, oracles."""

import itertools

import numpy as np

from ucproxy.engine.simplex import SimplexCore
from ucproxy.grid import case_from_dict
from ucproxy.sampler import UcInput


def single_bus_case(pmin=0.0, pmax=150.0, price=20.0, startup=500.0,
                    min_up=1, min_down=1, initial_on=False,
                    initial_hours=24):
    """One bus, one generator with a linear price, no network."""
    return case_from_dict({
        "schema_version": 1,
        "name": "one-bus",
        "base_mva": 100.0,
        "prices": {"voll": 1000.0, "wind_curtailment": 100.0},
        "buses": [{"id": 1, "reference": True}],
        "lines": [],
        "generators": [{
            "id": 1, "bus": 1, "pmin_mw": pmin, "pmax_mw": pmax,
            "ramp_up_mw": 1000.0, "ramp_down_mw": 1000.0,
            "min_up_h": min_up, "min_down_h": min_down,
            "initial_on": initial_on, "initial_hours": initial_hours,
            "cost_curve": [[pmin, pmin * price], [pmax, pmax * price]],
            "startup": [[1, startup]],
        }],
        "wind": [],
    })


def ring3_case():
    """Three buses in a ring, one generator, demand elsewhere."""
    return case_from_dict({
        "schema_version": 1,
        "name": "ring3",
        "base_mva": 100.0,
        "prices": {"voll": 1000.0, "wind_curtailment": 100.0},
        "buses": [{"id": 1, "reference": True}, {"id": 2}, {"id": 3}],
        "lines": [
            {"id": 1, "from": 1, "to": 2, "susceptance": 2.0, "fmax_mw": 80.0},
            {"id": 2, "from": 2, "to": 3, "susceptance": 3.0, "fmax_mw": 80.0},
            {"id": 3, "from": 3, "to": 1, "susceptance": 4.0, "fmax_mw": 80.0},
        ],
        "generators": [{
            "id": 1, "bus": 1, "pmin_mw": 0.0, "pmax_mw": 200.0,
            "ramp_up_mw": 500.0, "ramp_down_mw": 500.0,
            "min_up_h": 1, "min_down_h": 1,
            "initial_on": True, "initial_hours": 24,
            "cost_curve": [[0.0, 0.0], [200.0, 5000.0]],
            "startup": [[1, 100.0]],
        }],
        "wind": [],
    })


def make_input(case, demand_total, hours=24, month=1, sample_id=0,
               spread=None, wind_level=0.0, topology=None):
    """Constant-profile input; demand split over buses by ``spread``."""
    n_b, n_w = case.n_buses, case.n_wind
    if spread is None:
        spread = np.full(n_b, 1.0 / n_b)
    demand = np.zeros((24, n_b))
    demand[:hours] = demand_total * np.asarray(spread)[None, :]
    caps = np.array([w.capacity_mw for w in case.wind]) if n_w else np.zeros(0)
    wind = np.zeros((24, n_w))
    if n_w:
        wind[:hours] = wind_level * caps[None, :]
    if topology is None:
        topology = np.ones(case.n_lines, dtype=np.int8)
    return UcInput(demand=demand, wind=wind,
                   topology=np.asarray(topology, dtype=np.int8),
                   month=month, sample_id=sample_id)


def random_small_case(rng, n_buses=None, n_gens=None):
    """Random connected case small enough for exhaustive enumeration."""
    n_b = int(n_buses if n_buses is not None else rng.integers(2, 5))
    n_g = int(n_gens if n_gens is not None else rng.integers(1, 3))
    buses = [{"id": i + 1, "reference": i == 0} for i in range(n_b)]
    lines = []
    for i in range(1, n_b):           # random spanning tree
        j = int(rng.integers(0, i))
        lines.append({
            "id": len(lines) + 1, "from": j + 1, "to": i + 1,
            "susceptance": float(rng.uniform(2, 6)),
            "fmax_mw": float(rng.uniform(60, 160)),
        })
    for _ in range(int(rng.integers(0, 3))):   # extra chords
        a, b = rng.choice(n_b, size=2, replace=False)
        lines.append({
            "id": len(lines) + 1, "from": int(a) + 1, "to": int(b) + 1,
            "susceptance": float(rng.uniform(2, 6)),
            "fmax_mw": float(rng.uniform(60, 160)),
        })
    gens = []
    for g in range(n_g):
        pmin = float(rng.uniform(0, 30))
        pmax = pmin + float(rng.uniform(40, 120))
        mid = pmin + (pmax - pmin) * float(rng.uniform(0.3, 0.7))
        c1 = float(rng.uniform(10, 30))
        c2 = c1 + float(rng.uniform(0, 25))
        base = pmin * c1
        gens.append({
            "id": g + 1, "bus": int(rng.integers(1, n_b + 1)),
            "pmin_mw": pmin, "pmax_mw": pmax,
            "ramp_up_mw": float(rng.uniform(40, 200)),
            "ramp_down_mw": float(rng.uniform(40, 200)),
            "min_up_h": int(rng.integers(1, 3)),
            "min_down_h": int(rng.integers(1, 3)),
            "initial_on": bool(rng.integers(0, 2)),
            "initial_hours": int(rng.integers(1, 30)),
            "cost_curve": [[pmin, base],
                           [mid, base + (mid - pmin) * c1],
                           [pmax, base + (mid - pmin) * c1 + (pmax - mid) * c2]],
            "startup": [[1, float(rng.uniform(50, 400))]]
            if rng.random() < 0.7 else
            [[1, float(rng.uniform(30, 100))], [3, float(rng.uniform(150, 500))]],
        })
    wind = []
    if rng.random() < 0.5:
        wind.append({"id": 1, "bus": int(rng.integers(1, n_b + 1)),
                     "capacity_mw": float(rng.uniform(10, 50))})
    return case_from_dict({
        "schema_version": 1,
        "name": f"rand{int(rng.integers(1e6))}",
        "base_mva": 100.0,
        "prices": {"voll": 1000.0, "wind_curtailment": 100.0},
        "buses": buses, "lines": lines, "generators": gens, "wind": wind,
    })


def random_instance(rng, max_binaries=10):
    """(case, input, horizon) with n_gens * horizon <= max_binaries."""
    while True:
        case = random_small_case(rng)
        horizon = int(rng.integers(2, 5))
        if case.n_gens * horizon <= max_binaries:
            break
    total_cap = sum(g.pmax_mw for g in case.generators)
    demand = np.zeros((24, case.n_buses))
    share = rng.dirichlet(np.ones(case.n_buses))
    for t in range(horizon):
        demand[t] = share * total_cap * float(rng.uniform(0.25, 0.8))
    wind = np.zeros((24, case.n_wind))
    for wi, w in enumerate(case.wind):
        wind[:horizon, wi] = rng.uniform(0, w.capacity_mw, size=horizon)
    x = UcInput(demand=demand, wind=wind,
                topology=np.ones(case.n_lines, dtype=np.int8),
                month=int(rng.integers(1, 13)), sample_id=0)
    return case, x, horizon


def enumerate_commitments(model):
    """Brute-force oracle: try every 0/1 pattern of the alpha binaries.

    Each pattern is completed by a cold LP solve with the commitment
    variables fixed; returns (best objective, best x) over feasible
    patterns, or (None, None) if all are infeasible.
    """
    alpha_idx = model.meta["alpha"].ravel()
    lb0, ub0 = model.bounds_arrays()
    best_obj, best_x = None, None
    free = [int(j) for j in alpha_idx if lb0[j] < ub0[j]]
    fixed_pairs = [(int(j), lb0[j]) for j in alpha_idx if lb0[j] == ub0[j]]
    for bits in itertools.product((0.0, 1.0), repeat=len(free)):
        lb = lb0.copy()
        ub = ub0.copy()
        for j, b in zip(free, bits):
            lb[j] = ub[j] = b
        for j, v in fixed_pairs:
            lb[j] = ub[j] = v
        core = SimplexCore.from_model(model)
        core.set_variable_bounds(lb, ub)
        status, iters = core.solve_primal()
        if status != "optimal":
            continue
        sol = core.extract_solution(status, iters)
        if best_obj is None or sol.objective < best_obj - 1e-12:
            best_obj, best_x = sol.objective, sol.x
    return best_obj, best_x
