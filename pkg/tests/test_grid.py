import json

import networkx as nx
import numpy as np
import pytest

from ucproxy.grid import (
    CaseError,
    TopologyError,
    build_effective_network,
    case_from_dict,
    case_to_dict,
    enumerate_contingencies,
    full_topology,
    load_case,
)

from helpers import ring3_case, random_small_case


def three_bus_case():
    return case_from_dict({
        "schema_version": 1,
        "name": "tri",
        "base_mva": 100.0,
        "prices": {"voll": 1000.0, "wind_curtailment": 100.0},
        "buses": [{"id": 1, "reference": True}, {"id": 2}, {"id": 3}],
        "lines": [
            {"id": 1, "from": 1, "to": 2, "susceptance": 2.0, "fmax_mw": 50.0},
            {"id": 2, "from": 2, "to": 3, "susceptance": 3.0, "fmax_mw": 50.0},
        ],
        "generators": [],
        "wind": [],
    })


class TestLoadCase:
    def test_desk_case_contents(self, desk_case):
        assert desk_case.n_buses == 6
        assert desk_case.n_lines == 7
        assert desk_case.n_gens == 3
        assert desk_case.n_wind == 2

    def test_dangling_bus_reference(self, desk_case):
        raw = case_to_dict(desk_case)
        raw["lines"][0]["to"] = 99
        with pytest.raises(CaseError, match="99"):
            case_from_dict(raw)

    def test_pmin_above_pmax_names_generator(self, desk_case):
        raw = case_to_dict(desk_case)
        raw["generators"][1]["pmin_mw"] = raw["generators"][1]["pmax_mw"] + 1
        with pytest.raises(CaseError, match="generator 2"):
            case_from_dict(raw)

    def test_missing_section(self):
        with pytest.raises(CaseError, match="wind"):
            case_from_dict({"schema_version": 1, "buses": [], "lines": [],
                            "generators": [], "prices": {}})

    def test_no_reference_bus(self, desk_case):
        raw = case_to_dict(desk_case)
        for b in raw["buses"]:
            b["reference"] = False
        with pytest.raises(CaseError, match="reference"):
            case_from_dict(raw)

    def test_wrong_schema_version(self, desk_case):
        raw = case_to_dict(desk_case)
        raw["schema_version"] = 99
        with pytest.raises(CaseError, match="schema_version"):
            case_from_dict(raw)

    def test_file_round_trip(self, desk_case, tmp_path):
        path = tmp_path / "case.json"
        path.write_text(json.dumps(case_to_dict(desk_case)))
        again = load_case(path)
        assert again == desk_case
        assert again.fingerprint() == desk_case.fingerprint()

    def test_nonconvex_cost_curve_rejected(self, desk_case):
        raw = case_to_dict(desk_case)
        raw["generators"][0]["cost_curve"] = [[60.0, 840.0], [130.0, 3000.0],
                                              [200.0, 3400.0]]
        with pytest.raises(CaseError, match="convex"):
            case_from_dict(raw)

    def test_decreasing_startup_rejected(self, desk_case):
        raw = case_to_dict(desk_case)
        raw["generators"][2]["startup"] = [[1, 300.0], [4, 100.0]]
        with pytest.raises(CaseError, match="startup"):
            case_from_dict(raw)


class TestEffectiveNetwork:
    def test_hand_computed_susceptance_matrix(self):
        # two lines: b=2 pu and 3 pu on a 100 MVA base -> 200 and 300 MW/rad
        case = three_bus_case()
        net = build_effective_network(case, full_topology(case))
        expected = np.array([
            [200.0, -200.0, 0.0],
            [-200.0, 500.0, -300.0],
            [0.0, -300.0, 300.0],
        ])
        np.testing.assert_array_equal(net.b_bus, expected)
        assert not net.islanded

    def test_flow_rows_match_line_formula(self, rng):
        for _ in range(20):
            case = random_small_case(rng)
            top = full_topology(case)
            net = build_effective_network(case, top)
            theta = rng.uniform(-0.5, 0.5, case.n_buses)
            for k, ln in enumerate(case.lines):
                i = case.bus_index(ln.from_bus)
                j = case.bus_index(ln.to_bus)
                direct = ln.susceptance * case.base_mva * (
                    theta[i] - theta[j] + ln.shift_rad)
                assert net.b_f[k] @ theta + net.p_f_shift[k] == pytest.approx(
                    direct, abs=1e-12)

    def test_islanding_flag_when_only_line_removed(self):
        case = three_bus_case()
        top = np.array([1, 0])          # line 2 out: bus 3 disconnected
        net = build_effective_network(case, top)
        assert net.islanded
        assert np.all(net.b_f[1] == 0.0)

    def test_contingency_on_out_line_rejected(self):
        case = three_bus_case()
        with pytest.raises(TopologyError, match="already out"):
            build_effective_network(case, np.array([1, 0]), contingency=2)

    def test_deterministic_bit_identical(self, desk_case):
        top = full_topology(desk_case)
        a = build_effective_network(desk_case, top, contingency=3)
        b = build_effective_network(desk_case, top, contingency=3)
        assert np.array_equal(a.b_bus, b.b_bus)
        assert np.array_equal(a.b_f, b.b_f)
        assert np.array_equal(a.p_bus_shift, b.p_bus_shift)

    def test_removal_never_adds_nonzeros(self, desk_case, rng):
        top = full_topology(desk_case)
        base = build_effective_network(desk_case, top)
        base_nnz = np.count_nonzero(base.b_bus)
        for ln in desk_case.lines:
            reduced = build_effective_network(desk_case, top, contingency=ln.id)
            assert np.count_nonzero(reduced.b_bus) <= base_nnz

    def test_phase_shift_enters_offsets(self):
        raw = case_to_dict(three_bus_case())
        raw["lines"][0]["shift_rad"] = 0.05
        case = case_from_dict(raw)
        net = build_effective_network(case, full_topology(case))
        assert net.p_f_shift[0] == pytest.approx(200.0 * 0.05)
        assert net.p_bus_shift[0] == pytest.approx(200.0 * 0.05)
        assert net.p_bus_shift[1] == pytest.approx(-200.0 * 0.05)


class TestEnumerateContingencies:
    def test_desk_case_has_no_bridges(self, desk_case):
        usable, islanding = enumerate_contingencies(
            desk_case, full_topology(desk_case))
        assert usable == [ln.id for ln in desk_case.lines]
        assert islanding == []

    def test_ring_of_three(self):
        case = ring3_case()
        usable, islanding = enumerate_contingencies(case, full_topology(case))
        assert usable == [1, 2, 3]
        assert islanding == []

    def test_path_of_two(self):
        case = three_bus_case()
        usable, islanding = enumerate_contingencies(case, full_topology(case))
        assert usable == []
        assert islanding == [1, 2]

    def test_matches_networkx_bridges(self, rng):
        for _ in range(25):
            case = random_small_case(rng)
            graph = nx.MultiGraph()
            graph.add_nodes_from(b.id for b in case.buses)
            for ln in case.lines:
                graph.add_edge(ln.from_bus, ln.to_bus, key=ln.id)
            bridges = set()
            for u, v in nx.bridges(nx.Graph(graph)):
                # a simple-graph bridge is a real bridge only if single
                if graph.number_of_edges(u, v) == 1:
                    for ln in case.lines:
                        if {ln.from_bus, ln.to_bus} == {u, v}:
                            bridges.add(ln.id)
            usable, islanding = enumerate_contingencies(
                case, full_topology(case))
            assert set(islanding) == bridges
            assert set(usable) == {ln.id for ln in case.lines} - bridges
