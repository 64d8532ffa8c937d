"""Generate the bundled 6-bus desk case and its sampler profiles."""

import json
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "ucproxy" / "data"

case = {
    "schema_version": 1,
    "name": "desk6",
    "base_mva": 100.0,
    "prices": {"voll": 1000.0, "wind_curtailment": 100.0},
    "buses": [
        {"id": 1, "shunt_mw": 0.0, "reference": True, "theta_ref": 0.0},
        {"id": 2}, {"id": 3}, {"id": 4}, {"id": 5}, {"id": 6},
    ],
    "lines": [
        {"id": 1, "from": 1, "to": 2, "susceptance": 5.0, "fmax_mw": 150.0},
        {"id": 2, "from": 2, "to": 3, "susceptance": 4.0, "fmax_mw": 90.0},
        {"id": 3, "from": 3, "to": 4, "susceptance": 4.0, "fmax_mw": 90.0,
         "outage_candidate": True, "zone": "A"},
        {"id": 4, "from": 4, "to": 5, "susceptance": 5.0, "fmax_mw": 110.0},
        {"id": 5, "from": 5, "to": 6, "susceptance": 4.0, "fmax_mw": 90.0},
        {"id": 6, "from": 6, "to": 1, "susceptance": 5.0, "fmax_mw": 140.0,
         "outage_candidate": True, "zone": "B"},
        {"id": 7, "from": 2, "to": 5, "susceptance": 3.0, "fmax_mw": 60.0,
         "outage_candidate": True, "zone": None},
    ],
    "generators": [
        {"id": 1, "bus": 1, "pmin_mw": 60.0, "pmax_mw": 200.0,
         "ramp_up_mw": 60.0, "ramp_down_mw": 60.0,
         "min_up_h": 6, "min_down_h": 4,
         "initial_on": True, "initial_hours": 24,
         "cost_curve": [[60.0, 840.0], [130.0, 2000.0], [200.0, 3400.0]],
         "startup": [[1, 700.0]]},
        {"id": 2, "bus": 3, "pmin_mw": 25.0, "pmax_mw": 100.0,
         "ramp_up_mw": 50.0, "ramp_down_mw": 50.0,
         "min_up_h": 3, "min_down_h": 3,
         "initial_on": False, "initial_hours": 12,
         "cost_curve": [[25.0, 580.0], [60.0, 1500.0], [100.0, 2700.0]],
         "startup": [[1, 300.0]]},
        {"id": 3, "bus": 5, "pmin_mw": 10.0, "pmax_mw": 80.0,
         "ramp_up_mw": 80.0, "ramp_down_mw": 80.0,
         "min_up_h": 1, "min_down_h": 1,
         "initial_on": False, "initial_hours": 24,
         "cost_curve": [[10.0, 420.0], [80.0, 3500.0]],
         "startup": [[1, 120.0], [4, 320.0]]},
    ],
    "wind": [
        {"id": 1, "bus": 4, "capacity_mw": 60.0},
        {"id": 2, "bus": 6, "capacity_mw": 45.0},
    ],
}

hour_shape = np.array([
    0.62, 0.58, 0.55, 0.54, 0.55, 0.60, 0.70, 0.82, 0.90, 0.93, 0.95, 0.96,
    0.94, 0.92, 0.91, 0.92, 0.95, 1.00, 0.99, 0.96, 0.90, 0.82, 0.74, 0.67,
])
bus_peaks = np.array([15.0, 70.0, 55.0, 60.0, 65.0, 45.0])
demand_profile = np.round(np.outer(hour_shape, bus_peaks), 3)

wind_shape_1 = np.array([
    0.70, 0.72, 0.74, 0.73, 0.70, 0.66, 0.60, 0.55, 0.50, 0.47, 0.45, 0.44,
    0.44, 0.46, 0.48, 0.52, 0.56, 0.60, 0.64, 0.68, 0.70, 0.72, 0.73, 0.71,
])
wind_shape_2 = np.array([
    0.62, 0.64, 0.67, 0.68, 0.66, 0.62, 0.57, 0.52, 0.48, 0.46, 0.45, 0.45,
    0.46, 0.48, 0.51, 0.55, 0.58, 0.62, 0.65, 0.67, 0.68, 0.67, 0.65, 0.63,
])
wind_profile = np.round(
    np.column_stack([wind_shape_1 * 60.0, wind_shape_2 * 45.0]), 3)

sampler = {
    "schema_version": 1,
    "demand_profile": demand_profile.tolist(),
    "wind_profile": wind_profile.tolist(),
    "demand_monthly": [1.00, 0.96, 0.90, 0.84, 0.78, 0.74,
                       0.76, 0.78, 0.82, 0.88, 0.94, 0.99],
    "wind_monthly": [0.78, 0.80, 0.92, 1.00, 0.95, 0.72,
                     0.60, 0.62, 0.80, 0.92, 0.95, 0.85],
    "demand_sigma": 0.02,
    "wind_sigma": 0.15,
    "zone_exclusive": True,
}

OUT.mkdir(parents=True, exist_ok=True)
(OUT / "desk6_case.json").write_text(json.dumps(case, indent=1) + "\n")
(OUT / "desk6_sampler.json").write_text(json.dumps(sampler, indent=1) + "\n")
print("wrote", OUT / "desk6_case.json")
print("wrote", OUT / "desk6_sampler.json")
