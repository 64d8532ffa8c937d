"""Static grid description and DC power-flow matrix construction.

A :class:`GridCase` holds the network, generator and price data read from
a versioned JSON case file.  From a case plus a daily topology vector
(and optionally a single-line contingency) an :class:`EffectiveNetwork`
is built: the nodal susceptance matrix ``B_bus``, the branch-flow matrix
``B_f`` and their phase-shift offsets, all scaled to MW/rad via the MVA
base.  Line flow convention: ``flow = b * (theta_from - theta_to + shift)``
in MW, positive from the *from* end.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

CASE_SCHEMA_VERSION = 1


class CaseError(ValueError):
    """Raised for a malformed or inconsistent case file."""


class TopologyError(ValueError):
    """Raised for an invalid topology vector / contingency combination."""


@dataclass(frozen=True)
class BusSpec:
    id: int
    shunt_mw: float = 0.0
    reference: bool = False
    theta_ref: float = 0.0


@dataclass(frozen=True)
class LineSpec:
    id: int
    from_bus: int
    to_bus: int
    susceptance: float          # p.u. on the system MVA base
    fmax_mw: float
    shift_rad: float = 0.0
    outage_candidate: bool = False
    zone: str | None = None     # None marks shared (interconnection) lines


@dataclass(frozen=True)
class GeneratorSpec:
    id: int
    bus: int
    pmin_mw: float
    pmax_mw: float
    ramp_up_mw: float
    ramp_down_mw: float
    min_up_h: int
    min_down_h: int
    initial_on: bool
    initial_hours: int          # hours already spent in the initial state
    cost_curve: tuple[tuple[float, float], ...]   # (MW, $/h) breakpoints
    startup: tuple[tuple[int, float], ...]        # (t_off threshold h, $) steps

    def startup_cost(self, t_off: int) -> float:
        """Start-up cost after ``t_off`` hours offline (step schedule)."""
        cost = 0.0
        for threshold, value in self.startup:
            if t_off >= threshold:
                cost = value
        return cost

    def cost_at(self, p_mw: float) -> float:
        """Piecewise-linear production cost ($/h) at output ``p_mw``."""
        pts = self.cost_curve
        if p_mw <= pts[0][0]:
            return pts[0][1]
        for (p0, c0), (p1, c1) in zip(pts, pts[1:]):
            if p_mw <= p1 + 1e-9:
                return c0 + (c1 - c0) * (p_mw - p0) / (p1 - p0)
        return pts[-1][1]


@dataclass(frozen=True)
class WindSpec:
    id: int
    bus: int
    capacity_mw: float


@dataclass(frozen=True)
class Prices:
    voll: float                 # $/MWh on shed load
    wind_curtailment: float     # $/MWh on spilled wind


@dataclass(frozen=True)
class GridCase:
    name: str
    base_mva: float
    buses: tuple[BusSpec, ...]
    lines: tuple[LineSpec, ...]
    generators: tuple[GeneratorSpec, ...]
    wind: tuple[WindSpec, ...]
    prices: Prices
    schema_version: int = CASE_SCHEMA_VERSION

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def n_gens(self) -> int:
        return len(self.generators)

    @property
    def n_wind(self) -> int:
        return len(self.wind)

    def bus_index(self, bus_id: int) -> int:
        return self._bus_pos[bus_id]

    @property
    def _bus_pos(self) -> dict[int, int]:
        pos = self.__dict__.get("_bus_pos_cache")
        if pos is None:
            pos = {b.id: i for i, b in enumerate(self.buses)}
            self.__dict__["_bus_pos_cache"] = pos
        return pos

    @property
    def reference_buses(self) -> tuple[BusSpec, ...]:
        return tuple(b for b in self.buses if b.reference)

    def outage_candidates(self) -> list[LineSpec]:
        return [ln for ln in self.lines if ln.outage_candidate]

    def fingerprint(self) -> str:
        """Stable content hash; indexes and archives refuse to mix cases."""
        digest = hashlib.sha256(
            json.dumps(case_to_dict(self), sort_keys=True).encode()
        )
        return digest.hexdigest()[:16]


@dataclass(frozen=True)
class EffectiveNetwork:
    """DC matrices for one topology and contingency.

    ``b_bus`` (n_b x n_b) and ``b_f`` (n_l x n_l? no: n_l x n_b) relate
    voltage angles to nodal injections and branch flows, both in MW with
    angles in radians.  Rows of ``b_f`` for lines out of service (by
    topology or by the contingency) are identically zero and their flow
    limits must be ignored by consumers.
    """

    b_bus: np.ndarray           # (n_b, n_b) MW/rad
    p_bus_shift: np.ndarray     # (n_b,) MW
    b_f: np.ndarray             # (n_l, n_b) MW/rad
    p_f_shift: np.ndarray       # (n_l,) MW
    gen_incidence: np.ndarray   # (n_b, n_d) 0/1
    in_service: np.ndarray      # (n_l,) bool, topology minus contingency
    islanded: bool
    contingency: int | None = None


def load_case(source) -> GridCase:
    """Load and validate a case from a JSON file path, file object or dict."""
    if isinstance(source, dict):
        raw = source
    elif hasattr(source, "read"):
        raw = json.load(source)
    else:
        with open(source) as fh:
            raw = json.load(fh)
    return case_from_dict(raw)


def case_from_dict(raw: dict) -> GridCase:
    version = raw.get("schema_version")
    if version != CASE_SCHEMA_VERSION:
        raise CaseError(f"unsupported case schema_version {version!r}")
    for section in ("buses", "lines", "generators", "wind", "prices"):
        if section not in raw:
            raise CaseError(f"case file missing section {section!r}")

    try:
        buses = tuple(
            BusSpec(
                id=int(b["id"]),
                shunt_mw=float(b.get("shunt_mw", 0.0)),
                reference=bool(b.get("reference", False)),
                theta_ref=float(b.get("theta_ref", 0.0)),
            )
            for b in raw["buses"]
        )
        lines = tuple(
            LineSpec(
                id=int(ln["id"]),
                from_bus=int(ln["from"]),
                to_bus=int(ln["to"]),
                susceptance=float(ln["susceptance"]),
                fmax_mw=float(ln["fmax_mw"]),
                shift_rad=float(ln.get("shift_rad", 0.0)),
                outage_candidate=bool(ln.get("outage_candidate", False)),
                zone=ln.get("zone"),
            )
            for ln in raw["lines"]
        )
        gens = tuple(
            GeneratorSpec(
                id=int(g["id"]),
                bus=int(g["bus"]),
                pmin_mw=float(g["pmin_mw"]),
                pmax_mw=float(g["pmax_mw"]),
                ramp_up_mw=float(g["ramp_up_mw"]),
                ramp_down_mw=float(g["ramp_down_mw"]),
                min_up_h=int(g["min_up_h"]),
                min_down_h=int(g["min_down_h"]),
                initial_on=bool(g["initial_on"]),
                initial_hours=int(g["initial_hours"]),
                cost_curve=tuple((float(p), float(c)) for p, c in g["cost_curve"]),
                startup=tuple((int(h), float(c)) for h, c in g["startup"]),
            )
            for g in raw["generators"]
        )
        wind = tuple(
            WindSpec(id=int(w["id"]), bus=int(w["bus"]),
                     capacity_mw=float(w["capacity_mw"]))
            for w in raw["wind"]
        )
        prices = Prices(
            voll=float(raw["prices"]["voll"]),
            wind_curtailment=float(raw["prices"]["wind_curtailment"]),
        )
        base_mva = float(raw.get("base_mva", 100.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseError(f"malformed case field: {exc}") from exc

    case = GridCase(
        name=str(raw.get("name", "unnamed")),
        base_mva=base_mva,
        buses=buses,
        lines=lines,
        generators=gens,
        wind=wind,
        prices=prices,
    )
    _validate_case(case)
    return case


def case_to_dict(case: GridCase) -> dict:
    """Inverse of :func:`case_from_dict`; canonical form for hashing/saving."""
    return {
        "schema_version": case.schema_version,
        "name": case.name,
        "base_mva": case.base_mva,
        "prices": {"voll": case.prices.voll,
                   "wind_curtailment": case.prices.wind_curtailment},
        "buses": [
            {"id": b.id, "shunt_mw": b.shunt_mw, "reference": b.reference,
             "theta_ref": b.theta_ref}
            for b in case.buses
        ],
        "lines": [
            {"id": ln.id, "from": ln.from_bus, "to": ln.to_bus,
             "susceptance": ln.susceptance, "fmax_mw": ln.fmax_mw,
             "shift_rad": ln.shift_rad, "outage_candidate": ln.outage_candidate,
             "zone": ln.zone}
            for ln in case.lines
        ],
        "generators": [
            {"id": g.id, "bus": g.bus, "pmin_mw": g.pmin_mw, "pmax_mw": g.pmax_mw,
             "ramp_up_mw": g.ramp_up_mw, "ramp_down_mw": g.ramp_down_mw,
             "min_up_h": g.min_up_h, "min_down_h": g.min_down_h,
             "initial_on": g.initial_on, "initial_hours": g.initial_hours,
             "cost_curve": [list(pt) for pt in g.cost_curve],
             "startup": [list(st) for st in g.startup]}
            for g in case.generators
        ],
        "wind": [
            {"id": w.id, "bus": w.bus, "capacity_mw": w.capacity_mw}
            for w in case.wind
        ],
    }


def _validate_case(case: GridCase) -> None:
    bus_ids = {b.id for b in case.buses}
    if len(bus_ids) != len(case.buses):
        raise CaseError("duplicate bus ids")
    if not any(b.reference for b in case.buses):
        raise CaseError("no reference bus declared")
    if case.base_mva <= 0:
        raise CaseError("base_mva must be positive")

    line_ids = set()
    for ln in case.lines:
        if ln.id in line_ids:
            raise CaseError(f"duplicate line id {ln.id}")
        line_ids.add(ln.id)
        for end in (ln.from_bus, ln.to_bus):
            if end not in bus_ids:
                raise CaseError(f"line {ln.id} references unknown bus {end}")
        if ln.from_bus == ln.to_bus:
            raise CaseError(f"line {ln.id} is a self-loop")
        if ln.fmax_mw <= 0:
            raise CaseError(f"line {ln.id} has non-positive flow limit")
        if ln.susceptance <= 0:
            raise CaseError(f"line {ln.id} has non-positive susceptance")

    gen_ids = set()
    for g in case.generators:
        if g.id in gen_ids:
            raise CaseError(f"duplicate generator id {g.id}")
        gen_ids.add(g.id)
        if g.bus not in bus_ids:
            raise CaseError(f"generator {g.id} references unknown bus {g.bus}")
        if not 0 <= g.pmin_mw <= g.pmax_mw:
            raise CaseError(
                f"generator {g.id} violates 0 <= pmin <= pmax "
                f"({g.pmin_mw}, {g.pmax_mw})")
        if g.min_up_h < 1 or g.min_down_h < 1:
            raise CaseError(f"generator {g.id} min up/down times must be >= 1")
        if g.ramp_up_mw <= 0 or g.ramp_down_mw <= 0:
            raise CaseError(f"generator {g.id} ramps must be positive")
        _validate_cost_curve(g)
        _validate_startup(g)

    wind_ids = set()
    for w in case.wind:
        if w.id in wind_ids:
            raise CaseError(f"duplicate wind id {w.id}")
        wind_ids.add(w.id)
        if w.bus not in bus_ids:
            raise CaseError(f"wind {w.id} references unknown bus {w.bus}")
        if w.capacity_mw <= 0:
            raise CaseError(f"wind {w.id} capacity must be positive")

    if case.prices.voll < 0 or case.prices.wind_curtailment < 0:
        raise CaseError("prices must be non-negative")


def _validate_cost_curve(g: GeneratorSpec) -> None:
    pts = g.cost_curve
    if len(pts) < 1:
        raise CaseError(f"generator {g.id} has empty cost curve")
    if abs(pts[0][0] - g.pmin_mw) > 1e-9 or abs(pts[-1][0] - g.pmax_mw) > 1e-9:
        raise CaseError(
            f"generator {g.id} cost curve must span [pmin, pmax]")
    if len(pts) == 1 and g.pmin_mw != g.pmax_mw:
        raise CaseError(f"generator {g.id} needs >= 2 cost breakpoints")
    prev_slope = -math.inf
    for (p0, c0), (p1, c1) in zip(pts, pts[1:]):
        if p1 <= p0:
            raise CaseError(
                f"generator {g.id} cost breakpoints not strictly increasing")
        slope = (c1 - c0) / (p1 - p0)
        if slope < prev_slope - 1e-9:
            raise CaseError(f"generator {g.id} cost curve not convex")
        prev_slope = slope


def _validate_startup(g: GeneratorSpec) -> None:
    if not g.startup:
        raise CaseError(f"generator {g.id} has empty startup schedule")
    prev_h, prev_c = 0, -math.inf
    for h, c in g.startup:
        if h <= prev_h and prev_c > -math.inf:
            raise CaseError(
                f"generator {g.id} startup thresholds not increasing")
        if c < prev_c:
            raise CaseError(
                f"generator {g.id} startup schedule not non-decreasing")
        if c < 0:
            raise CaseError(f"generator {g.id} startup cost negative")
        prev_h, prev_c = h, c


# ---------------------------------------------------------------------------
# Topology handling


def full_topology(case: GridCase) -> np.ndarray:
    """All-lines-in-service topology vector."""
    return np.ones(case.n_lines, dtype=np.int8)


def check_topology(case: GridCase, top: np.ndarray) -> np.ndarray:
    top = np.asarray(top, dtype=np.int8)
    if top.shape != (case.n_lines,):
        raise TopologyError(
            f"topology length {top.shape} does not match {case.n_lines} lines")
    if not np.isin(top, (0, 1)).all():
        raise TopologyError("topology entries must be 0 or 1")
    return top


def _connected(case: GridCase, active: np.ndarray) -> bool:
    """True when all buses are joined by the ``active`` lines (BFS)."""
    n = case.n_buses
    if n <= 1:
        return True
    adj: list[list[int]] = [[] for _ in range(n)]
    for ln, alive in zip(case.lines, active):
        if alive:
            i, j = case.bus_index(ln.from_bus), case.bus_index(ln.to_bus)
            adj[i].append(j)
            adj[j].append(i)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                count += 1
                stack.append(v)
    return count == n


def build_effective_network(
    case: GridCase,
    top: np.ndarray,
    contingency: int | None = None,
) -> EffectiveNetwork:
    """Assemble DC matrices for ``top`` with one optional line outage.

    ``contingency`` is a line id that must be in service under ``top``;
    passing the id of an already-out line is an error.  Matrices are in
    MW/rad (susceptance scaled by the MVA base).
    """
    top = check_topology(case, top)
    line_pos = {ln.id: k for k, ln in enumerate(case.lines)}
    active = top.astype(bool).copy()
    if contingency is not None:
        if contingency not in line_pos:
            raise TopologyError(f"unknown contingency line id {contingency}")
        k = line_pos[contingency]
        if not active[k]:
            raise TopologyError(
                f"contingency line {contingency} is already out of service")
        active[k] = False

    n_b, n_l = case.n_buses, case.n_lines
    b_bus = np.zeros((n_b, n_b))
    p_bus_shift = np.zeros(n_b)
    b_f = np.zeros((n_l, n_b))
    p_f_shift = np.zeros(n_l)

    for k, ln in enumerate(case.lines):
        if not active[k]:
            continue
        b = ln.susceptance * case.base_mva       # MW/rad
        i, j = case.bus_index(ln.from_bus), case.bus_index(ln.to_bus)
        b_f[k, i] = b
        b_f[k, j] = -b
        p_f_shift[k] = b * ln.shift_rad
        b_bus[i, i] += b
        b_bus[j, j] += b
        b_bus[i, j] -= b
        b_bus[j, i] -= b
        # injection at the from end carries +shift, the to end the opposite
        p_bus_shift[i] += b * ln.shift_rad
        p_bus_shift[j] -= b * ln.shift_rad

    gen_incidence = np.zeros((n_b, case.n_gens))
    for gi, g in enumerate(case.generators):
        gen_incidence[case.bus_index(g.bus), gi] = 1.0

    return EffectiveNetwork(
        b_bus=b_bus,
        p_bus_shift=p_bus_shift,
        b_f=b_f,
        p_f_shift=p_f_shift,
        gen_incidence=gen_incidence,
        in_service=active,
        islanded=not _connected(case, active),
        contingency=contingency,
    )


def enumerate_contingencies(
    case: GridCase, top: np.ndarray
) -> tuple[list[int], list[int]]:
    """In-service lines whose single removal keeps the network connected.

    Returns ``(usable, islanding)``: line ids eligible as N-1 contingencies
    and those excluded because their removal islands the surviving graph.
    """
    top = check_topology(case, top)
    usable: list[int] = []
    islanding: list[int] = []
    base = top.astype(bool)
    for k, ln in enumerate(case.lines):
        if not base[k]:
            continue
        trial = base.copy()
        trial[k] = False
        if _connected(case, trial):
            usable.append(ln.id)
        else:
            islanding.append(ln.id)
    return usable, islanding
