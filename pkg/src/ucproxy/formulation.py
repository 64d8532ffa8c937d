"""Day-ahead commitment MILP: build, cost evaluation, and validation.

``build_milp`` translates (case, daily input, options) into a
:class:`~ucproxy.milp.MilpModel`: hourly power balance per network
variant, line-flow limits, commitment-coupled generation bounds with
convex piecewise-linear costs on segment variables, start indicators
linearizing the on-switch product, minimum up/down windows over the
start indicators, optional ramp limits, and step-schedule start-up
costs.  With N-1 enabled, each non-islanding single-line outage gets
its own angle block and flow/balance rows while commitment, dispatch,
curtailment and shedding are shared across variants (preventive
security).

``evaluate_cost`` reprices a solution from its raw matrices only, and
``validate_solution`` checks every constraint family directly, so both
are independent of whatever the solver reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ucproxy.grid import (
    GridCase,
    build_effective_network,
    enumerate_contingencies,
)
from ucproxy.milp import BINARY, INF, MilpModel

THETA_MAX = math.pi


class BuildError(ValueError):
    """Raised when a model cannot be built (e.g. islanded base topology)."""


@dataclass(frozen=True)
class UcOptions:
    horizon: int = 24
    n1_enabled: bool = False
    contingency_lines: tuple[int, ...] | None = None
    gap_tol: float = 1e-6
    ramps_enabled: bool = True
    ramp_big_m: float | None = None   # None: per-generator pmax

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.gap_tol < 0:
            raise ValueError("gap tolerance must be >= 0")


@dataclass
class CostBreakdown:
    generation: float
    startup: float
    curtailment: float
    shed: float

    @property
    def total(self) -> float:
        return self.generation + self.startup + self.curtailment + self.shed


@dataclass
class UcSolution:
    """Solved schedule; shapes follow the case and horizon T.

    alpha, start, p_g: (n_gens, T); wind_curtail: (n_wind, T);
    load_shed: (n_buses, T); theta: (n_buses, n_contingencies + 1, T)
    with variant 0 the no-contingency network.
    """

    alpha: np.ndarray
    start: np.ndarray
    p_g: np.ndarray
    wind_curtail: np.ndarray
    load_shed: np.ndarray
    theta: np.ndarray
    contingency_ids: tuple[int, ...]
    total_cost: float
    breakdown: CostBreakdown
    status: str
    solve_time_s: float = float("nan")
    build_time_s: float = float("nan")
    solver_objective: float = float("nan")
    gap: float = float("nan")
    nodes: int = 0


@dataclass
class FamilyViolation:
    worst: float = 0.0
    where: str = ""

    def update(self, amount: float, where: str) -> None:
        if amount > self.worst:
            self.worst = amount
            self.where = where


@dataclass
class ViolationReport:
    families: dict[str, FamilyViolation] = field(default_factory=dict)

    def family(self, name: str) -> FamilyViolation:
        return self.families.setdefault(name, FamilyViolation())

    @property
    def worst(self) -> float:
        if not self.families:
            return 0.0
        return max(v.worst for v in self.families.values())

    def violations(self, tol: float = 1e-6) -> dict[str, FamilyViolation]:
        return {k: v for k, v in self.families.items() if v.worst > tol}

    def ok(self, tol: float = 1e-6) -> bool:
        return not self.violations(tol)


def _initial_history(gen) -> tuple[int, int]:
    """(hours alpha must stay fixed at the initial state, that state)."""
    if gen.initial_on:
        remaining = max(gen.min_up_h - gen.initial_hours, 0)
        return remaining, 1
    remaining = max(gen.min_down_h - gen.initial_hours, 0)
    return remaining, 0


def _check_input_shapes(case: GridCase, x) -> None:
    if x.demand.shape != (24, case.n_buses):
        raise BuildError(
            f"demand shape {x.demand.shape} != (24, {case.n_buses})")
    if x.wind.shape != (24, case.n_wind):
        raise BuildError(f"wind shape {x.wind.shape} != (24, {case.n_wind})")
    if len(x.topology) != case.n_lines:
        raise BuildError(
            f"topology length {len(x.topology)} != {case.n_lines} lines")


def build_milp(case: GridCase, x, opts: UcOptions | None = None) -> MilpModel:
    """Assemble the commitment MILP for one daily input."""
    opts = opts or UcOptions()
    _check_input_shapes(case, x)
    T = opts.horizon
    if T > x.demand.shape[0]:
        raise BuildError(f"horizon {T} exceeds forecast length")

    base = build_effective_network(case, x.topology)
    if base.islanded:
        raise BuildError("base topology is islanded; no balance is possible")

    networks = [base]
    contingency_ids: list[int] = []
    if opts.n1_enabled:
        if opts.contingency_lines is not None:
            usable, islanding = enumerate_contingencies(case, x.topology)
            usable_set = set(usable)
            wanted = [c for c in opts.contingency_lines if c in usable_set]
        else:
            wanted, _ = enumerate_contingencies(case, x.topology)
        for line_id in wanted:
            networks.append(build_effective_network(case, x.topology, line_id))
            contingency_ids.append(line_id)
    n_var = len(networks)

    n_b, n_l = case.n_buses, case.n_lines
    n_d, n_w = case.n_gens, case.n_wind
    model = MilpModel(f"uc_{case.name}_s{getattr(x, 'sample_id', 0)}")

    # --- variables: binaries first so the MPS integer block is contiguous
    alpha = np.empty((n_d, T), dtype=np.int64)
    start = np.empty((n_d, T), dtype=np.int64)
    for gi, g in enumerate(case.generators):
        hold, state = _initial_history(g)
        cost0 = g.cost_curve[0][1]
        for t in range(T):
            lo, hi = (0.0, 1.0)
            if t < hold:
                lo = hi = float(state)
            alpha[gi, t] = model.add_var(
                f"a_{gi}_{t}", kind=BINARY, lb=lo, ub=hi, obj=cost0,
                hour=t, entity=f"gen{g.id}")
    single_step = [len(g.startup) == 1 and g.startup[0][0] <= 1
                   for g in case.generators]
    for gi, g in enumerate(case.generators):
        su_obj = g.startup[0][1] if single_step[gi] else 0.0
        for t in range(T):
            start[gi, t] = model.add_var(
                f"st_{gi}_{t}", kind=BINARY, obj=su_obj, ub=1.0,
                hour=t, entity=f"gen{g.id}")

    pg = np.empty((n_d, T), dtype=np.int64)
    seg_idx: list[np.ndarray] = []
    for gi, g in enumerate(case.generators):
        pts = g.cost_curve
        n_seg = len(pts) - 1
        segs = np.empty((n_seg, T), dtype=np.int64)
        for t in range(T):
            pg[gi, t] = model.add_var(
                f"p_{gi}_{t}", ub=g.pmax_mw, hour=t, entity=f"gen{g.id}")
        for k in range(n_seg):
            (p0, c0), (p1, c1) = pts[k], pts[k + 1]
            slope = (c1 - c0) / (p1 - p0)
            for t in range(T):
                segs[k, t] = model.add_var(
                    f"sg_{gi}_{k}_{t}", ub=p1 - p0, obj=slope,
                    hour=t, entity=f"gen{g.id}")
        seg_idx.append(segs)

    wc = np.empty((n_w, T), dtype=np.int64)
    for wi, w in enumerate(case.wind):
        for t in range(T):
            wc[wi, t] = model.add_var(
                f"wc_{wi}_{t}", ub=float(x.wind[t, wi]),
                obj=case.prices.wind_curtailment, hour=t, entity=f"wind{w.id}")
    ls = np.empty((n_b, T), dtype=np.int64)
    for bi, b in enumerate(case.buses):
        for t in range(T):
            ls[bi, t] = model.add_var(
                f"ls_{bi}_{t}", ub=float(x.demand[t, bi]),
                obj=case.prices.voll, hour=t, entity=f"bus{b.id}")

    theta = np.empty((n_b, n_var, T), dtype=np.int64)
    for li in range(n_var):
        for bi, b in enumerate(case.buses):
            lo, hi = (-THETA_MAX, THETA_MAX)
            if b.reference:
                lo = hi = b.theta_ref
            for t in range(T):
                theta[bi, li, t] = model.add_var(
                    f"th_{bi}_{li}_{t}", lb=lo, ub=hi,
                    hour=t, entity=f"bus{b.id}")

    sucost = np.full((n_d, T), -1, dtype=np.int64)
    for gi, g in enumerate(case.generators):
        if single_step[gi]:
            continue
        for t in range(T):
            sucost[gi, t] = model.add_var(
                f"su_{gi}_{t}", obj=1.0, hour=t, entity=f"gen{g.id}")

    # --- wind-to-bus aggregation used as balance constants
    wind_at_bus = np.zeros((T, n_b))
    for wi, w in enumerate(case.wind):
        wind_at_bus[:, case.bus_index(w.bus)] += x.wind[:T, wi]
    shunt = np.array([b.shunt_mw for b in case.buses])

    # --- power balance and flow limits per network variant
    for li, net in enumerate(networks):
        for t in range(T):
            for bi in range(n_b):
                cols: list[int] = []
                coefs: list[float] = []
                nz = np.nonzero(net.b_bus[bi])[0]
                cols.extend(theta[j, li, t] for j in nz)
                coefs.extend(net.b_bus[bi, nz])
                for gi, g in enumerate(case.generators):
                    if case.bus_index(g.bus) == bi:
                        cols.append(pg[gi, t])
                        coefs.append(-1.0)
                for wi, w in enumerate(case.wind):
                    if case.bus_index(w.bus) == bi:
                        cols.append(wc[wi, t])
                        coefs.append(1.0)
                cols.append(ls[bi, t])
                coefs.append(-1.0)
                rhs = (wind_at_bus[t, bi] - x.demand[t, bi]
                       - shunt[bi] - net.p_bus_shift[bi])
                model.add_row(f"bal_{bi}_{li}_{t}", cols, coefs,
                              lo=rhs, hi=rhs)
        for k, line in enumerate(case.lines):
            if not net.in_service[k]:
                continue
            nz = np.nonzero(net.b_f[k])[0]
            for t in range(T):
                model.add_row(
                    f"flw_{k}_{li}_{t}",
                    [theta[j, li, t] for j in nz],
                    net.b_f[k, nz],
                    lo=-line.fmax_mw - net.p_f_shift[k],
                    hi=line.fmax_mw - net.p_f_shift[k],
                )

    # --- generator coupling, start logic, min up/down, ramps, startup cost
    for gi, g in enumerate(case.generators):
        segs = seg_idx[gi]
        n_seg = segs.shape[0]
        span = g.pmax_mw - g.pmin_mw
        hold, state = _initial_history(g)
        del hold, state
        init = 1.0 if g.initial_on else 0.0
        for t in range(T):
            cols = [pg[gi, t], alpha[gi, t]]
            coefs = [1.0, -g.pmin_mw]
            cols.extend(segs[:, t])
            coefs.extend([-1.0] * n_seg)
            model.add_row(f"lnk_{gi}_{t}", cols, coefs, lo=0.0, hi=0.0)
            if n_seg:
                cols = list(segs[:, t]) + [alpha[gi, t]]
                coefs = [1.0] * n_seg + [-span]
                model.add_row(f"cap_{gi}_{t}", cols, coefs, hi=0.0)

            # start >= a_t - a_{t-1}; start <= a_t; start <= 1 - a_{t-1}
            if t == 0:
                model.add_row(f"stA_{gi}_{t}",
                              [start[gi, t], alpha[gi, t]], [1.0, -1.0],
                              lo=-init)
                model.add_row(f"stC_{gi}_{t}", [start[gi, t]], [1.0],
                              hi=1.0 - init)
            else:
                model.add_row(
                    f"stA_{gi}_{t}",
                    [start[gi, t], alpha[gi, t], alpha[gi, t - 1]],
                    [1.0, -1.0, 1.0], lo=0.0)
                model.add_row(
                    f"stC_{gi}_{t}",
                    [start[gi, t], alpha[gi, t - 1]], [1.0, 1.0], hi=1.0)
            model.add_row(f"stB_{gi}_{t}",
                          [start[gi, t], alpha[gi, t]], [1.0, -1.0], hi=0.0)

            # minimum up: starts within the trailing window keep the unit on
            w0 = max(0, t - g.min_up_h + 1)
            cols = list(start[gi, w0:t + 1]) + [alpha[gi, t]]
            coefs = [1.0] * (t + 1 - w0) + [-1.0]
            model.add_row(f"up_{gi}_{t}", cols, coefs, hi=0.0)

            # minimum down: no start within min_down of being on
            w0 = max(0, t - g.min_down_h + 1)
            cols = list(start[gi, w0:t + 1])
            coefs = [1.0] * (t + 1 - w0)
            t_ref = t - g.min_down_h
            if t_ref >= 0:
                cols.append(alpha[gi, t_ref])
                coefs.append(1.0)
                model.add_row(f"dn_{gi}_{t}", cols, coefs, hi=1.0)
            else:
                model.add_row(f"dn_{gi}_{t}", cols, coefs, hi=1.0 - init)

            if opts.ramps_enabled and t >= 1:
                big_m = opts.ramp_big_m or g.pmax_mw
                model.add_row(
                    f"ru_{gi}_{t}",
                    [pg[gi, t], pg[gi, t - 1], start[gi, t]],
                    [1.0, -1.0, -big_m], hi=g.ramp_up_mw)
                model.add_row(
                    f"rd_{gi}_{t}",
                    [pg[gi, t - 1], pg[gi, t], start[gi, t],
                     alpha[gi, t], alpha[gi, t - 1]],
                    [1.0, -1.0, -big_m, big_m, -big_m], hi=g.ramp_down_mw)

            if not single_step[gi]:
                for si, (h_thr, c_s) in enumerate(g.startup):
                    # sucost >= c_s * (a_t - sum of alpha over the window)
                    cols = [sucost[gi, t], alpha[gi, t]]
                    coefs = [1.0, -c_s]
                    hist = 0.0
                    for tau in range(t - h_thr, t):
                        if tau >= 0:
                            cols.append(alpha[gi, tau])
                            coefs.append(c_s)
                        else:
                            hist += init
                    model.add_row(f"suc_{gi}_{si}_{t}", cols, coefs,
                                  lo=-c_s * hist)

    model.meta["alpha"] = alpha
    model.meta["start"] = start
    model.meta["pg"] = pg
    model.meta["wc"] = wc
    model.meta["ls"] = ls
    model.meta["theta"] = theta
    model.meta["sucost"] = sucost
    seg_obj = np.empty(n_d, dtype=object)
    for gi in range(n_d):
        seg_obj[gi] = seg_idx[gi]
    model.meta["seg"] = seg_obj
    model.meta["contingency_ids"] = np.array(contingency_ids, dtype=np.int64)
    return model


def extract_solution(case: GridCase, model: MilpModel, raw_x: np.ndarray,
                     x, status: str, solver_objective: float = float("nan"),
                     gap: float = float("nan"), nodes: int = 0,
                     solve_time_s: float = float("nan")) -> UcSolution:
    """Map a raw primal vector back to schedule matrices and price it."""
    meta = model.meta
    alpha = np.rint(raw_x[meta["alpha"]]).astype(np.int8)
    start = np.rint(raw_x[meta["start"]]).astype(np.int8)
    p_g = raw_x[meta["pg"]]
    wind_curtail = raw_x[meta["wc"]]
    load_shed = raw_x[meta["ls"]]
    theta = raw_x[meta["theta"]]
    breakdown = evaluate_cost(case, x, alpha=alpha, p_g=p_g,
                              wind_curtail=wind_curtail, load_shed=load_shed)
    return UcSolution(
        alpha=alpha,
        start=start,
        p_g=p_g,
        wind_curtail=wind_curtail,
        load_shed=load_shed,
        theta=theta,
        contingency_ids=tuple(int(c) for c in meta["contingency_ids"]),
        total_cost=breakdown.total,
        breakdown=breakdown,
        status=status,
        solver_objective=solver_objective,
        gap=gap,
        nodes=nodes,
        solve_time_s=solve_time_s,
    )


def implied_starts(case: GridCase, alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start events and their off-durations implied by a commitment matrix.

    Returns ``(starts, t_off)`` with starts[g, t] = alpha[g,t]*(1-alpha[g,t-1])
    evaluated against the initial state, and t_off[g, t] the hours offline
    before hour t (counting the recorded initial off time).
    """
    n_d, T = alpha.shape
    starts = np.zeros((n_d, T), dtype=np.int8)
    t_off = np.zeros((n_d, T), dtype=np.int64)
    for gi, g in enumerate(case.generators):
        off = 0 if g.initial_on else g.initial_hours
        prev = 1 if g.initial_on else 0
        for t in range(T):
            t_off[gi, t] = off
            a = int(alpha[gi, t])
            starts[gi, t] = 1 if (a == 1 and prev == 0) else 0
            off = 0 if a == 1 else off + 1
            prev = a
    return starts, t_off


def evaluate_cost(case: GridCase, x, sol: UcSolution | None = None, *,
                  alpha=None, p_g=None, wind_curtail=None,
                  load_shed=None) -> CostBreakdown:
    """Reprice a schedule from raw matrices (independent of the solver).

    Start-up costs use the off-durations implied by the commitment
    history, not any solver-side variables.
    """
    if sol is not None:
        alpha, p_g = sol.alpha, sol.p_g
        wind_curtail, load_shed = sol.wind_curtail, sol.load_shed
    alpha = np.asarray(alpha)
    p_g = np.asarray(p_g)
    T = alpha.shape[1]

    inconsistent = (alpha == 0) & (np.abs(p_g) > 1e-6)
    if inconsistent.any():
        gi, t = np.argwhere(inconsistent)[0]
        g = case.generators[int(gi)]
        raise ValueError(
            f"generator {g.id} dispatched {p_g[gi, t]:.3f} MW at hour {t} "
            f"while off")

    generation = 0.0
    for gi, g in enumerate(case.generators):
        for t in range(T):
            if alpha[gi, t]:
                generation += g.cost_at(float(p_g[gi, t]))
    starts, t_off = implied_starts(case, alpha)
    startup = 0.0
    for gi, g in enumerate(case.generators):
        for t in range(T):
            if starts[gi, t]:
                startup += g.startup_cost(int(t_off[gi, t]))
    curtailment = float(np.sum(wind_curtail)) * case.prices.wind_curtailment
    shed = float(np.sum(load_shed)) * case.prices.voll
    return CostBreakdown(generation=generation, startup=startup,
                         curtailment=curtailment, shed=shed)


def validate_solution(case: GridCase, x, sol: UcSolution,
                      opts: UcOptions | None = None) -> ViolationReport:
    """Check every constraint family on the raw solution matrices.

    Reports the worst absolute violation per family (MW, rad, or unit
    counts); an optimal solver answer must come back empty at 1e-6.
    """
    opts = opts or UcOptions()
    report = ViolationReport()
    T = sol.alpha.shape[1]
    n_b = case.n_buses

    fam_int = report.family("integrality")
    for name, mat in (("alpha", sol.alpha), ("start", sol.start)):
        off = np.abs(mat - np.rint(mat))
        if off.size:
            worst = float(off.max())
            gi, t = np.unravel_index(int(np.argmax(off)), off.shape)
            fam_int.update(worst, f"{name} gen index {gi} hour {t}")
    alpha = np.rint(sol.alpha).astype(int)
    start = np.rint(sol.start).astype(int)

    # balance + flows + angles per network variant
    networks = [build_effective_network(case, x.topology)]
    for line_id in sol.contingency_ids:
        networks.append(build_effective_network(case, x.topology, line_id))
    shunt = np.array([b.shunt_mw for b in case.buses])
    wind_at_bus = np.zeros((T, n_b))
    for wi, w in enumerate(case.wind):
        wind_at_bus[:, case.bus_index(w.bus)] += x.wind[:T, wi]
    shed_at_bus = sol.load_shed
    gen_at_bus = np.zeros((n_b, T))
    for gi, g in enumerate(case.generators):
        gen_at_bus[case.bus_index(g.bus)] += sol.p_g[gi]
    wc_at_bus = np.zeros((n_b, T))
    for wi, w in enumerate(case.wind):
        wc_at_bus[case.bus_index(w.bus)] += sol.wind_curtail[wi]

    fam_bal = report.family("balance")
    fam_flow = report.family("flow")
    fam_angle = report.family("angle")
    for li, net in enumerate(networks):
        th = sol.theta[:, li, :]            # (n_b, T)
        inj = net.b_bus @ th                # (n_b, T)
        resid = (inj + net.p_bus_shift[:, None] + x.demand[:T].T + shunt[:, None]
                 - shed_at_bus - (wind_at_bus[:T].T - wc_at_bus) - gen_at_bus)
        worst = float(np.abs(resid).max()) if resid.size else 0.0
        bi, t = np.unravel_index(int(np.argmax(np.abs(resid))), resid.shape)
        fam_bal.update(worst, f"variant {li} bus index {bi} hour {t}")

        flows = net.b_f @ th + net.p_f_shift[:, None]
        for k, line in enumerate(case.lines):
            if not net.in_service[k]:
                continue
            over = np.abs(flows[k]) - line.fmax_mw
            worst = float(over.max())
            if worst > 0:
                fam_flow.update(worst,
                                f"line {line.id} variant {li} hour "
                                f"{int(np.argmax(over))}")
        over = np.abs(th) - THETA_MAX
        if over.size and float(over.max()) > 0:
            fam_angle.update(float(over.max()), f"variant {li} angle bound")
        for bi, b in enumerate(case.buses):
            if b.reference:
                off = float(np.abs(th[bi] - b.theta_ref).max())
                fam_angle.update(off, f"reference bus {b.id} variant {li}")

    fam_gen = report.family("gen_bounds")
    fam_ramp = report.family("ramp")
    fam_up = report.family("min_up")
    fam_dn = report.family("min_down")
    fam_st = report.family("start_link")
    for gi, g in enumerate(case.generators):
        a = alpha[gi]
        p = sol.p_g[gi]
        low = np.maximum(a * g.pmin_mw - p, 0.0)
        high = np.maximum(p - a * g.pmax_mw, 0.0)
        off_disp = np.abs(p * (1 - a))
        worst = float(np.maximum(np.maximum(low, high), off_disp).max())
        fam_gen.update(worst, f"gen {g.id}")

        prev = 1 if g.initial_on else 0
        expected = np.empty(T, dtype=int)
        for t in range(T):
            expected[t] = 1 if (a[t] == 1 and prev == 0) else 0
            prev = a[t]
        diff = np.abs(start[gi] - expected)
        if diff.size and diff.max() > 0:
            fam_st.update(float(diff.max()),
                          f"gen {g.id} hour {int(np.argmax(diff))}")

        _check_min_times(g, a, fam_up, fam_dn)

        if opts.ramps_enabled:
            for t in range(1, T):
                both_on = a[t] == 1 and a[t - 1] == 1
                if both_on:
                    up = p[t] - p[t - 1] - g.ramp_up_mw
                    dn = p[t - 1] - p[t] - g.ramp_down_mw
                    worst = max(up, dn, 0.0)
                    if worst > 0:
                        fam_ramp.update(float(worst), f"gen {g.id} hour {t}")

    fam_wc = report.family("curtail_bounds")
    over = np.maximum(sol.wind_curtail - x.wind[:T].T, 0.0)
    under = np.maximum(-sol.wind_curtail, 0.0)
    worst = float(np.maximum(over, under).max()) if over.size else 0.0
    fam_wc.update(worst, "wind curtailment bounds")

    fam_ls = report.family("shed_bounds")
    over = np.maximum(sol.load_shed - x.demand[:T].T, 0.0)
    under = np.maximum(-sol.load_shed, 0.0)
    worst = float(np.maximum(over, under).max()) if over.size else 0.0
    fam_ls.update(worst, "load shedding bounds")

    return report


def _check_min_times(g, a: np.ndarray, fam_up, fam_dn) -> None:
    """Flag on/off runs shorter than the minimum, unless cut by the horizon."""
    T = len(a)
    runs: list[tuple[int, int, int]] = []      # (state, first, last)
    s0 = 0
    for t in range(1, T + 1):
        if t == T or a[t] != a[s0]:
            runs.append((int(a[s0]), s0, t - 1))
            s0 = t
    init_state = 1 if g.initial_on else 0
    for state, first, last in runs:
        ended = last < T - 1
        length = last - first + 1
        if first == 0 and state == init_state:
            length += g.initial_hours
        if not ended:
            continue
        if state == 1 and length < g.min_up_h:
            fam_up.update(float(g.min_up_h - length),
                          f"gen {g.id} on-run hours {first}..{last}")
        if state == 0 and length < g.min_down_h:
            fam_dn.update(float(g.min_down_h - length),
                          f"gen {g.id} off-run hours {first}..{last}")
