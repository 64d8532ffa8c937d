"""Accuracy, density, sweep, and runtime comparison of proxy vs exact.

Each test sample is solved exactly (ground truth) and answered by the
index; rows hold the pair of costs, their relative error, the neighbor
distance and both wall-times.  Aggregates (mean relative error, Pearson
correlation of predicted vs true cost, mean neighbor distance, mean
runtimes) are always recomputable from the persisted rows.  Training-set
size sweeps index nested prefixes of one shuffled pool so the density
series is deterministically monotone.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ucproxy.grid import GridCase
from ucproxy.proxy import (
    DistanceWeights,
    IndexRecord,
    ProxyIndex,
    build_index,
    featurize,
    predict,
)
from ucproxy.sampler import UcInput


class EvalError(ValueError):
    """Raised for undefined metric inputs or inconsistent sets."""


def relative_error(c_hat: float, c: float) -> float:
    """|c_hat - c| / c; requires a strictly positive reference cost."""
    if not c > 0:
        raise EvalError(f"relative error undefined for reference cost {c}")
    return abs(c_hat - c) / c


def correlation(pairs) -> float:
    """Pearson correlation coefficient of (predicted, true) cost pairs."""
    arr = np.asarray(pairs, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 2:
        raise EvalError("correlation needs at least two (x, y) pairs")
    x, y = arr[:, 0], arr[:, 1]
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise EvalError("correlation undefined under zero variance")
    return float(np.corrcoef(x, y)[0, 1])


def density(index: ProxyIndex, test_features) -> float:
    """Mean distance from each test point to its nearest stored record."""
    if len(index) == 0:
        raise EvalError("density undefined for an empty index")
    dists = [index.query(np.asarray(f, dtype=float))[1] for f in test_features]
    return float(np.mean(dists))


@dataclass
class EvalRow:
    test_id: int
    cost_true: float
    cost_pred: float
    rel_error: float
    nn_distance: float
    neighbor_id: int
    month: int
    exact_time_s: float
    proxy_time_s: float
    excluded: bool = False
    note: str = ""


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)
    train_size: int = 0
    excluded_count: int = 0
    environment: str = ""

    def included(self) -> list[EvalRow]:
        return [r for r in self.rows if not r.excluded]

    @property
    def mean_rel_error(self) -> float:
        rows = self.included()
        return float(np.mean([r.rel_error for r in rows])) if rows else float("nan")

    @property
    def pearson(self) -> float:
        rows = self.included()
        return correlation([(r.cost_pred, r.cost_true) for r in rows])

    @property
    def mean_nn_distance(self) -> float:
        rows = self.included()
        return float(np.mean([r.nn_distance for r in rows])) if rows else float("nan")

    @property
    def mean_exact_time_s(self) -> float:
        rows = self.included()
        return float(np.mean([r.exact_time_s for r in rows])) if rows else float("nan")

    @property
    def mean_proxy_time_s(self) -> float:
        rows = self.included()
        return float(np.mean([r.proxy_time_s for r in rows])) if rows else float("nan")

    @property
    def speedup(self) -> float:
        return self.mean_exact_time_s / self.mean_proxy_time_s

    def per_month(self) -> dict[int, dict[str, float]]:
        """Sub-aggregates by calendar month of the test sample."""
        out: dict[int, dict[str, float]] = {}
        for month in sorted({r.month for r in self.included()}):
            rows = [r for r in self.included() if r.month == month]
            agg = {"count": float(len(rows)),
                   "mean_rel_error": float(np.mean([r.rel_error for r in rows]))}
            if len(rows) >= 2:
                try:
                    agg["pearson"] = correlation(
                        [(r.cost_pred, r.cost_true) for r in rows])
                except EvalError:
                    pass
            out[month] = agg
        return out


def evaluate(case: GridCase, index: ProxyIndex, test_set: list[UcInput],
             exact_solver, check_disjoint: bool = True) -> EvalReport:
    """Ground-truth solve and proxy-predict every test sample.

    ``exact_solver`` maps a UcInput to a UcSolution.  Samples whose exact
    solve fails or is infeasible are flagged and excluded from the
    aggregates, with an exclusion count kept on the report.
    """
    if check_disjoint:
        overlap = {x.sample_id for x in test_set} & set(index.ids)
        if overlap:
            raise EvalError(
                f"test ids overlap the training index: {sorted(overlap)[:8]}")
    report = EvalReport(train_size=len(index))
    for x in test_set:
        t0 = time.perf_counter()
        sol = exact_solver(x)
        exact_time = time.perf_counter() - t0
        pred = predict(index, case, x)
        if sol.status not in ("optimal",):
            report.rows.append(EvalRow(
                test_id=x.sample_id, cost_true=float("nan"),
                cost_pred=pred.cost, rel_error=float("nan"),
                nn_distance=pred.distance, neighbor_id=pred.neighbor_id,
                month=x.month, exact_time_s=exact_time,
                proxy_time_s=pred.query_time_s,
                excluded=True, note=f"exact solve {sol.status}"))
            report.excluded_count += 1
            continue
        report.rows.append(EvalRow(
            test_id=x.sample_id,
            cost_true=sol.total_cost,
            cost_pred=pred.cost,
            rel_error=relative_error(pred.cost, sol.total_cost),
            nn_distance=pred.distance,
            neighbor_id=pred.neighbor_id,
            month=x.month,
            exact_time_s=exact_time,
            proxy_time_s=pred.query_time_s,
        ))
    return report


def sweep_train_size(case: GridCase, pool: list[IndexRecord],
                     sizes: list[int], test_set: list[UcInput],
                     exact_solver, weights: DistanceWeights,
                     backend: str = "linear",
                     shuffle_seed: int | None = None) -> list[EvalReport]:
    """Evaluate nested prefixes of the (optionally shuffled) record pool.

    Exact test costs are solved once and shared across sizes; prefixes
    are nested, so the density series is non-increasing by construction.
    """
    if sorted(sizes) != list(sizes):
        raise EvalError("sizes must be ascending")
    if sizes and sizes[-1] > len(pool):
        raise EvalError(f"size {sizes[-1]} exceeds pool of {len(pool)}")
    order = np.arange(len(pool))
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(pool))
    shuffled = [pool[i] for i in order]

    truth: dict[int, tuple] = {}
    for x in test_set:
        t0 = time.perf_counter()
        sol = exact_solver(x)
        truth[x.sample_id] = (sol, time.perf_counter() - t0)

    reports = []
    for size in sizes:
        index = build_index(shuffled[:size], weights, backend=backend)
        report = EvalReport(train_size=size)
        overlap = {x.sample_id for x in test_set} & set(index.ids)
        if overlap:
            raise EvalError(
                f"test ids overlap the training pool: {sorted(overlap)[:8]}")
        for x in test_set:
            sol, exact_time = truth[x.sample_id]
            pred = predict(index, case, x)
            if sol.status != "optimal":
                report.rows.append(EvalRow(
                    test_id=x.sample_id, cost_true=float("nan"),
                    cost_pred=pred.cost, rel_error=float("nan"),
                    nn_distance=pred.distance, neighbor_id=pred.neighbor_id,
                    month=x.month, exact_time_s=exact_time,
                    proxy_time_s=pred.query_time_s,
                    excluded=True, note=f"exact solve {sol.status}"))
                report.excluded_count += 1
                continue
            report.rows.append(EvalRow(
                test_id=x.sample_id,
                cost_true=sol.total_cost,
                cost_pred=pred.cost,
                rel_error=relative_error(pred.cost, sol.total_cost),
                nn_distance=pred.distance,
                neighbor_id=pred.neighbor_id,
                month=x.month,
                exact_time_s=exact_time,
                proxy_time_s=pred.query_time_s,
            ))
        reports.append(report)
    return reports


@dataclass
class BenchmarkResult:
    mean_exact_s: float
    mean_proxy_s: float
    speedup: float
    mean_build_s: float
    mean_solve_s: float
    samples: int


def benchmark_runtime(case: GridCase, index: ProxyIndex,
                      test_set: list[UcInput], exact_solver) -> BenchmarkResult:
    """Wall-clock comparison; the first (warm-up) instance is excluded.

    Model build and branch-and-bound times are tracked separately from
    the combined exact wall time.
    """
    if len(test_set) < 2:
        raise EvalError("benchmark needs at least two samples (one warms up)")
    warm, rest = test_set[0], test_set[1:]
    exact_solver(warm)
    predict(index, case, warm)

    exact_times, build_times, solve_times, proxy_times = [], [], [], []
    for x in rest:
        t0 = time.perf_counter()
        sol = exact_solver(x)
        exact_times.append(time.perf_counter() - t0)
        build_times.append(sol.build_time_s)
        solve_times.append(sol.solve_time_s)
        pred = predict(index, case, x)
        proxy_times.append(pred.query_time_s)
    mean_exact = float(np.mean(exact_times))
    mean_proxy = float(np.mean(proxy_times))
    return BenchmarkResult(
        mean_exact_s=mean_exact,
        mean_proxy_s=mean_proxy,
        speedup=mean_exact / mean_proxy,
        mean_build_s=float(np.mean(build_times)),
        mean_solve_s=float(np.mean(solve_times)),
        samples=len(rest),
    )


# ---------------------------------------------------------------------------
# Report persistence: aggregate header block + one TSV row per sample


REPORT_COLUMNS = ["test_id", "cost_true", "cost_pred", "rel_error",
                  "nn_distance", "neighbor_id", "month", "exact_time_s",
                  "proxy_time_s", "excluded", "note"]


def write_report(report: EvalReport, destination, extra_header=None) -> None:
    own = not hasattr(destination, "write")
    fh = open(destination, "w") if own else destination
    try:
        fh.write("# eval_report_version 1\n")
        fh.write(f"# train_size {report.train_size}\n")
        fh.write(f"# excluded_count {report.excluded_count}\n")
        if report.included():
            fh.write(f"# mean_rel_error {report.mean_rel_error!r}\n")
            fh.write(f"# mean_nn_distance {report.mean_nn_distance!r}\n")
            fh.write(f"# mean_exact_time_s {report.mean_exact_time_s!r}\n")
            fh.write(f"# mean_proxy_time_s {report.mean_proxy_time_s!r}\n")
            try:
                fh.write(f"# pearson {report.pearson!r}\n")
            except EvalError:
                pass
        if report.environment:
            fh.write(f"# environment {report.environment}\n")
        for key, value in (extra_header or {}).items():
            fh.write(f"# {key} {value}\n")
        fh.write("\t".join(REPORT_COLUMNS) + "\n")
        for r in report.rows:
            fh.write("\t".join([
                str(r.test_id), repr(r.cost_true), repr(r.cost_pred),
                repr(r.rel_error), repr(r.nn_distance), str(r.neighbor_id),
                str(r.month), repr(r.exact_time_s), repr(r.proxy_time_s),
                str(int(r.excluded)), r.note.replace("\t", " "),
            ]) + "\n")
    finally:
        if own:
            fh.close()


def read_report(source) -> EvalReport:
    own = not hasattr(source, "read")
    fh = open(source) if own else source
    try:
        lines = fh.readlines()
    finally:
        if own:
            fh.close()
    report = EvalReport()
    body = []
    for line in lines:
        if line.startswith("#"):
            parts = line[1:].split(None, 1)
            if parts and parts[0] == "train_size":
                report.train_size = int(parts[1])
            if parts and parts[0] == "excluded_count":
                report.excluded_count = int(parts[1])
            if parts and parts[0] == "environment":
                report.environment = parts[1].strip()
            continue
        if line.strip():
            body.append(line.rstrip("\n"))
    header = body[0].split("\t")
    if header != REPORT_COLUMNS:
        raise EvalError(f"unexpected report columns: {header}")
    for line in body[1:]:
        f = line.split("\t")
        report.rows.append(EvalRow(
            test_id=int(f[0]), cost_true=float(f[1]), cost_pred=float(f[2]),
            rel_error=float(f[3]), nn_distance=float(f[4]),
            neighbor_id=int(f[5]), month=int(f[6]), exact_time_s=float(f[7]),
            proxy_time_s=float(f[8]), excluded=bool(int(f[9])),
            note=f[10] if len(f) > 10 else ""))
    return report
