"""Training-set generation and the on-disk archive of solved days.

An archive is a directory: ``manifest.json`` plus ``records/<id>.npz``,
one file per scenario holding the sampled inputs (flattened forecast
matrices, topology bits, month) and the solved label (schedule matrices,
cost parts, solve metadata).  Failed solves leave ``<id>.failed.json``
markers so interrupted or partial runs resume without re-attempting or
duplicating anything.  Record content for a given (config, seed, id) is
path-independent: scenarios are regenerated from per-id substreams and
warm-start bases come from deterministic per-(topology, month) anchor
instances, so a resumed archive is content-identical to a fresh one.
"""

from __future__ import annotations

import hashlib
import json
import multiprocessing
import pathlib
from dataclasses import asdict

import numpy as np

from ucproxy import __version__
from ucproxy.engine.branch_bound import BnbParams, solve_milp
from ucproxy.formulation import CostBreakdown, UcOptions, UcSolution, build_milp
from ucproxy.grid import GridCase, case_from_dict, case_to_dict
from ucproxy.proxy import IndexRecord, featurize, index_fingerprint
from ucproxy.sampler import SamplerConfig, ScenarioSampler, UcInput
from ucproxy.solve import solve_uc

ARCHIVE_SCHEMA_VERSION = 1


class ArchiveError(ValueError):
    """Raised for inconsistent or mismatched archives."""


def config_hash(case: GridCase, cfg: SamplerConfig, opts: UcOptions,
                params: BnbParams, seed: int) -> str:
    blob = json.dumps({
        "case": case_to_dict(case),
        "sampler": {
            "demand_profile": cfg.demand_profile.tolist(),
            "wind_profile": cfg.wind_profile.tolist(),
            "demand_monthly": cfg.demand_monthly.tolist(),
            "wind_monthly": cfg.wind_monthly.tolist(),
            "demand_sigma": cfg.demand_sigma,
            "wind_sigma": cfg.wind_sigma,
            "zone_exclusive": cfg.zone_exclusive,
            "months": list(cfg.months),
        },
        "options": asdict(opts),
        "params": asdict(params),
        "seed": seed,
    }, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def mean_scenario(cfg: SamplerConfig, month: int,
                  topology: np.ndarray) -> UcInput:
    """Zero-sigma scenario: profiles scaled by the month's multipliers."""
    return UcInput(
        demand=cfg.demand_profile * cfg.demand_monthly[month - 1],
        wind=cfg.wind_profile * cfg.wind_monthly[month - 1],
        topology=np.asarray(topology, dtype=np.int8),
        month=month,
        sample_id=-1,
    )


class AnchorCache:
    """Per-(topology, month) root bases from deterministic mean scenarios.

    The anchor instance depends only on (config, topology, month), never
    on which samples were solved before, so warm-started results do not
    depend on solve order.
    """

    def __init__(self, case: GridCase, cfg: SamplerConfig, opts: UcOptions,
                 params: BnbParams):
        self.case = case
        self.cfg = cfg
        self.opts = opts
        self.params = params
        self._bases: dict[tuple[bytes, int], tuple | None] = {}

    def get(self, topology: np.ndarray, month: int):
        key = (np.asarray(topology, dtype=np.int8).tobytes(), month)
        if key not in self._bases:
            try:
                x = mean_scenario(self.cfg, month, topology)
                model = build_milp(self.case, x, self.opts)
                result = solve_milp(model, self.params)
                self._bases[key] = result.root_basis
            except Exception:
                self._bases[key] = None
        return self._bases[key]


# ---------------------------------------------------------------------------
# Record files


def record_path(archive_dir, sample_id: int) -> pathlib.Path:
    return pathlib.Path(archive_dir) / "records" / f"{sample_id}.npz"


def failure_path(archive_dir, sample_id: int) -> pathlib.Path:
    return pathlib.Path(archive_dir) / "records" / f"{sample_id}.failed.json"


def write_record(archive_dir, x: UcInput, sol: UcSolution) -> None:
    path = record_path(archive_dir, x.sample_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    br = sol.breakdown
    arrays = {
        "sample_id": np.int64(x.sample_id),
        "month": np.int64(x.month),
        "demand": x.demand,
        "wind": x.wind,
        "topology": x.topology.astype(np.int8),
        "alpha": sol.alpha.astype(np.int8),
        "start": sol.start.astype(np.int8),
        "p_g": sol.p_g,
        "wind_curtail": sol.wind_curtail,
        "load_shed": sol.load_shed,
        "theta": sol.theta,
        "contingency_ids": np.asarray(sol.contingency_ids, dtype=np.int64),
        "cost_parts": np.array([br.generation, br.startup,
                                br.curtailment, br.shed]),
        "total_cost": np.float64(sol.total_cost),
        "status": np.str_(sol.status),
        "solve_time_s": np.float64(sol.solve_time_s),
        "build_time_s": np.float64(sol.build_time_s),
        "gap": np.float64(sol.gap),
        "nodes": np.int64(sol.nodes),
    }
    tmp = path.with_suffix(".tmp")
    with open(tmp, "wb") as fh:
        np.savez_compressed(fh, **arrays)
    tmp.replace(path)


def read_record(archive_dir, sample_id: int) -> tuple[UcInput, UcSolution]:
    data = np.load(str(record_path(archive_dir, sample_id)),
                   allow_pickle=False)
    x = UcInput(
        demand=data["demand"], wind=data["wind"],
        topology=data["topology"], month=int(data["month"]),
        sample_id=int(data["sample_id"]),
    )
    parts = data["cost_parts"]
    sol = UcSolution(
        alpha=data["alpha"], start=data["start"], p_g=data["p_g"],
        wind_curtail=data["wind_curtail"], load_shed=data["load_shed"],
        theta=data["theta"],
        contingency_ids=tuple(int(c) for c in data["contingency_ids"]),
        total_cost=float(data["total_cost"]),
        breakdown=CostBreakdown(*[float(v) for v in parts]),
        status=str(data["status"]),
        solve_time_s=float(data["solve_time_s"]),
        build_time_s=float(data["build_time_s"]),
        gap=float(data["gap"]),
        nodes=int(data["nodes"]),
    )
    return x, sol


def existing_ids(archive_dir) -> tuple[set[int], set[int]]:
    """(solved, failed) sample ids already present on disk."""
    rec_dir = pathlib.Path(archive_dir) / "records"
    solved, failed = set(), set()
    if rec_dir.is_dir():
        for p in rec_dir.iterdir():
            if p.suffix == ".npz" and p.stem.isdigit():
                solved.add(int(p.stem))
            elif p.name.endswith(".failed.json"):
                stem = p.name[: -len(".failed.json")]
                if stem.isdigit():
                    failed.add(int(stem))
    return solved, failed


# ---------------------------------------------------------------------------
# Parallel generation

_WORKER: dict = {}


def _worker_init(case_dict, cfg_blob, opts_dict, params_dict, seed):
    case = case_from_dict(case_dict)
    cfg = SamplerConfig(
        demand_profile=np.asarray(cfg_blob["demand_profile"]),
        wind_profile=np.asarray(cfg_blob["wind_profile"]),
        demand_monthly=np.asarray(cfg_blob["demand_monthly"]),
        wind_monthly=np.asarray(cfg_blob["wind_monthly"]),
        demand_sigma=cfg_blob["demand_sigma"],
        wind_sigma=cfg_blob["wind_sigma"],
        zone_exclusive=cfg_blob["zone_exclusive"],
        months=tuple(cfg_blob["months"]),
        outage_zones={z: tuple(v) for z, v in cfg_blob["outage_zones"].items()},
        shared_candidates=tuple(cfg_blob["shared_candidates"]),
    )
    opts = UcOptions(**opts_dict)
    params = BnbParams(**params_dict)
    _WORKER["case"] = case
    _WORKER["sampler"] = ScenarioSampler(case, cfg, seed)
    _WORKER["opts"] = opts
    _WORKER["params"] = params
    _WORKER["anchors"] = AnchorCache(case, cfg, opts, params)


def _solve_one(sample_id: int):
    case = _WORKER["case"]
    sampler = _WORKER["sampler"]
    opts = _WORKER["opts"]
    params = _WORKER["params"]
    anchors = _WORKER["anchors"]
    try:
        x = sampler.sample(sample_id)
        warm = anchors.get(x.topology, x.month)
        sol = solve_uc(case, x, opts, params, warm_basis=warm)
        if sol.status != "optimal":
            return sample_id, None, None, f"solve status {sol.status}"
        return sample_id, x, sol, None
    except Exception as exc:            # flagged, generation continues
        return sample_id, None, None, f"{type(exc).__name__}: {exc}"


def _cfg_blob(cfg: SamplerConfig) -> dict:
    return {
        "demand_profile": cfg.demand_profile,
        "wind_profile": cfg.wind_profile,
        "demand_monthly": cfg.demand_monthly,
        "wind_monthly": cfg.wind_monthly,
        "demand_sigma": cfg.demand_sigma,
        "wind_sigma": cfg.wind_sigma,
        "zone_exclusive": cfg.zone_exclusive,
        "months": list(cfg.months),
        "outage_zones": {z: list(v) for z, v in cfg.outage_zones.items()},
        "shared_candidates": list(cfg.shared_candidates),
    }


def generate_training_set(case: GridCase, cfg: SamplerConfig, out_dir,
                          count: int, seed: int, start_id: int = 0,
                          opts: UcOptions | None = None,
                          params: BnbParams | None = None,
                          workers: int = 1,
                          progress=None) -> dict:
    """Sample and exactly solve ``count`` scenarios into an archive.

    Already-present record files (solved or failed) are skipped, so an
    interrupted run resumes cleanly.  Returns the manifest dict.
    """
    opts = opts or UcOptions()
    params = params or BnbParams(gap_tol=opts.gap_tol)
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chash = config_hash(case, cfg, opts, params, seed)
    fp = index_fingerprint(case, opts.horizon, opts.n1_enabled)

    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        previous = json.loads(manifest_path.read_text())
        if previous.get("config_hash") != chash:
            raise ArchiveError(
                "archive was generated with a different (config, seed); "
                "refusing to mix records")

    wanted = list(range(start_id, start_id + count))
    solved, failed = existing_ids(out)
    pending = [i for i in wanted if i not in solved and i not in failed]

    init_args = (case_to_dict(case), _cfg_blob(cfg),
                 asdict(opts), asdict(params), seed)
    failures: dict[int, str] = {}
    if pending:
        if workers <= 1:
            _worker_init(*init_args)
            results = map(_solve_one, pending)
            _consume(out, results, failures, progress)
            _WORKER.clear()
        else:
            with multiprocessing.Pool(
                    processes=workers, initializer=_worker_init,
                    initargs=init_args) as pool:
                results = pool.imap_unordered(_solve_one, pending, chunksize=4)
                _consume(out, results, failures, progress)

    solved, failed_set = existing_ids(out)
    records = {}
    for i in wanted:
        if i in solved:
            records[str(i)] = "optimal"
        elif i in failed_set:
            try:
                reason = json.loads(
                    failure_path(out, i).read_text()).get("reason", "failed")
            except (OSError, json.JSONDecodeError):
                reason = "failed"
            records[str(i)] = f"failed: {reason}"
        else:
            records[str(i)] = "missing"
    manifest = {
        "schema_version": ARCHIVE_SCHEMA_VERSION,
        "tool_version": __version__,
        "case_fingerprint": case.fingerprint(),
        "index_fingerprint": fp,
        "config_hash": chash,
        "seed": seed,
        "start_id": start_id,
        "count": count,
        "horizon": opts.horizon,
        "n1_enabled": opts.n1_enabled,
        "records": records,
    }
    manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return manifest


def _consume(out, results, failures: dict, progress) -> None:
    done = 0
    for sample_id, x, sol, err in results:
        if err is None:
            write_record(out, x, sol)
        else:
            failures[sample_id] = err
            fpath = failure_path(out, sample_id)
            fpath.parent.mkdir(parents=True, exist_ok=True)
            fpath.write_text(json.dumps({"reason": err}))
        done += 1
        if progress:
            progress(done, sample_id, err)


def load_manifest(archive_dir) -> dict:
    path = pathlib.Path(archive_dir) / "manifest.json"
    if not path.exists():
        raise ArchiveError(f"no manifest in {archive_dir}")
    manifest = json.loads(path.read_text())
    if manifest.get("schema_version") != ARCHIVE_SCHEMA_VERSION:
        raise ArchiveError(
            f"unsupported archive schema {manifest.get('schema_version')!r}")
    return manifest


def load_records(archive_dir, case: GridCase) -> list[IndexRecord]:
    """Materialize all solved records as index-ready entries (id order)."""
    manifest = load_manifest(archive_dir)
    if manifest["case_fingerprint"] != case.fingerprint():
        raise ArchiveError(
            f"archive case fingerprint {manifest['case_fingerprint']} does "
            f"not match the loaded case {case.fingerprint()}")
    fp = manifest["index_fingerprint"]
    out = []
    ids = sorted(int(i) for i, status in manifest["records"].items()
                 if status == "optimal")
    for sample_id in ids:
        x, sol = read_record(archive_dir, sample_id)
        out.append(IndexRecord(
            sample_id=sample_id,
            features=featurize(case, x),
            cost=sol.total_cost,
            solution=sol,
            fingerprint=fp,
        ))
    return out
