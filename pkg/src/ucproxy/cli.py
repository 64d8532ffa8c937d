"""Batch command-line pipeline: generate, build-index, predict, evaluate,
sweep, benchmark.

Each subcommand reads shared options from flags; ``--config FILE`` (JSON)
overrides flags field by field.  All artifacts embed the configuration
hash, the seed, the case fingerprint and the tool version, so two runs
with the same (config, seed) are content-identical.  The worker count
defaults to the UCPROXY_WORKERS environment variable.

Exit codes: 0 success, 2 configuration/case errors, 3 missing artifact,
4 fingerprint mismatch, 5 validation refusals (e.g. train/test overlap),
6 numerical failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time

import numpy as np

from ucproxy import __version__
from ucproxy.engine.branch_bound import BnbParams
from ucproxy.engine.simplex import NumericalError
from ucproxy.evaluation import (
    EvalError,
    benchmark_runtime,
    evaluate,
    sweep_train_size,
    write_report,
)
from ucproxy.formulation import UcOptions
from ucproxy.grid import CaseError, GridCase, TopologyError, load_case
from ucproxy.proxy import (
    DistanceWeights,
    IndexError_,
    build_index,
    load_index,
    predict,
    save_index,
)
from ucproxy.sampler import (
    ConfigError,
    SamplerConfig,
    ScenarioSampler,
    load_sampler_config,
)
from ucproxy.solve import solve_uc
from ucproxy.store import (
    ArchiveError,
    config_hash,
    generate_training_set,
    load_manifest,
    load_records,
)

EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_FINGERPRINT = 4
EXIT_REFUSED = 5
EXIT_NUMERICAL = 6


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return 0
    try:
        apply_config_file(args)
        return args.func(args)
    except (CaseError, ConfigError, TopologyError, ValueError) as exc:
        if isinstance(exc, IndexError_):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FINGERPRINT if "fingerprint" in str(exc) else EXIT_REFUSED
        if isinstance(exc, EvalError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_REFUSED
        if isinstance(exc, ArchiveError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_FINGERPRINT if "fingerprint" in str(exc) else EXIT_REFUSED
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def default_workers() -> int:
    env = os.environ.get("UCPROXY_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, (os.cpu_count() or 1) - 0)


def add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; overrides flags")
    p.add_argument("--case", help="grid case file (JSON)")
    p.add_argument("--sampler-config", dest="sampler_config",
                   help="sampler config file (JSON)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=24)
    p.add_argument("--n1", action="store_true", default=False,
                   help="enable N-1 security constraints")
    p.add_argument("--gap", type=float, default=1e-6,
                   help="branch-and-bound relative gap tolerance")
    p.add_argument("--node-limit", dest="node_limit", type=int,
                   default=200_000)
    p.add_argument("--time-limit", dest="time_limit", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--topology-weight", dest="topology_weight", type=float,
                   default=100.0)
    p.add_argument("--forecast-weight", dest="forecast_weight", type=float,
                   default=1.0)
    p.add_argument("--backend", choices=["linear", "kdtree"],
                   default="linear")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ucproxy",
        description="Unit-commitment solver with a nearest-neighbor proxy")
    parser.add_argument("--version", action="version", version=__version__)
    parser.set_defaults(command=None)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("generate", help="sample and exactly solve scenarios")
    add_common(p)
    p.add_argument("--out", required=True, help="training archive directory")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--start-id", dest="start_id", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("build-index", help="index a training archive")
    add_common(p)
    p.add_argument("--train-dir", dest="train_dir", required=True)
    p.add_argument("--out", required=True, help="index archive (.npz)")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("predict", help="nearest-neighbor answer for one day")
    add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--id", type=int, required=True,
                   help="scenario sample id (regenerated from seed)")
    p.add_argument("--out", help="write the prediction JSON here")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="proxy accuracy against exact solves")
    add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--n-test", dest="n_test", type=int, required=True)
    p.add_argument("--test-start-id", dest="test_start_id", type=int,
                   default=None,
                   help="first test sample id (default: after training ids)")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="accuracy vs training-set size")
    add_common(p)
    p.add_argument("--train-dir", dest="train_dir", required=True)
    p.add_argument("--sizes", required=True,
                   help="comma-separated ascending sizes, e.g. 100,500,2000")
    p.add_argument("--n-test", dest="n_test", type=int, required=True)
    p.add_argument("--test-start-id", dest="test_start_id", type=int,
                   default=None)
    p.add_argument("--shuffle-seed", dest="shuffle_seed", type=int, default=None)
    p.add_argument("--report-dir", dest="report_dir", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("benchmark", help="exact vs proxy runtime")
    add_common(p)
    p.add_argument("--index", required=True)
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--test-start-id", dest="test_start_id", type=int,
                   default=None)
    p.add_argument("--report", help="write the benchmark JSON here")
    p.set_defaults(func=cmd_benchmark)
    return parser


def apply_config_file(args) -> None:
    if getattr(args, "config", None):
        with open(args.config) as fh:
            overrides = json.load(fh)
        for key, value in overrides.items():
            attr = key.replace("-", "_")
            if not hasattr(args, attr):
                raise ConfigError(f"unknown config key {key!r}")
            setattr(args, attr, value)


def load_inputs(args) -> tuple[GridCase, SamplerConfig | None]:
    if not args.case:
        raise ConfigError("--case is required")
    case = load_case(args.case)
    cfg = None
    if getattr(args, "sampler_config", None):
        cfg = load_sampler_config(args.sampler_config, case)
    return case, cfg


def make_opts(args) -> UcOptions:
    return UcOptions(horizon=args.horizon, n1_enabled=args.n1,
                     gap_tol=args.gap)


def make_params(args) -> BnbParams:
    return BnbParams(gap_tol=args.gap, node_limit=args.node_limit,
                     time_limit_s=args.time_limit)


def provenance(case, cfg, args) -> dict:
    opts, params = make_opts(args), make_params(args)
    return {
        "tool_version": __version__,
        "case_fingerprint": case.fingerprint(),
        "seed": args.seed,
        "config_hash": config_hash(case, cfg, opts, params, args.seed)
        if cfg is not None else "",
    }


def cmd_generate(args) -> int:
    case, cfg = load_inputs(args)
    if cfg is None:
        raise ConfigError("--sampler-config is required for generate")
    workers = args.workers or default_workers()
    t0 = time.perf_counter()

    def progress(done, sample_id, err):
        note = f" FAILED ({err})" if err else ""
        print(f"[{done}] solved id {sample_id}{note}", flush=True)

    manifest = generate_training_set(
        case, cfg, args.out, count=args.n, seed=args.seed,
        start_id=args.start_id, opts=make_opts(args),
        params=make_params(args), workers=workers, progress=progress)
    n_ok = sum(1 for s in manifest["records"].values() if s == "optimal")
    n_fail = sum(1 for s in manifest["records"].values()
                 if s.startswith("failed"))
    print(f"archive {args.out}: {n_ok} solved, {n_fail} failed, "
          f"{time.perf_counter() - t0:.1f}s")
    return 0


def cmd_build_index(args) -> int:
    case, cfg = load_inputs(args)
    records = load_records(args.train_dir, case)
    if not records:
        raise ArchiveError("archive holds no solved records")
    weights = DistanceWeights.default_for_case(
        case, topology_weight=args.topology_weight,
        forecast_weight=args.forecast_weight)
    index = build_index(records, weights, backend=args.backend)
    manifest = load_manifest(args.train_dir)
    save_index(index, args.out, extra_meta={
        **provenance(case, cfg, args),
        "train_config_hash": manifest["config_hash"],
        "train_seed": manifest["seed"],
    })
    print(f"index {args.out}: {len(index)} records, backend={args.backend}")
    return 0


def _scenario(case, cfg, args, sample_id: int):
    sampler = ScenarioSampler(case, cfg, args.seed)
    return sampler.sample(sample_id)


def cmd_predict(args) -> int:
    case, cfg = load_inputs(args)
    if cfg is None:
        raise ConfigError("--sampler-config is required for predict")
    index = load_index(args.index)
    x = _scenario(case, cfg, args, args.id)
    pred = predict(index, case, x)
    payload = {
        "sample_id": x.sample_id,
        "month": x.month,
        "neighbor_id": pred.neighbor_id,
        "predicted_cost": pred.cost,
        "distance": pred.distance,
        "query_time_s": pred.query_time_s,
        **provenance(case, cfg, args),
    }
    text = json.dumps(payload, indent=1, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _test_set(case, cfg, args, start_id: int):
    sampler = ScenarioSampler(case, cfg, args.seed)
    return sampler.batch(args.n_test, start_id=start_id)


def _exact_solver(case, args):
    opts, params = make_opts(args), make_params(args)

    def solver(x):
        return solve_uc(case, x, opts, params)

    return solver


def cmd_evaluate(args) -> int:
    case, cfg = load_inputs(args)
    if cfg is None:
        raise ConfigError("--sampler-config is required for evaluate")
    index = load_index(args.index)
    start = args.test_start_id
    if start is None:
        start = (max(index.ids) + 1) if index.ids else 0
    test_set = _test_set(case, cfg, args, start)
    report = evaluate(case, index, test_set, _exact_solver(case, args))
    report.environment = _environment()
    write_report(report, args.report, extra_header=provenance(case, cfg, args))
    print(f"report {args.report}: n={len(report.included())} "
          f"excluded={report.excluded_count} "
          f"mean_rel_error={report.mean_rel_error:.4f} "
          f"pearson={report.pearson:.4f} "
          f"density={report.mean_nn_distance:.3f}")
    return 0


def cmd_sweep(args) -> int:
    case, cfg = load_inputs(args)
    if cfg is None:
        raise ConfigError("--sampler-config is required for sweep")
    sizes = [int(s) for s in args.sizes.split(",") if s]
    pool = load_records(args.train_dir, case)
    start = args.test_start_id
    if start is None:
        start = (max(r.sample_id for r in pool) + 1) if pool else 0
    test_set = _test_set(case, cfg, args, start)
    weights = DistanceWeights.default_for_case(
        case, topology_weight=args.topology_weight,
        forecast_weight=args.forecast_weight)
    reports = sweep_train_size(
        case, pool, sizes, test_set, _exact_solver(case, args), weights,
        backend=args.backend, shuffle_seed=args.shuffle_seed)
    os.makedirs(args.report_dir, exist_ok=True)
    summary_path = os.path.join(args.report_dir, "sweep_summary.tsv")
    with open(summary_path, "w") as fh:
        for key, value in provenance(case, cfg, args).items():
            fh.write(f"# {key} {value}\n")
        fh.write("train_size\tmean_rel_error\tpearson\tdensity\texcluded\n")
        for size, report in zip(sizes, reports):
            report.environment = _environment()
            path = os.path.join(args.report_dir, f"eval_{size}.tsv")
            write_report(report, path,
                         extra_header=provenance(case, cfg, args))
            fh.write(f"{size}\t{report.mean_rel_error!r}\t{report.pearson!r}"
                     f"\t{report.mean_nn_distance!r}\t{report.excluded_count}\n")
            print(f"size {size}: mean_rel_error={report.mean_rel_error:.4f} "
                  f"pearson={report.pearson:.4f} "
                  f"density={report.mean_nn_distance:.3f}")
    print(f"sweep summary: {summary_path}")
    return 0


def cmd_benchmark(args) -> int:
    case, cfg = load_inputs(args)
    if cfg is None:
        raise ConfigError("--sampler-config is required for benchmark")
    index = load_index(args.index)
    start = args.test_start_id
    if start is None:
        start = (max(index.ids) + 1) if index.ids else 0
    sampler = ScenarioSampler(case, cfg, args.seed)
    test_set = sampler.batch(args.n, start_id=start)
    result = benchmark_runtime(case, index, test_set,
                               _exact_solver(case, args))
    payload = {
        "mean_exact_s": result.mean_exact_s,
        "mean_proxy_s": result.mean_proxy_s,
        "speedup": result.speedup,
        "mean_build_s": result.mean_build_s,
        "mean_solve_s": result.mean_solve_s,
        "samples": result.samples,
        "environment": _environment(),
        **provenance(case, cfg, args),
    }
    text = json.dumps(payload, indent=1, sort_keys=True)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _environment() -> str:
    return (f"python={platform.python_version()} numpy={np.__version__} "
            f"machine={platform.machine()} cpus={os.cpu_count()}")


if __name__ == "__main__":
    sys.exit(main())
