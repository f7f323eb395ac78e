"""Command-line interface.

Subcommands: train, select, ged, match, simulate, experiment. Exit
codes: 0 success, 2 data error, 3 infeasible, 4 size limit, 1 anything
else. All outputs are deterministic for fixed inputs and seeds; the
only timestamp lives in an experiment summary's metadata field.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import fileio
from .callgraph import approx_ged, exact_ged
from .errors import (
    DegenerateDataset,
    DimensionMismatch,
    DoesNotFitCluster,
    DuplicateId,
    EmptyRegistry,
    InsufficientMemory,
    NoFeasibleConfiguration,
    NoSimilarPipeline,
    PackingFailed,
    TooLarge,
)
from .experiments import load_experiment_spec, run_experiment
from .model import Configuration, ContainerConfig
from .predictor import PredictionModel, TrainingConfig, train
from .provisioner import grid_search_oracle, select_configuration, with_oracle
from .registry import DEFAULT_THRESHOLD
from .simulation import WorkloadSpec, measured_throughput, meets_slo, simulate

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_DATA = 2
EXIT_INFEASIBLE = 3
EXIT_TOO_LARGE = 4

_DATA_ERRORS = (
    DegenerateDataset,
    DimensionMismatch,
    DuplicateId,
    EmptyRegistry,
    FileNotFoundError,
    KeyError,
    OSError,
    ValueError,
)
_INFEASIBLE_ERRORS = (
    DoesNotFitCluster,
    InsufficientMemory,
    NoFeasibleConfiguration,
    NoSimilarPipeline,
    PackingFailed,
)


def _parse_hidden(text: str) -> tuple:
    return tuple(int(part) for part in text.split(",") if part.strip())


def cmd_train(args: argparse.Namespace) -> int:
    samples, class_map = fileio.load_dataset(args.dataset)
    config = TrainingConfig(
        hidden_sizes=_parse_hidden(args.hidden),
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
        loss_kind=args.loss,
        class_map=class_map,
    )
    model, history = train(samples, config)
    out = Path(args.output)
    fileio.save_model(model, out)
    metrics_path = Path(args.metrics) if args.metrics else out.with_suffix(".metrics.csv")
    fileio.save_metrics_history(history, metrics_path)
    final = history[-1]
    print(
        f"trained on {len(samples)} samples ({args.loss}): "
        f"holdout accuracy {final.accuracy:.4f}, macro-F1 {final.macro_f1:.4f}"
    )
    print(f"model: {out}")
    print(f"metrics: {metrics_path}")
    return EXIT_OK


def _load_models(directory: Path, function_ids: Sequence[str]) -> Dict[str, PredictionModel]:
    models: Dict[str, PredictionModel] = {}
    for fn_id in function_ids:
        candidates = [directory / f"{fn_id}.json", directory / f"model-{fn_id}.json"]
        path = next((p for p in candidates if p.is_file()), None)
        if path is None:
            raise FileNotFoundError(
                f"no model for function '{fn_id}' in {directory} "
                f"(tried {', '.join(p.name for p in candidates)})"
            )
        models[fn_id] = fileio.load_model(path)
    return models


def cmd_select(args: argparse.Namespace) -> int:
    pipeline, functions = fileio.load_pipeline(args.pipeline)
    catalog, pricing = fileio.load_catalog(args.catalog)
    cluster = fileio.load_cluster(args.cluster)
    models = _load_models(Path(args.models), pipeline.functions)
    rate = args.rate if args.rate is not None else pipeline.target_rate

    report = select_configuration(pipeline, models, catalog, rate, cluster, pricing)
    extra = None
    out = Path(args.output)
    if args.oracle:
        oracle = grid_search_oracle(
            pipeline,
            catalog,
            cluster,
            WorkloadSpec(rate=rate, duration_s=args.duration),
            deadline=pipeline.deadline_s,
            functions=functions,
            quantile=args.quantile,
            pricing=pricing,
            jobs=args.jobs,
        )
        report = with_oracle(report, oracle)
        table_path = out.with_suffix(".oracle.csv")
        fileio.save_oracle_table(oracle, table_path)
        extra = {"oracle_table": table_path.name}
    fileio.save_selection_report(report, out, extra=extra)

    for sel in report.selections:
        cfg = sel.configuration
        print(
            f"{sel.function_id}: {cfg.replicas} x ({cfg.container.mem_mb} MB, "
            f"{cfg.container.cpus} cpu) -> {sel.monthly_cost:.3f}/month "
            f"(slo probability {sel.slo_probability:.3f})"
        )
    print(f"total: {report.total_cost:.3f}/month")
    if report.oracle_cost is not None:
        print(f"oracle: {report.oracle_cost:.3f}/month")
    print(f"report: {out}")
    return EXIT_OK


def cmd_ged(args: argparse.Namespace) -> int:
    g1 = fileio.load_callgraph(args.graph_a)
    g2 = fileio.load_callgraph(args.graph_b)
    if args.exact:
        result = exact_ged(g1, g2, max_vertices=args.max_vertices)
    else:
        result = approx_ged(g1, g2)
    print(f"{result.distance:.6g}")
    return EXIT_OK


def cmd_match(args: argparse.Namespace) -> int:
    registry = fileio.load_registry(Path(args.registry))
    graph = fileio.load_callgraph(args.graph)
    decision = registry.find_most_similar(graph, threshold=args.threshold)
    if decision.matched is None:
        print(f"no-match (nearest distance {decision.distance.distance:.6g})")
        raise NoSimilarPipeline(
            f"no registered pipeline within threshold {args.threshold}"
        )
    print(f"matched {decision.matched.pipeline.id} (distance {decision.distance.distance:.6g})")
    return EXIT_OK


def _parse_config(text: str) -> tuple:
    try:
        fn_id, triple = text.split("=", 1)
        replicas, mem, cpus = triple.split(":")
        return fn_id, Configuration(
            replicas=int(replicas),
            container=ContainerConfig(mem_mb=int(mem), cpus=float(cpus)),
        )
    except (ValueError, TypeError) as exc:
        raise ValueError(
            f"--config expects FN=REPLICAS:MEM_MB:CPUS, got {text!r}"
        ) from exc


def cmd_simulate(args: argparse.Namespace) -> int:
    pipeline, functions = fileio.load_pipeline(args.pipeline)
    cluster = fileio.load_cluster(args.cluster)
    workload = fileio.load_workload(args.workload)
    configs = dict(_parse_config(c) for c in args.config)
    missing = [f for f in pipeline.functions if f not in configs]
    if missing:
        raise ValueError(f"--config missing for functions: {missing}")

    result = simulate(pipeline, configs, cluster, workload, functions)
    if args.trace:
        fileio.save_trace(result, Path(args.trace))
        print(f"trace: {args.trace}")
    if args.summary:
        fileio.write_json(fileio.simulation_summary_to_dict(result), Path(args.summary))
        print(f"summary: {args.summary}")
    met = meets_slo(result, pipeline.deadline_s, quantile=args.quantile)
    print(
        f"requests {len(result.records)}, throughput {measured_throughput(result):.3f}/s, "
        f"slo {'met' if met else 'missed'} (deadline {pipeline.deadline_s}s, "
        f"quantile {args.quantile})"
    )
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    spec = load_experiment_spec(Path(args.spec), output_dir=args.output)
    if args.seed is not None:
        from dataclasses import replace

        spec = replace(spec, seed=args.seed)
    outcome = run_experiment(spec, jobs=args.jobs)
    print(outcome.checklist())
    print(f"artifacts: {Path(spec.output_dir)}")
    return EXIT_OK if outcome.passed else EXIT_OTHER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faasplan",
        description="Replica/container planning for serverless pipelines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit a replica-class model on a dataset CSV")
    p.add_argument("dataset", help="training dataset CSV")
    p.add_argument("-o", "--output", required=True, help="model JSON path")
    p.add_argument("--metrics", help="per-epoch metrics CSV (default: <output>.metrics.csv)")
    p.add_argument("--loss", choices=("cce", "klde", "psse"), default="cce")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--hidden", default="64,64", help="comma-separated hidden layer sizes")
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=32)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("select", help="pick per-function configurations for a pipeline")
    p.add_argument("pipeline", help="pipeline JSON")
    p.add_argument("--models", required=True, help="directory of per-function model JSONs")
    p.add_argument("--catalog", required=True, help="catalog JSON")
    p.add_argument("--cluster", required=True, help="cluster JSON")
    p.add_argument("-o", "--output", required=True, help="selection report JSON path")
    p.add_argument("--rate", type=float, help="request rate (default: pipeline target)")
    p.add_argument("--oracle", action="store_true", help="attach the grid-search optimum")
    p.add_argument("--duration", type=float, default=20.0, help="oracle simulation window")
    p.add_argument("--quantile", type=float, default=0.95)
    p.add_argument("--jobs", type=int, default=1, help="parallel oracle simulations")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("ged", help="edit distance between two call graphs")
    p.add_argument("graph_a")
    p.add_argument("graph_b")
    p.add_argument("--exact", action="store_true", help="exact search instead of approximation")
    p.add_argument("--max-vertices", type=int, default=6, help="exact-search size limit")
    p.set_defaults(func=cmd_ged)

    p = sub.add_parser("match", help="find the most similar registered pipeline")
    p.add_argument("registry", help="registry directory")
    p.add_argument("graph", help="call graph JSON to match")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("simulate", help="simulate one pipeline under a workload")
    p.add_argument("pipeline")
    p.add_argument("cluster")
    p.add_argument("workload")
    p.add_argument(
        "--config",
        action="append",
        required=True,
        metavar="FN=REPLICAS:MEM_MB:CPUS",
        help="per-function configuration (repeatable)",
    )
    p.add_argument("--trace", help="per-request trace CSV path")
    p.add_argument("--summary", help="summary JSON path")
    p.add_argument("--quantile", type=float, default=0.95)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("experiment", help="run an evaluation scenario end-to-end")
    p.add_argument("spec", help="experiment spec JSON")
    p.add_argument("-o", "--output", help="override the spec's output directory")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    except _INFEASIBLE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
