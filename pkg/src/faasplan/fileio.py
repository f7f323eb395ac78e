"""On-disk formats: JSON descriptors and CSV tables.

Every format the command-line tools read or write lives here, one
load/save pair per document kind, so the schemas stay in a single
module. All JSON is written with sorted keys and a trailing newline to
keep reruns byte-identical.
"""
from __future__ import annotations

import csv
import json
import re
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

from .callgraph import CallGraph, Vertex
from .model import (
    ClusterSpec,
    Configuration,
    ContainerConfig,
    FunctionSpec,
    NodeSpec,
    PipelineSpec,
    PricingScheme,
    ReplicaClassMap,
)
from .predictor import (
    EpochMetrics,
    FeatureVector,
    PredictionModel,
    TrainingSample,
    model_from_dict,
    model_to_dict,
)
from .provisioner import ConfigurationCatalog, OracleResult, SelectionReport
from .simulation import SimulationResult, WorkloadSpec


def write_json(doc: Dict, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json(path: Path) -> Dict:
    return json.loads(Path(path).read_text())


# --- functions and pipelines -------------------------------------------------

def function_to_dict(fn: FunctionSpec) -> Dict:
    return {
        "id": fn.id,
        "base_exec_time": fn.base_exec_time,
        "ref_cpu": fn.ref_cpu,
        "ref_mem": fn.ref_mem,
        "cpu_scaling_exponent": fn.cpu_scaling_exponent,
        "init_time": fn.init_time,
    }


def function_from_dict(doc: Dict) -> FunctionSpec:
    return FunctionSpec(
        id=doc["id"],
        base_exec_time=float(doc["base_exec_time"]),
        ref_cpu=float(doc["ref_cpu"]),
        ref_mem=int(doc["ref_mem"]),
        cpu_scaling_exponent=float(doc["cpu_scaling_exponent"]),
        init_time=float(doc["init_time"]),
    )


def pipeline_to_dict(pipeline: PipelineSpec, functions: Mapping[str, FunctionSpec]) -> Dict:
    """Pipeline descriptor with its function definitions inline."""
    return {
        "id": pipeline.id,
        "deadline_s": pipeline.deadline_s,
        "target_rate": pipeline.target_rate,
        "functions": [function_to_dict(functions[f]) for f in pipeline.functions],
    }


def pipeline_from_dict(doc: Dict) -> Tuple[PipelineSpec, Dict[str, FunctionSpec]]:
    functions = {f["id"]: function_from_dict(f) for f in doc["functions"]}
    pipeline = PipelineSpec(
        id=doc["id"],
        functions=tuple(f["id"] for f in doc["functions"]),
        deadline_s=float(doc["deadline_s"]),
        target_rate=float(doc["target_rate"]),
    )
    return pipeline, functions


def save_pipeline(pipeline: PipelineSpec, functions: Mapping[str, FunctionSpec], path: Path) -> None:
    write_json(pipeline_to_dict(pipeline, functions), path)


def load_pipeline(path: Path) -> Tuple[PipelineSpec, Dict[str, FunctionSpec]]:
    return pipeline_from_dict(read_json(path))


# --- cluster, catalog, workload ----------------------------------------------

def save_cluster(cluster: ClusterSpec, path: Path) -> None:
    write_json(
        {"nodes": [{"cpus": n.cpus, "mem_mb": n.mem_mb} for n in cluster.nodes]}, path
    )


def load_cluster(path: Path) -> ClusterSpec:
    doc = read_json(path)
    return ClusterSpec(
        nodes=tuple(NodeSpec(cpus=float(n["cpus"]), mem_mb=int(n["mem_mb"])) for n in doc["nodes"])
    )


def save_catalog(catalog: ConfigurationCatalog, pricing: PricingScheme, path: Path) -> None:
    write_json(
        {
            "containers": [
                {"mem_mb": c.mem_mb, "cpus": c.cpus} for c in catalog.container_grid
            ],
            "replica_classes": list(catalog.class_map.classes),
            "pricing": {"rate_per_gb_second": pricing.rate_per_gb_second},
        },
        path,
    )


def load_catalog(path: Path) -> Tuple[ConfigurationCatalog, PricingScheme]:
    doc = read_json(path)
    catalog = ConfigurationCatalog(
        container_grid=tuple(
            ContainerConfig(mem_mb=int(c["mem_mb"]), cpus=float(c["cpus"]))
            for c in doc["containers"]
        ),
        class_map=ReplicaClassMap(tuple(int(r) for r in doc["replica_classes"])),
    )
    pricing = PricingScheme(rate_per_gb_second=float(doc["pricing"]["rate_per_gb_second"]))
    return catalog, pricing


def save_workload(workload: WorkloadSpec, path: Path) -> None:
    write_json(
        {
            "rate": workload.rate,
            "duration_s": workload.duration_s,
            "arrival_kind": workload.arrival_kind,
            "seed": workload.seed,
        },
        path,
    )


def load_workload(path: Path) -> WorkloadSpec:
    doc = read_json(path)
    return WorkloadSpec(
        rate=float(doc["rate"]),
        duration_s=float(doc["duration_s"]),
        arrival_kind=doc.get("arrival_kind", "uniform"),
        seed=int(doc.get("seed", 0)),
    )


# --- call graphs ---------------------------------------------------------------

def callgraph_to_dict(graph: CallGraph) -> Dict:
    return {
        "vertices": [{"id": v.id, "label": v.label} for v in graph.vertices],
        "edges": [[a, b] for a, b in graph.edges],
    }


def callgraph_from_dict(doc: Dict) -> CallGraph:
    return CallGraph(
        vertices=tuple(Vertex(id=v["id"], label=v["label"]) for v in doc["vertices"]),
        edges=tuple((a, b) for a, b in doc["edges"]),
    )


def save_callgraph(graph: CallGraph, path: Path) -> None:
    write_json(callgraph_to_dict(graph), path)


def load_callgraph(path: Path) -> CallGraph:
    return callgraph_from_dict(read_json(path))


# --- models ---------------------------------------------------------------------

def save_model(model: PredictionModel, path: Path) -> None:
    write_json(model_to_dict(model), path)


def load_model(path: Path) -> PredictionModel:
    return model_from_dict(read_json(path))


# --- datasets -------------------------------------------------------------------

DATASET_HEADER = ["mem_mb", "cpus", "request_rate", "replica_label"]


def save_dataset(
    samples: Sequence[TrainingSample], class_map: ReplicaClassMap, path: Path
) -> None:
    """CSV rows of features plus the replica count the sample was labelled with."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_HEADER)
        for s in samples:
            writer.writerow(
                [
                    s.features.mem_mb,
                    s.features.cpus,
                    s.features.request_rate,
                    class_map.value(s.label),
                ]
            )


def load_dataset(path: Path) -> Tuple[List[TrainingSample], ReplicaClassMap]:
    """Read a dataset CSV; the class map is the sorted set of labels seen."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != DATASET_HEADER:
            raise ValueError(
                f"expected dataset header {DATASET_HEADER}, got {reader.fieldnames}"
            )
        rows = [
            (
                float(r["mem_mb"]),
                float(r["cpus"]),
                float(r["request_rate"]),
                int(r["replica_label"]),
            )
            for r in reader
        ]
    if not rows:
        from .errors import DegenerateDataset

        raise DegenerateDataset(f"dataset {path} holds no rows")
    class_map = ReplicaClassMap(tuple(sorted({r[3] for r in rows})))
    samples = [
        TrainingSample(
            features=FeatureVector(mem_mb=m, cpus=c, request_rate=q),
            label=class_map.index_of(lbl),
        )
        for m, c, q, lbl in rows
    ]
    return samples, class_map


def save_metrics_history(history: Sequence[EpochMetrics], path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "accuracy", "macro_f1", "macro_precision", "macro_recall"])
        for m in history:
            writer.writerow([m.epoch, m.loss, m.accuracy, m.macro_f1, m.macro_precision, m.macro_recall])


# --- selection reports and oracle tables ------------------------------------------

def _configuration_to_dict(cfg: Configuration) -> Dict:
    return {
        "replicas": cfg.replicas,
        "mem_mb": cfg.container.mem_mb,
        "cpus": cfg.container.cpus,
    }


def selection_report_to_dict(report: SelectionReport) -> Dict:
    doc = {
        "pipeline_id": report.pipeline_id,
        "total_cost": report.total_cost,
        "selections": [
            {
                "function_id": s.function_id,
                "configuration": _configuration_to_dict(s.configuration),
                "monthly_cost": s.monthly_cost,
                "slo_probability": s.slo_probability,
                "probabilities": list(s.probabilities),
            }
            for s in report.selections
        ],
    }
    if report.oracle_cost is not None:
        doc["oracle"] = {
            "total_cost": report.oracle_cost,
            "configurations": {
                f: _configuration_to_dict(c)
                for f, c in (report.oracle_configurations or {}).items()
            },
        }
    return doc


def save_selection_report(report: SelectionReport, path: Path, extra: Dict = None) -> None:
    doc = selection_report_to_dict(report)
    if extra:
        doc.update(extra)
    write_json(doc, path)


def save_oracle_table(oracle: OracleResult, path: Path) -> None:
    """The full per-cell (configuration, throughput, cost, verdict) table."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["function_id", "mem_mb", "cpus", "replicas", "throughput", "monthly_cost", "slo_met", "p95_pct"]
        )
        for cell in oracle.table:
            writer.writerow(
                [
                    cell.function_id,
                    cell.configuration.container.mem_mb,
                    cell.configuration.container.cpus,
                    cell.configuration.replicas,
                    cell.throughput,
                    cell.monthly_cost,
                    int(cell.slo_met),
                    cell.p95_pct,
                ]
            )


# --- simulation traces ---------------------------------------------------------

def save_trace(result: SimulationResult, path: Path) -> None:
    """Per-request trace with one wait/service column pair per stage."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stages = len(result.records[0].queue_waits) if result.records else 0
    header = (
        ["request_id", "arrival", "init_share"]
        + [f"queue_wait_{k}" for k in range(stages)]
        + [f"service_{k}" for k in range(stages)]
        + ["completion", "pct"]
    )
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for r in result.records:
            writer.writerow(
                [r.request_id, r.arrival, r.init_share]
                + list(r.queue_waits)
                + list(r.service_times)
                + [r.completion, r.pct]
            )


def simulation_summary_to_dict(result: SimulationResult) -> Dict:
    import numpy as np

    return {
        "arrivals": result.arrivals,
        "completions": result.completions,
        "in_flight": result.in_flight,
        "throughput": result.throughput,
        "slo_met_fraction": result.slo_met_fraction,
        "containers_started": result.containers_started,
        "init_time_total": result.init_time_total,
        "duration_s": result.duration_s,
        "deadline_s": result.deadline_s,
        "p95_pct": float(np.quantile(result.pct_values, 0.95)) if result.pct_values else None,
    }


# --- registry persistence --------------------------------------------------------

def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", name)


def save_registry_entry(entry, directory: Path, position: int) -> Path:
    """One descriptor JSON per entry, referencing graph and model files."""
    from .registry import KnownPipelineEntry  # noqa: F401 — typed at runtime

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    slug = _slug(entry.pipeline.id)
    graph_file = f"{slug}.graph.json"
    save_callgraph(entry.callgraph, directory / graph_file)
    model_files = {}
    for fn_id, model in entry.models.items():
        model_file = f"{slug}.{_slug(fn_id)}.model.json"
        save_model(model, directory / model_file)
        model_files[fn_id] = model_file
    descriptor = {
        "position": position,
        "pipeline": {
            "id": entry.pipeline.id,
            "functions": list(entry.pipeline.functions),
            "deadline_s": entry.pipeline.deadline_s,
            "target_rate": entry.pipeline.target_rate,
        },
        "observed_throughput": entry.observed_throughput,
        "callgraph_file": graph_file,
        "model_files": model_files,
    }
    path = directory / f"{slug}.entry.json"
    write_json(descriptor, path)
    return path


def save_registry(registry, directory: Path) -> None:
    for position, entry in enumerate(registry):
        save_registry_entry(entry, directory, position)


def load_registry(directory: Path):
    from .registry import KnownPipelineEntry, PipelineRegistry

    directory = Path(directory)
    descriptors = sorted(
        (read_json(p) for p in directory.glob("*.entry.json")),
        key=lambda d: d["position"],
    )
    registry = PipelineRegistry()
    for doc in descriptors:
        p = doc["pipeline"]
        pipeline = PipelineSpec(
            id=p["id"],
            functions=tuple(p["functions"]),
            deadline_s=float(p["deadline_s"]),
            target_rate=float(p["target_rate"]),
        )
        entry = KnownPipelineEntry(
            pipeline=pipeline,
            callgraph=load_callgraph(directory / doc["callgraph_file"]),
            models={
                fn: load_model(directory / rel) for fn, rel in doc["model_files"].items()
            },
            observed_throughput=float(doc["observed_throughput"]),
        )
        registry.register(entry)
    return registry
