"""Configuration selection for pipeline functions.

The predictor-backed path asks the per-function model for a replica
count at every container shape in the catalog and keeps the cheapest
candidate that fits the cluster. The grid-search oracle simulates every
(container, class) cell per stage instead and returns the cheapest cell
that meets the SLO — the ground truth the predictor is judged against.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from .errors import (
    DoesNotFitCluster,
    InsufficientMemory,
    NoFeasibleConfiguration,
    PackingFailed,
    ZeroBaseline,
)
from .model import (
    ClusterSpec,
    Configuration,
    ContainerConfig,
    FunctionSpec,
    PipelineSpec,
    PricingScheme,
    ReplicaClassMap,
    fits_cluster,
    monthly_cost,
    stage_deadlines,
)
from .predictor import PredictionModel, predict_proba
from .simulation import WorkloadSpec, meets_slo, measured_throughput, simulate


@dataclass(frozen=True)
class ConfigurationCatalog:
    container_grid: Tuple[ContainerConfig, ...]
    class_map: ReplicaClassMap = field(default_factory=ReplicaClassMap)

    def __post_init__(self) -> None:
        object.__setattr__(self, "container_grid", tuple(self.container_grid))
        if not self.container_grid:
            raise ValueError("container grid must be non-empty")
        if len(set(self.container_grid)) != len(self.container_grid):
            raise ValueError("container grid members must be distinct")

    def naive_max(self) -> Configuration:
        """Largest container with the largest replica class."""
        largest = max(self.container_grid, key=lambda c: (c.mem_mb, c.cpus))
        return Configuration(replicas=self.class_map.classes[-1], container=largest)


@dataclass(frozen=True)
class FunctionSelection:
    function_id: str
    configuration: Configuration
    probabilities: Tuple[float, ...]
    slo_probability: float
    monthly_cost: float


@dataclass(frozen=True)
class SelectionReport:
    pipeline_id: str
    selections: Tuple[FunctionSelection, ...]
    total_cost: float
    oracle_configurations: Optional[Dict[str, Configuration]] = None
    oracle_cost: Optional[float] = None

    def configuration_of(self, function_id: str) -> Configuration:
        for sel in self.selections:
            if sel.function_id == function_id:
                return sel.configuration
        raise KeyError(function_id)


@dataclass(frozen=True)
class OracleCell:
    function_id: str
    configuration: Configuration
    throughput: float
    monthly_cost: float
    slo_met: bool
    p95_pct: float


@dataclass(frozen=True)
class OracleResult:
    configurations: Dict[str, Configuration]
    total_cost: float
    table: Tuple[OracleCell, ...]


def enumerate_configurations(catalog: ConfigurationCatalog) -> List[Configuration]:
    """Full container x replica-class cross-product, container-major order."""
    return [
        Configuration(replicas=replicas, container=container)
        for container in catalog.container_grid
        for replicas in catalog.class_map.classes
    ]


def _candidate_key(cfg: Configuration, cost: float) -> Tuple[float, int, int, float]:
    return (cost, cfg.replicas, cfg.container.mem_mb, cfg.container.cpus)


def select_configuration(
    pipeline: PipelineSpec,
    models: Mapping[str, PredictionModel],
    catalog: ConfigurationCatalog,
    rate: float,
    cluster: ClusterSpec,
    pricing: PricingScheme,
) -> SelectionReport:
    """Cheapest predictor-backed configuration per pipeline function.

    For each container shape the model predicts a replica class; among
    the candidates that fit the cluster the minimum-cost one wins, with
    ties broken toward fewer replicas, then smaller memory, then smaller
    CPU. The reported probability is the softmax mass on classes at
    least as large as the chosen one.
    """
    selections = []
    total = 0.0
    for fn_id in pipeline.functions:
        model = models[fn_id]
        best = None
        for container in catalog.container_grid:
            probs = predict_proba(model, container, rate)
            index = int(np.argmax(probs))
            cfg = Configuration(replicas=model.class_map.value(index), container=container)
            if not fits_cluster(cfg, cluster):
                continue
            cost = monthly_cost(cfg, pricing)
            key = _candidate_key(cfg, cost)
            if best is None or key < best[0]:
                best = (key, cfg, cost, probs, index)
        if best is None:
            raise NoFeasibleConfiguration(
                f"no catalog container fits the cluster for {fn_id}"
            )
        _, cfg, cost, probs, index = best
        selections.append(
            FunctionSelection(
                function_id=fn_id,
                configuration=cfg,
                probabilities=tuple(float(p) for p in probs),
                slo_probability=float(probs[index:].sum()),
                monthly_cost=cost,
            )
        )
        total += cost
    return SelectionReport(pipeline_id=pipeline.id, selections=tuple(selections), total_cost=total)


def with_oracle(report: SelectionReport, oracle: OracleResult) -> SelectionReport:
    return replace(
        report,
        oracle_configurations=dict(oracle.configurations),
        oracle_cost=oracle.total_cost,
    )


def _stage_cell(
    fn: FunctionSpec,
    stage: PipelineSpec,
    cfg: Configuration,
    cluster: ClusterSpec,
    workload: WorkloadSpec,
    pricing: PricingScheme,
    quantile: float,
) -> OracleCell:
    cost = monthly_cost(cfg, pricing)
    try:
        result = simulate(stage, {fn.id: cfg}, cluster, workload, {fn.id: fn})
    except (DoesNotFitCluster, PackingFailed, InsufficientMemory):
        return OracleCell(
            function_id=fn.id,
            configuration=cfg,
            throughput=0.0,
            monthly_cost=cost,
            slo_met=False,
            p95_pct=float("inf"),
        )
    return OracleCell(
        function_id=fn.id,
        configuration=cfg,
        throughput=measured_throughput(result),
        monthly_cost=cost,
        slo_met=meets_slo(result, stage.deadline_s, quantile),
        p95_pct=float(np.quantile(result.pct_values, quantile)) if result.pct_values else float("inf"),
    )


def grid_search_oracle(
    pipeline: PipelineSpec,
    catalog: ConfigurationCatalog,
    cluster: ClusterSpec,
    workload: WorkloadSpec,
    deadline: float,
    functions: Mapping[str, FunctionSpec],
    quantile: float = 0.95,
    pricing: PricingScheme = PricingScheme(rate_per_gb_second=0.000017),
    jobs: int = 1,
) -> OracleResult:
    """Simulate every configuration per stage; keep the cheapest SLO-met one.

    The deadline splits across stages proportionally to reference
    execution times; each stage searches independently (cells that fail
    to place on the cluster count as not meeting the SLO). Raises
    NoFeasibleConfiguration when some stage has no passing cell.
    """
    fns = [functions[f] for f in pipeline.functions]
    shares = stage_deadlines(
        PipelineSpec(pipeline.id, pipeline.functions, deadline, pipeline.target_rate), fns
    )
    cells: List[Tuple[FunctionSpec, PipelineSpec, Configuration]] = []
    for fn, share in zip(fns, shares):
        stage = PipelineSpec(
            id=f"{pipeline.id}:{fn.id}",
            functions=(fn.id,),
            deadline_s=share,
            target_rate=workload.rate,
        )
        for cfg in enumerate_configurations(catalog):
            cells.append((fn, stage, cfg))

    def run(cell: Tuple[FunctionSpec, PipelineSpec, Configuration]) -> OracleCell:
        fn, stage, cfg = cell
        return _stage_cell(fn, stage, cfg, cluster, workload, pricing, quantile)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            table = list(pool.map(run, cells))
    else:
        table = [run(cell) for cell in cells]

    chosen: Dict[str, Configuration] = {}
    total = 0.0
    for fn in fns:
        passing = [c for c in table if c.function_id == fn.id and c.slo_met]
        if not passing:
            raise NoFeasibleConfiguration(
                f"no configuration meets the SLO for {fn.id} at rate {workload.rate}"
            )
        best = min(passing, key=lambda c: _candidate_key(c.configuration, c.monthly_cost))
        chosen[fn.id] = best.configuration
        total += best.monthly_cost
    return OracleResult(configurations=chosen, total_cost=total, table=tuple(table))


def performance_similarity(thr_agnostic: float, thr_similar: float) -> float:
    """ps = |1 - (thr_agnostic - thr_similar) / thr_similar| * 100."""
    if thr_similar <= 0:
        raise ZeroBaseline("similar-pipeline throughput must be positive")
    return abs(1.0 - (thr_agnostic - thr_similar) / thr_similar) * 100.0


def cost_saving_vs_naive(
    selected_total: float, catalog: ConfigurationCatalog, pricing: PricingScheme,
    stages: int = 1,
) -> float:
    """Percent saved against the naive maximum configuration.

    The naive baseline provisions every stage with the largest container
    at the largest replica class.
    """
    naive = monthly_cost(catalog.naive_max(), pricing) * stages
    return (1.0 - selected_total / naive) * 100.0
