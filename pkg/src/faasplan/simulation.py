"""Deterministic discrete-event simulation of a pipeline under load.

Each pipeline stage is a multi-server FIFO queue: cfg.replicas servers
with deterministic service time exec_time(f, w). Replicas start cold;
the first request dispatched to a cold replica additionally pays the
function's init_time. Requests traverse stages in pipeline order.

Arrivals stop at the workload horizon (duration_s) but the run drains
completely, so every request carries a full record. Horizon bookkeeping
(completions vs in-flight at duration_s) is kept for conservation and
throughput accounting.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .errors import DoesNotFitCluster, PackingFailed
from .model import (
    ClusterSpec,
    Configuration,
    ContainerConfig,
    FunctionSpec,
    PipelineSpec,
    ReplicaClassMap,
    exec_time,
    fits_cluster,
    stage_deadlines,
)
from .predictor import FeatureVector, TrainingSample

ARRIVAL_KINDS = ("uniform", "poisson")


@dataclass(frozen=True)
class WorkloadSpec:
    rate: float
    duration_s: float
    arrival_kind: str = "uniform"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        if self.arrival_kind not in ARRIVAL_KINDS:
            raise ValueError(f"arrival_kind must be one of {ARRIVAL_KINDS}")


@dataclass(frozen=True)
class RequestRecord:
    """Full timing record of one request through every stage."""

    request_id: int
    arrival: float
    queue_waits: Tuple[float, ...]
    service_times: Tuple[float, ...]
    init_share: float
    completion: float

    @property
    def pct(self) -> float:
        return self.completion - self.arrival


@dataclass(frozen=True)
class SimulationResult:
    records: Tuple[RequestRecord, ...]
    pct_values: Tuple[float, ...]
    throughput: float
    slo_met_fraction: float
    containers_started: int
    init_time_total: float
    arrivals: int
    completions: int
    in_flight: int
    duration_s: float
    deadline_s: float


def arrival_times(workload: WorkloadSpec) -> np.ndarray:
    """Request arrival instants in [0, duration).

    The request count is fixed at floor(rate * duration) for both kinds,
    so offered load never exceeds the nominal rate. Uniform arrivals are
    evenly spaced at 1/rate; poisson arrivals are the order statistics
    of that many uniform draws, i.e. a Poisson process conditioned on
    its count.
    """
    n = int(workload.rate * workload.duration_s)
    if workload.arrival_kind == "uniform":
        return np.arange(n) / workload.rate
    rng = np.random.default_rng(workload.seed)
    return np.sort(rng.uniform(0.0, workload.duration_s, size=n))


def pack_replicas(
    configs: Mapping[str, Configuration], cluster: ClusterSpec
) -> List[List[Tuple[str, int]]]:
    """First-fit-decreasing placement of every replica onto the nodes.

    Items are sorted by CPU demand (memory, then function id as
    tie-breaks) and placed on the first node with room for both
    resources. Returns the per-node placement; raises PackingFailed when
    any replica cannot be placed.
    """
    items = []
    for fn_id in sorted(configs):
        cfg = configs[fn_id]
        for replica in range(cfg.replicas):
            items.append((cfg.container.cpus, cfg.container.mem_mb, fn_id, replica))
    items.sort(key=lambda it: (-it[0], -it[1], it[2], it[3]))
    free = [[node.cpus, node.mem_mb] for node in cluster.nodes]
    placement: List[List[Tuple[str, int]]] = [[] for _ in cluster.nodes]
    for cpus, mem, fn_id, replica in items:
        for i, (fc, fm) in enumerate(free):
            if fc >= cpus and fm >= mem:
                free[i][0] -= cpus
                free[i][1] -= mem
                placement[i].append((fn_id, replica))
                break
        else:
            raise PackingFailed(
                f"no node can host replica {replica} of {fn_id} "
                f"({cpus} cpus, {mem} MB)"
            )
    return placement


def _run_stages(
    stage_fns: Sequence[FunctionSpec],
    stage_cfgs: Sequence[Configuration],
    arrivals: np.ndarray,
    hop_latency_s: float,
) -> Tuple[List[RequestRecord], int, float]:
    n = len(arrivals)
    waits = [[0.0] * len(stage_fns) for _ in range(n)]
    services = [[0.0] * len(stage_fns) for _ in range(n)]
    init_shares = [0.0] * n
    ready = list(arrivals)
    containers_started = 0
    init_total = 0.0
    for k, (fn, cfg) in enumerate(zip(stage_fns, stage_cfgs)):
        exec_s = exec_time(fn, cfg.container)
        servers = [(0.0, rid) for rid in range(cfg.replicas)]
        heapq.heapify(servers)
        cold = [True] * cfg.replicas
        order = sorted(range(n), key=lambda i: (ready[i], i))
        next_ready = list(ready)
        for i in order:
            floor = ready[i] + (hop_latency_s if k > 0 else 0.0)
            avail, rid = heapq.heappop(servers)
            start = max(floor, avail)
            init_s = 0.0
            if cold[rid]:
                cold[rid] = False
                init_s = fn.init_time
                containers_started += 1
                init_total += init_s
            completion = start + init_s + exec_s
            heapq.heappush(servers, (completion, rid))
            waits[i][k] = start - ready[i]
            services[i][k] = exec_s
            init_shares[i] += init_s
            next_ready[i] = completion
        ready = next_ready
    records = [
        RequestRecord(
            request_id=i,
            arrival=float(arrivals[i]),
            queue_waits=tuple(waits[i]),
            service_times=tuple(services[i]),
            init_share=init_shares[i],
            completion=ready[i],
        )
        for i in range(n)
    ]
    return records, containers_started, init_total


def simulate_arrivals(
    pipeline: PipelineSpec,
    configs: Mapping[str, Configuration],
    cluster: ClusterSpec,
    arrivals: np.ndarray,
    functions: Mapping[str, FunctionSpec],
    duration_s: float,
    hop_latency_s: float = 0.0,
) -> SimulationResult:
    """Run the pipeline against explicit arrival instants."""
    stage_fns = []
    stage_cfgs = []
    for fn_id in pipeline.functions:
        if fn_id not in configs:
            raise ValueError(f"no configuration for pipeline function {fn_id}")
        if fn_id not in functions:
            raise ValueError(f"no function spec for pipeline function {fn_id}")
        fn, cfg = functions[fn_id], configs[fn_id]
        exec_time(fn, cfg.container)  # raises InsufficientMemory early
        if not fits_cluster(cfg, cluster):
            raise DoesNotFitCluster(
                f"{fn_id}: container {cfg.container} fits no node in the cluster"
            )
        stage_fns.append(fn)
        stage_cfgs.append(cfg)
    pack_replicas({fid: configs[fid] for fid in pipeline.functions}, cluster)

    records, started, init_total = _run_stages(
        stage_fns, stage_cfgs, np.asarray(arrivals, dtype=float), hop_latency_s
    )
    pct = tuple(r.pct for r in records)
    n = len(records)
    within_deadline = sum(1 for r in records if r.pct <= pipeline.deadline_s)
    completed_by_horizon = sum(1 for r in records if r.completion <= duration_s)
    served = sum(
        1 for r in records if r.completion <= duration_s and r.pct <= pipeline.deadline_s
    )
    return SimulationResult(
        records=tuple(records),
        pct_values=pct,
        throughput=served / duration_s,
        slo_met_fraction=(within_deadline / n) if n else 0.0,
        containers_started=started,
        init_time_total=init_total,
        arrivals=n,
        completions=completed_by_horizon,
        in_flight=n - completed_by_horizon,
        duration_s=duration_s,
        deadline_s=pipeline.deadline_s,
    )


def simulate(
    pipeline: PipelineSpec,
    configs: Mapping[str, Configuration],
    cluster: ClusterSpec,
    workload: WorkloadSpec,
    functions: Mapping[str, FunctionSpec],
    hop_latency_s: float = 0.0,
) -> SimulationResult:
    """Event-driven run of the whole pipeline under the workload."""
    return simulate_arrivals(
        pipeline,
        configs,
        cluster,
        arrival_times(workload),
        functions,
        duration_s=workload.duration_s,
        hop_latency_s=hop_latency_s,
    )


def meets_slo(result: SimulationResult, d_k: float, quantile: float = 0.95) -> bool:
    """Eq-style SLO verdict: the PCT quantile must not exceed the deadline."""
    if not result.pct_values:
        raise ValueError("meets_slo needs a non-empty result")
    if not 0.0 <= quantile <= 1.0:
        raise ValueError("quantile must lie in [0, 1]")
    return float(np.quantile(result.pct_values, quantile)) <= d_k


def measured_throughput(result: SimulationResult) -> float:
    """Requests served within the deadline by the horizon, per second."""
    served = sum(
        1
        for r in result.records
        if r.completion <= result.duration_s and r.pct <= result.deadline_s
    )
    return served / result.duration_s


def generate_training_data(
    pipeline: PipelineSpec,
    cluster: ClusterSpec,
    config_grid: Sequence[ContainerConfig],
    class_map: ReplicaClassMap,
    rates: Sequence[float],
    functions: Mapping[str, FunctionSpec],
    duration_s: float = 30.0,
    arrival_kind: str = "uniform",
    seed: int = 0,
    quantile: float = 0.95,
) -> Dict[str, List[TrainingSample]]:
    """Label every (container, rate) cell per function via simulation.

    The label is the smallest replica class whose single-stage
    simulation meets that stage's share of the pipeline deadline (or the
    largest class when none does). Deadline shares are proportional to
    the functions' reference execution times.
    """
    if not config_grid:
        raise ValueError("config_grid must be non-empty")
    shares = stage_deadlines(pipeline, [functions[f] for f in pipeline.functions])
    dataset: Dict[str, List[TrainingSample]] = {}
    for fn_id, share in zip(pipeline.functions, shares):
        samples: List[TrainingSample] = []
        for container in config_grid:
            for rate in rates:
                stage = PipelineSpec(
                    id=f"{pipeline.id}:{fn_id}",
                    functions=(fn_id,),
                    deadline_s=share,
                    target_rate=rate,
                )
                workload = WorkloadSpec(
                    rate=rate, duration_s=duration_s, arrival_kind=arrival_kind, seed=seed
                )
                label = len(class_map) - 1
                for index, replicas in enumerate(class_map.classes):
                    cfg = {fn_id: Configuration(replicas=replicas, container=container)}
                    result = simulate(stage, cfg, cluster, workload, functions)
                    if meets_slo(result, share, quantile):
                        label = index
                        break
                samples.append(
                    TrainingSample(
                        features=FeatureVector(
                            mem_mb=container.mem_mb,
                            cpus=container.cpus,
                            request_rate=rate,
                        ),
                        label=label,
                    )
                )
        dataset[fn_id] = samples
    return dataset
