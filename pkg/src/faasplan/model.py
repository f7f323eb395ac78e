"""Core domain model: functions, pipelines, containers, clusters, pricing.

All value types are immutable dataclasses validated on construction.
Resource math lives here as free functions so the simulator, the
provisioner and the predictor all agree on one definition of execution
time and monthly cost.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

from .errors import InsufficientMemory

#: Billing month used by the always-warm reservation cost model (30 days).
SECONDS_PER_MONTH = 2_592_000

#: Default replica classes the predictor chooses between.
DEFAULT_REPLICA_CLASSES = (5, 10, 15, 20, 25, 30)


@dataclass(frozen=True)
class FunctionSpec:
    """A deployable function with a calibrated service-time model.

    base_exec_time is the measured execution time (seconds) at the
    reference allocation (ref_cpu cores, ref_mem MB). Execution time
    scales with allocated CPU via cpu_scaling_exponent; memory above
    ref_mem buys nothing, memory below it is rejected.
    """

    id: str
    base_exec_time: float
    ref_cpu: float
    ref_mem: int
    cpu_scaling_exponent: float
    init_time: float

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("function id must be non-empty")
        if self.base_exec_time <= 0:
            raise ValueError("base_exec_time must be positive")
        if self.ref_cpu <= 0:
            raise ValueError("ref_cpu must be positive")
        if self.ref_mem <= 0:
            raise ValueError("ref_mem must be positive")
        if self.cpu_scaling_exponent < 0:
            raise ValueError("cpu_scaling_exponent must be non-negative")
        if self.init_time < 0:
            raise ValueError("init_time must be non-negative")


@dataclass(frozen=True)
class ContainerConfig:
    """Memory/CPU shape of one container replica."""

    mem_mb: int
    cpus: float

    def __post_init__(self) -> None:
        if self.mem_mb <= 0:
            raise ValueError("mem_mb must be positive")
        if self.cpus <= 0:
            raise ValueError("cpus must be positive")


@dataclass(frozen=True)
class Configuration:
    """Replica count plus container shape for one pipeline function."""

    replicas: int
    container: ContainerConfig

    def __post_init__(self) -> None:
        if self.replicas < 1:
            raise ValueError("replicas must be at least 1")


@dataclass(frozen=True)
class PipelineSpec:
    """An ordered chain of function ids with an end-to-end deadline."""

    id: str
    functions: Tuple[str, ...]
    deadline_s: float
    target_rate: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "functions", tuple(self.functions))
        if not self.id:
            raise ValueError("pipeline id must be non-empty")
        if not self.functions:
            raise ValueError("pipeline needs at least one function")
        if len(set(self.functions)) != len(self.functions):
            raise ValueError("pipeline function ids must be unique")
        if self.deadline_s <= 0:
            raise ValueError("deadline_s must be positive")
        if self.target_rate <= 0:
            raise ValueError("target_rate must be positive")


@dataclass(frozen=True)
class NodeSpec:
    """Schedulable capacity of one cluster node."""

    cpus: float
    mem_mb: int

    def __post_init__(self) -> None:
        if self.cpus <= 0:
            raise ValueError("node cpus must be positive")
        if self.mem_mb <= 0:
            raise ValueError("node mem_mb must be positive")


@dataclass(frozen=True)
class ClusterSpec:
    """The nodes available for placing replicas."""

    nodes: Tuple[NodeSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if not self.nodes:
            raise ValueError("cluster needs at least one node")


@dataclass(frozen=True)
class PricingScheme:
    """GB-second pricing with an always-warm monthly reservation."""

    rate_per_gb_second: float
    seconds_per_month: int = SECONDS_PER_MONTH

    def __post_init__(self) -> None:
        if self.rate_per_gb_second <= 0:
            raise ValueError("rate_per_gb_second must be positive")
        if self.seconds_per_month <= 0:
            raise ValueError("seconds_per_month must be positive")


@dataclass(frozen=True)
class ReplicaClassMap:
    """Ascending distinct replica counts the classifier selects from."""

    classes: Tuple[int, ...] = field(default=DEFAULT_REPLICA_CLASSES)

    def __post_init__(self) -> None:
        object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))
        if not self.classes:
            raise ValueError("class map needs at least one class")
        if any(c < 1 for c in self.classes):
            raise ValueError("replica classes must be positive")
        if any(b <= a for a, b in zip(self.classes, self.classes[1:])):
            raise ValueError("replica classes must be strictly ascending")

    def __len__(self) -> int:
        return len(self.classes)

    def value(self, index: int) -> int:
        return self.classes[index]

    def index_of(self, replicas: int) -> int:
        return self.classes.index(replicas)


def exec_time(fn: FunctionSpec, container: ContainerConfig) -> float:
    """Execution time of fn inside the given container, in seconds.

    Raises InsufficientMemory when the container falls below the
    function's reference memory footprint.
    """
    if container.mem_mb < fn.ref_mem:
        raise InsufficientMemory(
            f"{fn.id} needs {fn.ref_mem} MB, container has {container.mem_mb} MB"
        )
    return fn.base_exec_time * (fn.ref_cpu / container.cpus) ** fn.cpu_scaling_exponent


def fits_cluster(config: Configuration, cluster: ClusterSpec) -> bool:
    """True iff at least one node can host a single replica of the config."""
    c = config.container
    return any(node.cpus >= c.cpus and node.mem_mb >= c.mem_mb for node in cluster.nodes)


def monthly_cost(config: Configuration, pricing: PricingScheme) -> float:
    """Reservation cost of keeping all replicas warm for one month."""
    gb = config.container.mem_mb / 1024.0
    return config.replicas * gb * pricing.seconds_per_month * pricing.rate_per_gb_second


def stage_deadlines(
    pipeline: PipelineSpec,
    functions: Sequence[FunctionSpec],
) -> Tuple[float, ...]:
    """Split the end-to-end deadline across stages.

    The split is proportional to each function's reference execution
    time, so slower stages receive a proportionally larger share. Used
    wherever a single stage must be judged in isolation (training-label
    generation, per-stage oracle search).
    """
    if len(functions) != len(pipeline.functions):
        raise ValueError("one FunctionSpec required per pipeline stage")
    weights = [fn.base_exec_time for fn in functions]
    total = sum(weights)
    return tuple(pipeline.deadline_s * w / total for w in weights)
