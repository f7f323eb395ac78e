"""Replica and container planning for serverless function pipelines.

The package glues four pieces together: a queueing simulator that
replays a pipeline under a workload, per-function replica-class
predictors trained on simulator output, a configuration selector with a
grid-search oracle for validation, and a call-graph registry that lets
unknown pipelines reuse the models of their closest known relative.
"""

from .callgraph import CallGraph, GedResult, Vertex, approx_ged, exact_ged
from .errors import FaasplanError
from .model import (
    ClusterSpec,
    Configuration,
    ContainerConfig,
    FunctionSpec,
    NodeSpec,
    PipelineSpec,
    PricingScheme,
    ReplicaClassMap,
    exec_time,
    monthly_cost,
)
from .predictor import PredictionModel, TrainingConfig, predict_replicas, train
from .provisioner import (
    ConfigurationCatalog,
    SelectionReport,
    grid_search_oracle,
    performance_similarity,
    select_configuration,
)
from .registry import KnownPipelineEntry, PipelineRegistry
from .simulation import WorkloadSpec, generate_training_data, meets_slo, simulate

__all__ = [
    "CallGraph",
    "ClusterSpec",
    "Configuration",
    "ConfigurationCatalog",
    "ContainerConfig",
    "FaasplanError",
    "FunctionSpec",
    "GedResult",
    "KnownPipelineEntry",
    "NodeSpec",
    "PipelineRegistry",
    "PipelineSpec",
    "PredictionModel",
    "PricingScheme",
    "ReplicaClassMap",
    "SelectionReport",
    "TrainingConfig",
    "Vertex",
    "WorkloadSpec",
    "approx_ged",
    "exact_ged",
    "exec_time",
    "generate_training_data",
    "grid_search_oracle",
    "meets_slo",
    "monthly_cost",
    "performance_similarity",
    "predict_replicas",
    "select_configuration",
    "simulate",
    "train",
]
