"""Builders shared by the registry, file-format and CLI tests."""
import numpy as np

from faasplan.callgraph import CallGraph, Vertex
from faasplan.model import ReplicaClassMap
from faasplan.predictor import PredictionModel


def constant_model(class_map: ReplicaClassMap, index: int) -> PredictionModel:
    """Model whose argmax is always `index`, whatever the features."""
    n = len(class_map)
    bias = np.zeros(n)
    bias[index] = 5.0
    return PredictionModel(
        layer_sizes=(3, n),
        weights=[np.zeros((3, n))],
        biases=[bias],
        class_map=class_map,
        feature_mean=np.zeros(3),
        feature_std=np.ones(3),
    )


def path_graph(labels, prefix="f"):
    """A directed path with the given vertex labels."""
    vertices = tuple(Vertex(f"{prefix}{i}", lab) for i, lab in enumerate(labels))
    edges = tuple((f"{prefix}{i}", f"{prefix}{i+1}") for i in range(len(labels) - 1))
    return CallGraph(vertices=vertices, edges=edges)
