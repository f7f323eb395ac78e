"""Replica-count classifier: a small dense network trained from scratch.

Maps (memory, cpus, request rate) onto one of the replica classes.
Everything is plain numpy: forward pass, backprop, mini-batch gradient
descent. Training is bit-deterministic for a fixed seed; trained models
are treated as immutable and are safe to share across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import DegenerateDataset, DimensionMismatch
from .model import ContainerConfig, ReplicaClassMap

EPS = 1e-12

LOSS_KINDS = ("cce", "klde", "psse")


@dataclass(frozen=True)
class FeatureVector:
    """Raw (unstandardized) inputs of one prediction."""

    mem_mb: float
    cpus: float
    request_rate: float

    def as_array(self) -> np.ndarray:
        return np.array([self.mem_mb, self.cpus, self.request_rate], dtype=float)


@dataclass(frozen=True)
class TrainingSample:
    features: FeatureVector
    label: int  # index into the replica class map


@dataclass
class PredictionModel:
    """Trained network weights plus everything needed to reuse them."""

    layer_sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    class_map: ReplicaClassMap
    feature_mean: np.ndarray
    feature_std: np.ndarray
    loss_kind: str = "cce"

    def validate(self) -> None:
        sizes = self.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise DimensionMismatch("one weight/bias pair required per layer transition")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i], sizes[i + 1]):
                raise DimensionMismatch(
                    f"layer {i}: expected weights {(sizes[i], sizes[i + 1])}, got {w.shape}"
                )
            if b.shape != (sizes[i + 1],):
                raise DimensionMismatch(f"layer {i}: expected bias ({sizes[i + 1]},)")
        if sizes[-1] != len(self.class_map):
            raise DimensionMismatch("final layer width must equal the class count")
        if self.feature_mean.shape != (sizes[0],) or self.feature_std.shape != (sizes[0],):
            raise DimensionMismatch("feature statistics must match the input width")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")


@dataclass(frozen=True)
class TrainingConfig:
    hidden_sizes: Tuple[int, ...] = (64, 64)
    learning_rate: float = 0.05
    epochs: int = 300
    batch_size: int = 32
    seed: int = 0
    loss_kind: str = "cce"
    holdout_fraction: float = 0.2
    class_map: ReplicaClassMap = field(default_factory=ReplicaClassMap)

    def __post_init__(self) -> None:
        if any(h < 1 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        if self.loss_kind not in LOSS_KINDS:
            raise ValueError(f"loss kind must be one of {LOSS_KINDS}")


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    loss: float
    accuracy: float
    macro_f1: float
    macro_precision: float
    macro_recall: float


@dataclass(frozen=True)
class EvaluationReport:
    accuracy: float
    macro_f1: float
    macro_precision: float
    macro_recall: float
    mean_loss: float


def relu(h: float) -> float:
    """max(0, h)."""
    return h if h > 0.0 else 0.0


def softmax(q: Sequence[float]) -> np.ndarray:
    """Probability vector of the logits, max-shifted for stability."""
    q = np.asarray(q, dtype=float)
    shifted = q - q.max()
    e = np.exp(shifted)
    return e / e.sum()


def standardize(model: PredictionModel, raw: np.ndarray) -> np.ndarray:
    return (raw - model.feature_mean) / model.feature_std


def _forward_matrix(
    weights: Sequence[np.ndarray], biases: Sequence[np.ndarray], x: np.ndarray
) -> Tuple[List[np.ndarray], np.ndarray]:
    """Hidden activations plus softmax output for a standardized batch."""
    activations = [x]
    for w, b in zip(weights[:-1], biases[:-1]):
        x = np.maximum(x @ w + b, 0.0)
        activations.append(x)
    logits = x @ weights[-1] + biases[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    return activations, probs


def forward(model: PredictionModel, x: FeatureVector) -> np.ndarray:
    """Class probabilities for one raw feature vector."""
    model.validate()
    std = standardize(model, x.as_array()).reshape(1, -1)
    _, probs = _forward_matrix(model.weights, model.biases, std)
    return probs[0]


def loss(kind: str, predicted: Sequence[float], target: Sequence[float]) -> float:
    """One of the three training losses on a single prediction.

    cce:  -sum(t * log p)
    klde:  sum(t * log(t / p)), with 0 * log 0 = 0
    psse:  sum(p - t * log p)
    Probabilities are clipped at 1e-12 before any logarithm.
    """
    p = np.asarray(predicted, dtype=float)
    t = np.asarray(target, dtype=float)
    logp = np.log(np.clip(p, EPS, 1.0))
    if kind == "cce":
        return float(-(t * logp).sum())
    if kind == "klde":
        tlogt = np.where(t > 0.0, t * np.log(np.clip(t, EPS, 1.0)), 0.0)
        return float((tlogt - t * logp).sum())
    if kind == "psse":
        return float((p - t * logp).sum())
    raise ValueError(f"unknown loss kind {kind!r}")


def _mean_loss(kind: str, probs: np.ndarray, onehot: np.ndarray) -> float:
    logp = np.log(np.clip(probs, EPS, 1.0))
    if kind == "cce":
        per = -(onehot * logp).sum(axis=1)
    elif kind == "klde":
        # one-hot targets make t*log t vanish
        per = -(onehot * logp).sum(axis=1)
    elif kind == "psse":
        per = probs.sum(axis=1) - (onehot * logp).sum(axis=1)
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return float(per.mean())


def loss_gradients(
    model: PredictionModel, samples: Sequence[TrainingSample]
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Analytic gradients of the mean loss w.r.t. all weights and biases.

    All three loss kinds share the gradient (p - t) at the logits: the
    extra sum(p) term of psse is constant under softmax and the t*log t
    term of klde does not depend on the weights.
    """
    model.validate()
    raw = np.stack([s.features.as_array() for s in samples])
    x = (raw - model.feature_mean) / model.feature_std
    onehot = np.zeros((len(samples), len(model.class_map)))
    onehot[np.arange(len(samples)), [s.label for s in samples]] = 1.0
    activations, probs = _forward_matrix(model.weights, model.biases, x)
    return _backprop(model.weights, activations, probs, onehot)


def _backprop(
    weights: Sequence[np.ndarray],
    activations: List[np.ndarray],
    probs: np.ndarray,
    onehot: np.ndarray,
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    m = probs.shape[0]
    delta = (probs - onehot) / m
    grads_w: List[np.ndarray] = [np.empty(0)] * len(weights)
    grads_b: List[np.ndarray] = [np.empty(0)] * len(weights)
    for layer in range(len(weights) - 1, -1, -1):
        grads_w[layer] = activations[layer].T @ delta
        grads_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (activations[layer] > 0.0)
    return grads_w, grads_b


def _glorot_layers(
    sizes: Sequence[int], rng: np.random.Generator
) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _stratified_split(
    labels: np.ndarray, fraction: float, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded per-class shuffle so every class with >= 2 samples appears
    on both sides of the split."""
    train_idx: List[int] = []
    hold_idx: List[int] = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n_hold = int(round(len(idx) * fraction))
        n_hold = max(1, min(n_hold, len(idx) - 1)) if len(idx) >= 2 else 0
        hold_idx.extend(idx[:n_hold])
        train_idx.extend(idx[n_hold:])
    return np.sort(np.array(train_idx, dtype=int)), np.sort(np.array(hold_idx, dtype=int))


def _prediction_metrics(
    y_true: np.ndarray, y_pred: np.ndarray, n_classes: int
) -> Tuple[float, float, float, float]:
    accuracy = float((y_true == y_pred).mean())
    precisions, recalls, f1s = [], [], []
    for cls in range(n_classes):
        tp = int(((y_pred == cls) & (y_true == cls)).sum())
        fp = int(((y_pred == cls) & (y_true != cls)).sum())
        fn = int(((y_pred != cls) & (y_true == cls)).sum())
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)
    # absent classes stay in the divisor
    return (
        accuracy,
        float(np.mean(f1s)),
        float(np.mean(precisions)),
        float(np.mean(recalls)),
    )


def train(
    samples: Sequence[TrainingSample], hyper: TrainingConfig = TrainingConfig()
) -> Tuple[PredictionModel, List[EpochMetrics]]:
    """Mini-batch gradient descent with backpropagation.

    Returns the trained model plus per-epoch metrics on a held-out
    split. Deterministic for a fixed seed.
    """
    if not samples:
        raise DegenerateDataset("no training samples")
    labels = np.array([s.label for s in samples], dtype=int)
    if labels.min() < 0 or labels.max() >= len(hyper.class_map):
        raise ValueError("sample label outside the class map")
    if len(np.unique(labels)) < 2:
        raise DegenerateDataset("training data holds a single label")

    raw = np.stack([s.features.as_array() for s in samples])
    rng = np.random.default_rng(hyper.seed)
    train_idx, hold_idx = _stratified_split(labels, hyper.holdout_fraction, rng)

    mean = raw[train_idx].mean(axis=0)
    std = raw[train_idx].std(axis=0)
    std = np.where(std > 0.0, std, 1.0)
    x_all = (raw - mean) / std

    n_classes = len(hyper.class_map)
    sizes = (raw.shape[1],) + tuple(hyper.hidden_sizes) + (n_classes,)
    weights, biases = _glorot_layers(sizes, rng)

    x_train, y_train = x_all[train_idx], labels[train_idx]
    x_hold, y_hold = x_all[hold_idx], labels[hold_idx]
    onehot_train = np.zeros((len(y_train), n_classes))
    onehot_train[np.arange(len(y_train)), y_train] = 1.0
    onehot_hold = np.zeros((len(y_hold), n_classes))
    if len(y_hold):
        onehot_hold[np.arange(len(y_hold)), y_hold] = 1.0

    history: List[EpochMetrics] = []
    for epoch in range(hyper.epochs):
        order = rng.permutation(len(x_train))
        for start in range(0, len(order), hyper.batch_size):
            batch = order[start : start + hyper.batch_size]
            activations, probs = _forward_matrix(weights, biases, x_train[batch])
            grads_w, grads_b = _backprop(weights, activations, probs, onehot_train[batch])
            for layer in range(len(weights)):
                weights[layer] -= hyper.learning_rate * grads_w[layer]
                biases[layer] -= hyper.learning_rate * grads_b[layer]
        xe, ye, te = (x_hold, y_hold, onehot_hold) if len(y_hold) else (x_train, y_train, onehot_train)
        _, probs = _forward_matrix(weights, biases, xe)
        acc, f1, prec, rec = _prediction_metrics(ye, probs.argmax(axis=1), n_classes)
        history.append(
            EpochMetrics(
                epoch=epoch,
                loss=_mean_loss(hyper.loss_kind, probs, te),
                accuracy=acc,
                macro_f1=f1,
                macro_precision=prec,
                macro_recall=rec,
            )
        )

    model = PredictionModel(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        class_map=hyper.class_map,
        feature_mean=mean,
        feature_std=std,
        loss_kind=hyper.loss_kind,
    )
    model.validate()
    return model, history


def predict_replicas(model: PredictionModel, container: ContainerConfig, rate: float) -> int:
    """Replica count for a container shape at a request rate.

    Ties at the argmax resolve to the smaller replica count (argmax
    returns the first maximum and the class map is ascending).
    """
    probs = forward(model, FeatureVector(container.mem_mb, container.cpus, rate))
    return model.class_map.value(int(np.argmax(probs)))


def predict_proba(model: PredictionModel, container: ContainerConfig, rate: float) -> np.ndarray:
    return forward(model, FeatureVector(container.mem_mb, container.cpus, rate))


def evaluate(model: PredictionModel, samples: Sequence[TrainingSample]) -> EvaluationReport:
    """Accuracy, macro precision/recall/F1 and mean loss over samples.

    Macro averages divide by the full class-map size, so classes absent
    from the sample set pull the averages down rather than being
    skipped.
    """
    if not samples:
        raise ValueError("evaluate needs at least one sample")
    model.validate()
    raw = np.stack([s.features.as_array() for s in samples])
    x = (raw - model.feature_mean) / model.feature_std
    y = np.array([s.label for s in samples], dtype=int)
    _, probs = _forward_matrix(model.weights, model.biases, x)
    onehot = np.zeros((len(samples), len(model.class_map)))
    onehot[np.arange(len(samples)), y] = 1.0
    acc, f1, prec, rec = _prediction_metrics(y, probs.argmax(axis=1), len(model.class_map))
    return EvaluationReport(
        accuracy=acc,
        macro_f1=f1,
        macro_precision=prec,
        macro_recall=rec,
        mean_loss=_mean_loss(model.loss_kind, probs, onehot),
    )


def model_to_dict(model: PredictionModel) -> Dict:
    """JSON-ready dict with flattened row-major weights."""
    model.validate()
    return {
        "layer_sizes": list(model.layer_sizes),
        "weights": [w.ravel().tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "class_map": list(model.class_map.classes),
        "feature_mean": model.feature_mean.tolist(),
        "feature_std": model.feature_std.tolist(),
        "loss_kind": model.loss_kind,
    }


def model_from_dict(doc: Dict) -> PredictionModel:
    sizes = tuple(int(s) for s in doc["layer_sizes"])
    weights = [
        np.array(flat, dtype=float).reshape(sizes[i], sizes[i + 1])
        for i, flat in enumerate(doc["weights"])
    ]
    biases = [np.array(b, dtype=float) for b in doc["biases"]]
    model = PredictionModel(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        class_map=ReplicaClassMap(tuple(doc["class_map"])),
        feature_mean=np.array(doc["feature_mean"], dtype=float),
        feature_std=np.array(doc["feature_std"], dtype=float),
        loss_kind=doc.get("loss_kind", "cce"),
    )
    model.validate()
    return model
