"""Embedding-space classifier heads behind a small pluggable surface.

Two kinds ship: a linear softmax head trained by full-batch gradient
descent on mean cross-entropy (zero-initialized, fixed epoch count, no
regularization -- deterministic and tuning-free on unit-norm features),
and a nearest-centroid head whose probabilities are a softmax over scaled
centroid similarities. Heavier models can implement the same train /
predict_proba / predict_labels surface.

Class indices are 1-based (1..k) everywhere on the public surface; row i
of a parameter matrix corresponds to class i+1.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DimensionError, TrainingError
from .vecstore import EmbeddingStore

LINEAR = "linear-softmax"
CENTROID = "nearest-centroid"


@dataclass(frozen=True)
class TrainConfig:
    kind: str = LINEAR
    epochs: int = 200
    step_size: float = 0.5
    centroid_scale: float = 10.0  # inverse temperature on centroid similarities
    seed: int = 0


@dataclass(eq=False)
class TrainingSet:
    """Pseudo-labeled examples: embedding rows plus 1-based class labels."""

    features: np.ndarray  # (n, dim) float64
    labels: np.ndarray  # (n,) int64 in 1..num_classes
    num_classes: int
    provenance: list[dict] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise DataError("features and labels disagree in length")
        if self.labels.size and (
            self.labels.min() < 1 or self.labels.max() > self.num_classes
        ):
            raise DataError(
                f"labels must lie in 1..{self.num_classes}"
            )

    def __len__(self) -> int:
        return self.features.shape[0]


@dataclass(eq=False)
class ClassifierModel:
    kind: str
    dim: int
    num_classes: int
    weights: np.ndarray | None = None  # (k, dim), linear head
    bias: np.ndarray | None = None  # (k,), linear head
    centroids: np.ndarray | None = None  # (k, dim) unit rows, centroid head
    train_config: TrainConfig = field(default_factory=TrainConfig)
    loss_history: list[float] = field(default_factory=list)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _loss_and_grad(
    weights: np.ndarray, bias: np.ndarray, x: np.ndarray, y0: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy and its analytic gradient; y0 is 0-based."""
    n = x.shape[0]
    z = x @ weights.T + bias
    zs = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(zs).sum(axis=1))
    logp = zs - lse[:, None]
    loss = float(-logp[np.arange(n), y0].mean())
    g = np.exp(logp)
    g[np.arange(n), y0] -= 1.0
    g /= n
    return loss, g.T @ x, g.sum(axis=0)


def train(data: TrainingSet, config: TrainConfig = TrainConfig()) -> ClassifierModel:
    """Fit a head on the training set. Deterministic given config.

    Raises TrainingError naming the class if any class has no examples.
    """
    if len(data) == 0:
        raise TrainingError("empty training set")
    k = data.num_classes
    counts = np.bincount(data.labels - 1, minlength=k)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise TrainingError(f"class {int(missing[0]) + 1} has no training examples")
    dim = data.features.shape[1]

    if config.kind == LINEAR:
        weights = np.zeros((k, dim))
        bias = np.zeros(k)
        y0 = data.labels - 1
        history: list[float] = []
        for _ in range(config.epochs):
            loss, d_w, d_b = _loss_and_grad(weights, bias, data.features, y0)
            history.append(loss)
            weights -= config.step_size * d_w
            bias -= config.step_size * d_b
        loss, _, _ = _loss_and_grad(weights, bias, data.features, y0)
        history.append(loss)
        return ClassifierModel(
            kind=LINEAR,
            dim=dim,
            num_classes=k,
            weights=weights,
            bias=bias,
            train_config=config,
            loss_history=history,
        )

    if config.kind == CENTROID:
        centroids = np.empty((k, dim))
        for j in range(k):
            mean = data.features[data.labels == j + 1].mean(axis=0)
            norm = np.linalg.norm(mean)
            if norm == 0.0:
                raise TrainingError(f"class {j + 1} has a zero mean vector")
            centroids[j] = mean / norm
        return ClassifierModel(
            kind=CENTROID,
            dim=dim,
            num_classes=k,
            centroids=centroids,
            train_config=config,
        )

    raise ConfigError(f"unknown classifier kind {config.kind!r}")


def _logits(model: ClassifierModel, x: np.ndarray) -> np.ndarray:
    if model.kind == LINEAR:
        return x @ model.weights.T + model.bias
    return model.train_config.centroid_scale * (x @ model.centroids.T)


def predict_proba(model: ClassifierModel, x: np.ndarray) -> np.ndarray:
    """Distribution over classes 1..k for a single embedding."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise DimensionError(f"embedding shape {x.shape} != ({model.dim},)")
    return _softmax(_logits(model, x[None, :]))[0]


def predict_proba_matrix(model: ClassifierModel, vectors: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != model.dim:
        raise DimensionError(f"matrix shape {vectors.shape} != (*, {model.dim})")
    return _softmax(_logits(model, vectors))


def predict_labels(model: ClassifierModel, store: EmbeddingStore) -> np.ndarray:
    """Per-document argmax label (1-based); ties go to the lowest class index."""
    proba = predict_proba_matrix(model, store.vectors)
    return np.argmax(proba, axis=1).astype(np.int64) + 1


def save_model(model: ClassifierModel, path: str | Path) -> None:
    obj: dict[str, object] = {
        "kind": model.kind,
        "dim": model.dim,
        "num_classes": model.num_classes,
        "train_config": asdict(model.train_config),
    }
    if model.kind == LINEAR:
        obj["weights"] = [float(v) for v in model.weights.ravel()]
        obj["bias"] = [float(v) for v in model.bias]
    else:
        obj["centroids"] = [float(v) for v in model.centroids.ravel()]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True)


def load_model(path: str | Path) -> ClassifierModel:
    with open(path, encoding="utf-8") as f:
        obj = json.load(f)
    kind = obj["kind"]
    dim = int(obj["dim"])
    k = int(obj["num_classes"])
    config = TrainConfig(**obj["train_config"])
    if kind == LINEAR:
        return ClassifierModel(
            kind=kind,
            dim=dim,
            num_classes=k,
            weights=np.asarray(obj["weights"], dtype=np.float64).reshape(k, dim),
            bias=np.asarray(obj["bias"], dtype=np.float64),
            train_config=config,
        )
    if kind == CENTROID:
        return ClassifierModel(
            kind=kind,
            dim=dim,
            num_classes=k,
            centroids=np.asarray(obj["centroids"], dtype=np.float64).reshape(k, dim),
            train_config=config,
        )
    raise ConfigError(f"unknown classifier kind {kind!r}")
