"""Induced label distribution, classification entropy, and grid selection.

A trained model applied to the task documents induces an empirical label
histogram (hard argmax counting). With no labels available as evidence,
the grid point whose induced distribution has maximum entropy wins; ties
prefer the smaller subset size m, then the smaller neighborhood size n.
A diagnostic pairs each point's entropy with accuracy when gold labels
exist -- reported, never asserted, and never used for selection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .classifier import ClassifierModel, predict_labels, predict_proba_matrix
from .errors import (
    ConfigError,
    DiagnosticError,
    DistributionError,
    InfeasiblePointError,
    RunError,
)
from .evaluation import accuracy
from .vecstore import EmbeddingStore


@dataclass(eq=False)
class GridPoint:
    n: int
    m: int
    pseudo_label_counts: dict[int, int]
    model: ClassifierModel
    induced: np.ndarray  # distribution over classes 1..k
    entropy: float


@dataclass(eq=False)
class GridReport:
    points: list[GridPoint]
    infeasible: list[dict]
    selected: GridPoint
    accuracies: dict[tuple[int, int], float] | None = None

    def to_json_dict(self) -> dict:
        points = []
        for p in self.points:
            row: dict[str, object] = {
                "n": p.n,
                "m": p.m,
                "pseudo_label_counts": {str(k): v for k, v in p.pseudo_label_counts.items()},
                "induced": [float(v) for v in p.induced],
                "entropy": p.entropy,
            }
            if self.accuracies is not None:
                row["accuracy"] = self.accuracies[(p.n, p.m)]
            points.append(row)
        return {
            "points": points,
            "infeasible": self.infeasible,
            "selected": {"n": self.selected.n, "m": self.selected.m},
        }


def induced_counts(model: ClassifierModel, task_store: EmbeddingStore) -> np.ndarray:
    """Integer histogram of hard predicted labels over the task store."""
    if task_store.count == 0:
        raise DistributionError("cannot induce a distribution from an empty store")
    labels = predict_labels(model, task_store)
    return np.bincount(labels - 1, minlength=model.num_classes)


def induced_distribution(
    model: ClassifierModel, task_store: EmbeddingStore
) -> np.ndarray:
    """Empirical label distribution p(y) = count(y) / |X| under hard argmax."""
    counts = induced_counts(model, task_store)
    return counts / task_store.count


def induced_distribution_soft(
    model: ClassifierModel, task_store: EmbeddingStore
) -> np.ndarray:
    """Mean predicted probability per class. Diagnostic only: grid selection
    always uses the hard-count distribution."""
    if task_store.count == 0:
        raise DistributionError("cannot induce a distribution from an empty store")
    return predict_proba_matrix(model, task_store.vectors).mean(axis=0)


def entropy(p: np.ndarray) -> float:
    """Shannon entropy in nats, with 0 * ln 0 := 0."""
    p = np.asarray(p, dtype=np.float64)
    if (p < 0).any():
        raise DistributionError("distribution has a negative component")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-9:
        raise DistributionError(f"distribution sums to {total}, expected 1")
    pos = p[p > 0]
    return float(-(pos * np.log(pos)).sum()) + 0.0


PointBuilder = Callable[[int, int], tuple[ClassifierModel, dict[int, int]]]


def grid_search(
    grids_n: list[int],
    grids_m: list[int],
    build_point: PointBuilder,
    task_store: EmbeddingStore,
) -> GridReport:
    """Evaluate every (n, m), keep the maximum-entropy point.

    ``build_point`` runs the per-point pipeline (pools, selection, conflict
    resolution, training) and returns the trained model with per-class
    pseudo-label counts; it raises InfeasiblePointError to skip a point.
    Deterministic given the builder's inputs: repeated calls yield
    identical reports.
    """
    if not grids_n or not grids_m:
        raise ConfigError("both parameter grids must be nonempty")
    points: list[GridPoint] = []
    infeasible: list[dict] = []
    for n in grids_n:
        for m in grids_m:
            try:
                model, counts = build_point(n, m)
            except InfeasiblePointError as e:
                infeasible.append({"n": n, "m": m, "reason": str(e)})
                continue
            induced = induced_distribution(model, task_store)
            points.append(
                GridPoint(
                    n=n,
                    m=m,
                    pseudo_label_counts=counts,
                    model=model,
                    induced=induced,
                    entropy=entropy(induced),
                )
            )
    if not points:
        raise RunError("every grid point was infeasible")
    selected = min(points, key=lambda p: (-p.entropy, p.m, p.n))
    return GridReport(points=points, infeasible=infeasible, selected=selected)


@dataclass(eq=False)
class DiagnosticTable:
    rows: list[tuple[int, int, float, float]]  # (n, m, entropy, accuracy)
    spearman: float

    def to_csv(self) -> str:
        lines = ["n,m,entropy,accuracy"]
        for n, m, h, acc in self.rows:
            lines.append(f"{n},{m},{h!r},{acc!r}")
        return "\n".join(lines) + "\n"


def _rank_with_ties(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based), ties share the mean of their rank range."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(a: np.ndarray, b: np.ndarray) -> float:
    """Spearman rank correlation with tie-averaged ranks; nan when constant."""
    ra, rb = _rank_with_ties(np.asarray(a)), _rank_with_ties(np.asarray(b))
    sa, sb = ra - ra.mean(), rb - rb.mean()
    denom = math.sqrt(float((sa**2).sum()) * float((sb**2).sum()))
    if denom == 0.0:
        return float("nan")
    return float((sa * sb).sum() / denom)


def entropy_accuracy_report(
    report: GridReport,
    gold_labels: list[int] | np.ndarray | None,
    task_store: EmbeddingStore,
) -> DiagnosticTable:
    """Per-point (n, m, entropy, accuracy) pairs plus their rank correlation.

    Purely descriptive: entropy and accuracy track each other imperfectly, so
    nothing here asserts a relationship. Needs gold labels for every task doc.
    """
    if gold_labels is None:
        raise DiagnosticError("gold labels required for the entropy/accuracy table")
    gold = np.asarray(gold_labels, dtype=np.int64)
    if gold.shape[0] != task_store.count:
        raise DiagnosticError(
            f"{gold.shape[0]} gold labels for {task_store.count} task docs"
        )
    rows = []
    for p in report.points:
        preds = predict_labels(p.model, task_store)
        rows.append((p.n, p.m, p.entropy, accuracy(preds, gold)))
    entropies = np.asarray([r[2] for r in rows])
    accs = np.asarray([r[3] for r in rows])
    return DiagnosticTable(rows=rows, spearman=spearman(entropies, accs))


def save_grid_report(report: GridReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report.to_json_dict(), f, sort_keys=True, indent=2)
