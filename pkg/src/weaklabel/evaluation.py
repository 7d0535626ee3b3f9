"""Evaluation metrics for labeled benchmarks: accuracy and label-weighted F1."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def _check_pair(preds, gold) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds, dtype=np.int64)
    g = np.asarray(gold, dtype=np.int64)
    if p.shape != g.shape or p.ndim != 1:
        raise DataError(f"label sequences differ in shape: {p.shape} vs {g.shape}")
    if p.size == 0:
        raise DataError("empty label sequences")
    return p, g


def accuracy(preds, gold) -> float:
    p, g = _check_pair(preds, gold)
    return float((p == g).mean())


def label_weighted_f1(preds, gold) -> float:
    """Support-weighted average of per-class F1.

    Classes with zero gold support carry zero weight; a class with zero
    precision + recall contributes F1 = 0.
    """
    p, g = _check_pair(preds, gold)
    total = g.size
    score = 0.0
    for y in np.unique(g):
        support = int((g == y).sum())
        tp = int(((p == y) & (g == y)).sum())
        fp = int(((p == y) & (g != y)).sum())
        fn = int(((p != y) & (g == y)).sum())
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        score += (support / total) * f1
    return float(score)


def confusion_table(preds, gold, num_classes: int | None = None) -> np.ndarray:
    """k x k counts; rows are gold labels, columns are predictions (1-based)."""
    p, g = _check_pair(preds, gold)
    if num_classes is None:
        num_classes = int(max(p.max(), g.max()))
    table = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(table, (g - 1, p - 1), 1)
    return table
