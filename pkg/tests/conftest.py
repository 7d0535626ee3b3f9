"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from weaklabel.vecstore import EmbeddingStore


def unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """Random unit vectors (float64)."""
    v = rng.normal(size=(n, dim))
    return v / np.linalg.norm(v, axis=1)[:, None]


def make_store(
    vectors: np.ndarray,
    ids: list[str] | None = None,
    corpus_id: str = "test",
    labels: list[int | None] | None = None,
) -> EmbeddingStore:
    """In-memory store from already-normalized rows (skips file round trip)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if ids is None:
        ids = [f"d{i:04d}" for i in range(len(vectors))]
    return EmbeddingStore(
        corpus_id=corpus_id,
        dim=vectors.shape[1],
        count=vectors.shape[0],
        vectors=vectors,
        doc_ids=ids,
        gold_labels=labels,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)
