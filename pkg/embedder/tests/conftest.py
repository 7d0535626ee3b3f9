"""Shared test helpers: a deterministic in-process encoder stub."""

from __future__ import annotations

import hashlib

import numpy as np
import pytest


class StubEncoder:
    """Hash-seeded deterministic vectors; docs longer than 8 words count
    as truncated. Stands in for a pretrained model in format/alignment tests."""

    name = "stub"
    dim = 12
    word_limit = 8

    def encode(self, texts: list[str]) -> np.ndarray:
        out = np.empty((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            seed = int.from_bytes(
                hashlib.sha256(text.encode("utf-8")).digest()[:8], "little"
            )
            out[i] = np.random.default_rng(seed).normal(size=self.dim)
        return out

    def count_truncated(self, texts: list[str]) -> int:
        return sum(1 for t in texts if len(t.split()) > self.word_limit)


@pytest.fixture
def stub_encoder() -> StubEncoder:
    return StubEncoder()
