"""Sentence-encoder loading behind a minimal interface.

Any object with ``dim``, ``encode(texts) -> (n, dim) float array`` and
``count_truncated(texts) -> int`` works as an encoder; the default is a
pretrained sentence-transformers model. The heavy import happens lazily so
tooling that never touches a real model stays fast.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

DEFAULT_MODEL = "paraphrase-MiniLM-L6-v2"


class Encoder(Protocol):
    name: str
    dim: int

    def encode(self, texts: list[str]) -> np.ndarray: ...

    def count_truncated(self, texts: list[str]) -> int: ...


class EncoderLoadError(RuntimeError):
    """The requested encoder model could not be loaded."""


class SentenceTransformerEncoder:
    """sentence-transformers adapter; vectors come back unnormalized."""

    def __init__(self, name: str = DEFAULT_MODEL):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as e:  # pragma: no cover - environment dependent
            raise EncoderLoadError(f"sentence-transformers unavailable: {e}") from e
        try:
            self._model = SentenceTransformer(name)
        except Exception as e:
            raise EncoderLoadError(f"cannot load encoder {name!r}: {e}") from e
        self.name = name
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str]) -> np.ndarray:
        return np.asarray(
            self._model.encode(
                texts,
                batch_size=len(texts),
                convert_to_numpy=True,
                normalize_embeddings=False,
                show_progress_bar=False,
            ),
            dtype=np.float32,
        )

    def count_truncated(self, texts: list[str]) -> int:
        limit = int(self._model.max_seq_length)
        tokenizer = self._model.tokenizer
        lengths = [
            len(ids)
            for ids in tokenizer(list(texts), truncation=False)["input_ids"]
        ]
        return sum(1 for n in lengths if n > limit)


def load_encoder(name: str = DEFAULT_MODEL) -> Encoder:
    return SentenceTransformerEncoder(name)
