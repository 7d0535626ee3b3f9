"""Embedding corpora: binary file I/O, validation, normalization, similarity.

The on-disk vector format ("FCEM") is a small headered binary: 4 magic
bytes, format version (u32), dim (u32), count (u64), then count*dim
little-endian IEEE-754 float32 values row-major. All multi-byte integers
are little-endian. A sidecar JSONL file next to it (``<path>.meta.jsonl``)
carries one object per row, in row order: ``id`` (required string),
``text`` (optional string), ``label`` (optional integer).

Vectors are L2-normalized exactly once, here, at load time. Every
similarity downstream is then a plain dot product, always taken in
float64 regardless of the on-disk precision. Stores are immutable after
load and safe to share across workers.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import (
    CorruptionError,
    DataError,
    DimensionError,
    FormatError,
    MembershipError,
)

MAGIC = b"FCEM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")  # magic, version, dim, count

#: Tolerance on |row norm - 1| after load.
NORM_TOLERANCE = 1e-6


@dataclass(eq=False)
class EmbeddingStore:
    """Unit-normalized dense vectors for one corpus, with stable doc ids.

    ``gold_labels`` carries per-document label indices from the sidecar when
    present; it exists for evaluation only and is never read by the pipeline
    stages themselves.
    """

    corpus_id: str
    dim: int
    count: int
    vectors: np.ndarray  # (count, dim) float64, unit rows
    doc_ids: list[str]
    texts: list[str | None] | None = None
    gold_labels: list[int | None] | None = None
    _pos: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._pos = {d: i for i, d in enumerate(self.doc_ids)}

    def index_of(self, doc_id: str) -> int:
        try:
            return self._pos[doc_id]
        except KeyError:
            raise MembershipError(
                f"doc id {doc_id!r} not in store {self.corpus_id!r}"
            ) from None

    def row(self, doc_id: str) -> np.ndarray:
        return self.vectors[self.index_of(doc_id)]

    @cached_property
    def id_rank(self) -> np.ndarray:
        """Rank of each row under ascending doc_id order (tie-break key)."""
        order = sorted(range(self.count), key=self.doc_ids.__getitem__)
        rank = np.empty(self.count, dtype=np.int64)
        rank[np.asarray(order, dtype=np.int64)] = np.arange(self.count)
        return rank

    @property
    def has_full_gold(self) -> bool:
        return self.gold_labels is not None and all(
            g is not None for g in self.gold_labels
        )


@dataclass(eq=False)
class ClassDescription:
    """One class's description vector; indices are contiguous 1..k."""

    class_index: int
    text: str
    vector: np.ndarray  # (dim,) float64 unit vector
    is_other: bool = False


def load_store(path: str | Path, corpus_id: str | None = None) -> EmbeddingStore:
    """Load and L2-normalize an FCEM file plus its optional metadata sidecar.

    Raises FormatError for a bad header, CorruptionError when the payload
    disagrees with the header, and DataError (naming the offending row) for
    non-finite or zero-norm rows and duplicate ids.
    """
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, dim, count = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported format version {version}")
        if dim == 0:
            raise CorruptionError(f"{path}: dim = 0")
        payload = f.read()
    expected = count * dim * 4
    if len(payload) != expected:
        raise CorruptionError(
            f"{path}: payload holds {len(payload)} bytes, header implies {expected}"
        )
    raw = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    vectors = raw.astype(np.float64)

    doc_ids, texts, labels = _read_sidecar(path, count)

    bad = np.flatnonzero(~np.isfinite(vectors).all(axis=1))
    if bad.size:
        i = int(bad[0])
        raise DataError(f"{path}: non-finite value in row {i} (id {doc_ids[i]!r})")
    norms = np.linalg.norm(vectors, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        i = int(zero[0])
        raise DataError(f"{path}: zero vector in row {i} (id {doc_ids[i]!r})")
    if count:
        vectors = vectors / norms[:, None]

    seen: set[str] = set()
    for d in doc_ids:
        if d in seen:
            raise DataError(f"{path}: duplicate doc id {d!r}")
        seen.add(d)

    return EmbeddingStore(
        corpus_id=corpus_id if corpus_id is not None else path.stem,
        dim=dim,
        count=count,
        vectors=vectors,
        doc_ids=doc_ids,
        texts=texts,
        gold_labels=labels,
    )


def _read_sidecar(
    path: Path, count: int
) -> tuple[list[str], list[str | None] | None, list[int | None] | None]:
    sidecar = Path(str(path) + ".meta.jsonl")
    if not sidecar.exists():
        # Synthesized ids; zero padding keeps lexicographic order == row order.
        return [f"row{i:08d}" for i in range(count)], None, None
    doc_ids: list[str] = []
    texts: list[str | None] = []
    labels: list[int | None] = []
    with open(sidecar, encoding="utf-8") as f:
        for lineno, line in enumerate(f):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{sidecar}: line {lineno}: {e}") from e
            if "id" not in obj:
                raise FormatError(f"{sidecar}: line {lineno}: missing 'id'")
            doc_ids.append(str(obj["id"]))
            texts.append(obj.get("text"))
            label = obj.get("label")
            labels.append(int(label) if label is not None else None)
    if len(doc_ids) != count:
        raise CorruptionError(
            f"{sidecar}: {len(doc_ids)} metadata lines for {count} rows"
        )
    any_text = any(t is not None for t in texts)
    any_label = any(l is not None for l in labels)
    return doc_ids, texts if any_text else None, labels if any_label else None


def save_store(
    path: str | Path,
    vectors: np.ndarray,
    doc_ids: list[str],
    texts: list[str | None] | None = None,
    labels: list[int | None] | None = None,
) -> None:
    """Write vectors (raw, not normalized here) and sidecar in FCEM layout."""
    arr = np.ascontiguousarray(np.asarray(vectors), dtype="<f4")
    if arr.ndim != 2:
        raise DataError(f"expected a 2-d array, got shape {arr.shape}")
    count, dim = arr.shape
    if dim == 0:
        raise DataError("dim must be positive")
    if len(doc_ids) != count:
        raise DataError(f"{len(doc_ids)} ids for {count} rows")
    if len(set(doc_ids)) != count:
        raise DataError("doc ids must be unique")
    path = Path(path)
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, count))
        f.write(arr.tobytes(order="C"))
    with open(str(path) + ".meta.jsonl", "w", encoding="utf-8") as f:
        for i, doc_id in enumerate(doc_ids):
            obj: dict[str, object] = {"id": doc_id}
            if texts is not None and texts[i] is not None:
                obj["text"] = texts[i]
            if labels is not None and labels[i] is not None:
                obj["label"] = int(labels[i])  # type: ignore[arg-type]
            f.write(json.dumps(obj, sort_keys=True) + "\n")


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of two unit vectors, accumulated in float64.

    Symmetric by construction: both call orders reduce in the same
    floating-point order.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"vector shapes differ: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


def class_descriptions_from_store(
    store: EmbeddingStore, other_class: bool = False
) -> list[ClassDescription]:
    """Interpret a store's rows as class descriptions, in row order.

    When ``other_class`` is set the last row is the catch-all class; named
    classes keep indices 1..k-1 and the catch-all becomes class k.
    """
    if store.count < 1:
        raise DataError("class description store is empty")
    descs = []
    for i in range(store.count):
        text = None
        if store.texts is not None:
            text = store.texts[i]
        descs.append(
            ClassDescription(
                class_index=i + 1,
                text=text if text is not None else store.doc_ids[i],
                vector=store.vectors[i],
                is_other=other_class and i == store.count - 1,
            )
        )
    return descs
