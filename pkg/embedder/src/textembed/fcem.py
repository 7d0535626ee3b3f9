"""Writer for the engine's binary embedding format and metadata sidecar.

Layout: magic ``FCEM``, format version u32 = 1, dim u32, count u64, then
count*dim little-endian float32 values row-major. Sidecar at
``<path>.meta.jsonl``: one JSON object per row in row order with ``id``
(required), ``text`` (optional), ``label`` (optional integer). Vectors are
written exactly as produced; the consuming engine normalizes at load.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"FCEM"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIQ")


def write_embeddings(
    path: str | Path,
    vectors: np.ndarray,
    doc_ids: list[str],
    texts: list[str | None] | None = None,
    labels: list[int | None] | None = None,
) -> None:
    arr = np.ascontiguousarray(np.asarray(vectors), dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {arr.shape}")
    count, dim = arr.shape
    if dim == 0:
        raise ValueError("embedding dim must be positive")
    if len(doc_ids) != count:
        raise ValueError(f"{len(doc_ids)} ids for {count} rows")
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
