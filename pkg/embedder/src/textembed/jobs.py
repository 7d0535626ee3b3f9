"""Corpus embedding jobs: read documents, encode in batches, write the
binary embedding file plus metadata sidecar and a JSON job summary."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import DEFAULT_MODEL, Encoder, load_encoder
from .fcem import write_embeddings

log = logging.getLogger(__name__)

FORMATS = ("lines", "jsonl")


@dataclass(frozen=True)
class EmbedJob:
    input_path: str
    output_path: str
    input_format: str = "lines"  # "lines" or "jsonl" with id/text/label fields
    model: str = DEFAULT_MODEL
    batch_size: int = 64

    def validate(self) -> None:
        if self.input_format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not Path(self.input_path).exists():
            raise FileNotFoundError(self.input_path)


@dataclass(frozen=True)
class JobSummary:
    documents: int
    dim: int
    truncated: int
    model: str
    input_path: str
    output_path: str


def _read_lines(path: Path) -> tuple[list[str], list[str], list[int | None]]:
    # Empty lines stay in: row i of the output must be line i of the input.
    text = path.read_text(encoding="utf-8")
    docs = text.splitlines()
    ids = [f"line{i:06d}" for i in range(len(docs))]
    return ids, docs, [None] * len(docs)


def _read_jsonl(path: Path) -> tuple[list[str], list[str], list[int | None]]:
    ids: list[str] = []
    docs: list[str] = []
    labels: list[int | None] = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f):
            if not line.strip():
                continue
            obj = json.loads(line)
            if "text" not in obj:
                raise ValueError(f"{path}: line {lineno}: missing 'text'")
            ids.append(str(obj.get("id", f"line{lineno:06d}")))
            docs.append(str(obj["text"]))
            label = obj.get("label")
            labels.append(int(label) if label is not None else None)
    return ids, docs, labels


def embed_corpus(job: EmbedJob, encoder: Encoder | None = None) -> JobSummary:
    """Encode every input document, in order, and write all artifacts.

    One vector per document, including empty strings (alignment contract:
    output row i corresponds to input line i). Raises on unreadable input,
    encoder load failure, or an empty corpus.
    """
    job.validate()
    path = Path(job.input_path)
    readers = {"lines": _read_lines, "jsonl": _read_jsonl}
    ids, docs, labels = readers[job.input_format](path)
    if not docs:
        raise ValueError(f"{path}: empty corpus")
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate document ids")

    if encoder is None:
        encoder = load_encoder(job.model)

    chunks = []
    truncated = 0
    for start in range(0, len(docs), job.batch_size):
        batch = docs[start : start + job.batch_size]
        truncated += encoder.count_truncated(batch)
        vectors = encoder.encode(batch)
        if vectors.shape != (len(batch), encoder.dim):
            raise ValueError(
                f"encoder returned {vectors.shape}, expected ({len(batch)}, {encoder.dim})"
            )
        chunks.append(np.asarray(vectors, dtype=np.float32))
    all_vectors = np.concatenate(chunks)

    write_embeddings(job.output_path, all_vectors, ids, texts=docs, labels=labels)
    summary = JobSummary(
        documents=len(docs),
        dim=encoder.dim,
        truncated=truncated,
        model=getattr(encoder, "name", job.model),
        input_path=str(job.input_path),
        output_path=str(job.output_path),
    )
    with open(str(job.output_path) + ".summary.json", "w", encoding="utf-8") as f:
        json.dump(summary.__dict__, f, sort_keys=True, indent=2)
    log.info(
        "embedded %d docs (dim %d, %d truncated) -> %s",
        summary.documents,
        summary.dim,
        summary.truncated,
        job.output_path,
    )
    return summary
