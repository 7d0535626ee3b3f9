"""Seed selection from task data and candidate-pool construction from external data.

Per class: the description vector ranks task documents, the top c become
seeds, each seed queries the external index for its n nearest neighbors,
and external documents appearing in at least two distinct seeds'
neighborhoods form the class's candidate pool. A description-as-query
variant skips the seed step entirely (support filter does not apply there).
Per-class work is independent and runs against read-only indexes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from functools import cached_property

from .ann import Index, search
from .errors import ConfigError
from .vecstore import ClassDescription, EmbeddingStore

log = logging.getLogger(__name__)


@dataclass(eq=False)
class SeedSet:
    """Top-c task documents for one class, with similarity to its description."""

    class_index: int
    seeds: list[tuple[str, float]]  # (doc_id, score), non-increasing score

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.seeds]


@dataclass(eq=False)
class PoolMember:
    doc_id: str
    support_count: int  # distinct seed neighborhoods containing this doc
    best_score: float  # max similarity to any seed (or to the description)


@dataclass(eq=False)
class CandidatePool:
    """External documents that survived the support filter, one pool per class."""

    class_index: int
    members: list[PoolMember]  # canonical order: ascending doc_id

    @cached_property
    def by_id(self) -> dict[str, PoolMember]:
        return {m.doc_id: m for m in self.members}

    def doc_ids(self) -> list[str]:
        return [m.doc_id for m in self.members]

    def __len__(self) -> int:
        return len(self.members)


def compute_seed_count(task_size: int, num_classes: int) -> int:
    """Seed count c = ceil(0.1 * task_size / num_classes), floored at 1.

    Computed in exact integer arithmetic: c = ceil(task_size / (10 k)).
    """
    if task_size < 1:
        raise ConfigError(f"task_size must be >= 1, got {task_size}")
    if num_classes < 2:
        raise ConfigError(f"num_classes must be >= 2, got {num_classes}")
    denom = 10 * num_classes
    return max(1, (task_size + denom - 1) // denom)


def select_seeds(
    desc: ClassDescription,
    task_index: Index,
    c: int,
    nprobe: int | None = None,
) -> SeedSet:
    """Rank task documents by similarity to the class description; keep top c."""
    if desc.is_other:
        raise ConfigError(
            f"class {desc.class_index} is the catch-all class; "
            "seed selection applies to named classes only"
        )
    if c < 1:
        raise ConfigError(f"seed count must be >= 1, got {c}")
    hits = search(task_index, desc.vector, c, nprobe=nprobe)
    return SeedSet(class_index=desc.class_index, seeds=list(hits.hits))


def build_candidate_pool(
    seeds: SeedSet,
    task_store: EmbeddingStore,
    external_index: Index,
    n: int,
    nprobe: int | None = None,
) -> CandidatePool:
    """Union the seeds' top-n external neighborhoods, keep docs seen >= 2 times.

    support_count counts distinct seeds, not occurrences. With fewer than two
    seeds the filter cannot fire; that degenerate case falls back to
    support >= 1 with a warning instead of failing the run.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    min_support = 2
    if len(seeds.seeds) < 2:
        log.warning(
            "class %d has %d seed(s); support filter relaxed to >= 1",
            seeds.class_index,
            len(seeds.seeds),
        )
        min_support = 1
    support: dict[str, int] = {}
    best: dict[str, float] = {}
    for seed_id, _ in seeds.seeds:
        neighbors = search(external_index, task_store.row(seed_id), n, nprobe=nprobe)
        for doc_id, score in neighbors.hits:
            support[doc_id] = support.get(doc_id, 0) + 1
            if doc_id not in best or score > best[doc_id]:
                best[doc_id] = score
    members = [
        PoolMember(doc_id=d, support_count=s, best_score=best[d])
        for d, s in support.items()
        if s >= min_support
    ]
    members.sort(key=lambda m: m.doc_id)
    return CandidatePool(class_index=seeds.class_index, members=members)


def build_candidate_pool_external(
    desc: ClassDescription,
    external_index: Index,
    n_prime: int,
    nprobe: int | None = None,
) -> CandidatePool:
    """Description-as-query variant: pool = top-n' external docs, no filter."""
    if n_prime < 1:
        raise ConfigError(f"n_prime must be >= 1, got {n_prime}")
    hits = search(external_index, desc.vector, n_prime, nprobe=nprobe)
    members = [
        PoolMember(doc_id=doc_id, support_count=1, best_score=score)
        for doc_id, score in hits.hits
    ]
    members.sort(key=lambda m: m.doc_id)
    return CandidatePool(class_index=desc.class_index, members=members)


def pool_jsonl_lines(pool: CandidatePool) -> list[str]:
    return [
        json.dumps(
            {
                "class": pool.class_index,
                "doc_id": m.doc_id,
                "support": m.support_count,
                "score": m.best_score,
            },
            sort_keys=True,
        )
        for m in pool.members
    ]
