"""Diverse subset selection and the catch-all-class seed minimizer.

The coverage objective over a candidate pool R and subset L is
``g(L) = sum over x in R of max over e in L of s(x, e)`` with g(empty) = 0,
where s is the raw cosine of unit vectors (no shifting). Greedy maximization
comes in a naive and a lazy (stale-bound priority queue) variant that must
produce identical output; both share one marginal-gain kernel so equality
is structural, not accidental. A top-score mode (no diversification, pure
best-score ranking) backs the corresponding ablation.

The pairwise similarity matrix is materialized only for small ground sets;
above the limit, columns are computed on demand and coverage is tracked as
a running per-element best.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, MembershipError
from .retrieval import CandidatePool
from .vecstore import ClassDescription, EmbeddingStore

log = logging.getLogger(__name__)

#: Largest ground set for which the full similarity matrix is kept
#: (4096^2 float64 = 128 MiB).
MATRIX_LIMIT = 4096


@dataclass(eq=False)
class SelectedDoc:
    doc_id: str
    gain: float  # marginal gain at insertion (score rank for other modes)


@dataclass(eq=False)
class PseudoLabelSet:
    """Greedy-ordered selection for one class; |selected| = min(m, pool size)."""

    class_index: int
    selected: list[SelectedDoc]
    target_size: int

    def doc_ids(self) -> list[str]:
        return [s.doc_id for s in self.selected]

    def __len__(self) -> int:
        return len(self.selected)


class SimilarityGround:
    """Ground set of documents with pairwise cosine available on demand."""

    def __init__(
        self,
        doc_ids: list[str],
        vectors: np.ndarray,
        matrix_limit: int = MATRIX_LIMIT,
    ):
        if len(doc_ids) != vectors.shape[0]:
            raise ConfigError(
                f"{len(doc_ids)} ids for {vectors.shape[0]} vectors"
            )
        self.doc_ids = list(doc_ids)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.matrix_limit = matrix_limit
        self._pos = {d: i for i, d in enumerate(self.doc_ids)}
        order = sorted(range(len(doc_ids)), key=self.doc_ids.__getitem__)
        self.id_rank = np.empty(len(doc_ids), dtype=np.int64)
        self.id_rank[np.asarray(order, dtype=np.int64)] = np.arange(len(doc_ids))
        self._matrix: np.ndarray | None = None

    @classmethod
    def from_store(
        cls, store: EmbeddingStore, doc_ids: list[str], matrix_limit: int = MATRIX_LIMIT
    ) -> "SimilarityGround":
        rows = np.asarray([store.index_of(d) for d in doc_ids], dtype=np.int64)
        return cls(doc_ids, store.vectors[rows], matrix_limit=matrix_limit)

    def __len__(self) -> int:
        return len(self.doc_ids)

    def index_of(self, doc_id: str) -> int:
        try:
            return self._pos[doc_id]
        except KeyError:
            raise MembershipError(f"doc id {doc_id!r} not in ground set") from None

    def sim_matrix(self) -> np.ndarray | None:
        if self._matrix is None and len(self) <= self.matrix_limit:
            self._matrix = self.vectors @ self.vectors.T
        return self._matrix

    def sim_column(self, row: int) -> np.ndarray:
        """Similarities of ground row ``row`` to every ground element."""
        matrix = self.sim_matrix()
        if matrix is not None:
            return matrix[row]
        return self.vectors @ self.vectors[row]


def facility_location_value(subset_ids: list[str], ground: SimilarityGround) -> float:
    """Coverage value of a subset: sum over ground of best subset similarity."""
    if not subset_ids:
        return 0.0
    rows = np.asarray([ground.index_of(d) for d in subset_ids], dtype=np.int64)
    sims = ground.vectors @ ground.vectors[rows].T  # (n_ground, |subset|)
    return float(sims.max(axis=1).sum())


def _marginal_gain(ground: SimilarityGround, row: int, cover: np.ndarray) -> float:
    """Coverage improvement from adding ground row ``row``; used by both modes."""
    return float(np.maximum(ground.sim_column(row) - cover, 0.0).sum())


def _initial_gains(ground: SimilarityGround, cand_rows: np.ndarray) -> np.ndarray:
    """First-step gains: the modular sums sum_x s(x, e) for each candidate."""
    matrix = ground.sim_matrix()
    if matrix is not None:
        return matrix[cand_rows].sum(axis=1)
    return ground.vectors[cand_rows] @ ground.vectors.sum(axis=0)


def _greedy_naive(
    ground: SimilarityGround, cand_rows: np.ndarray, m: int
) -> list[tuple[int, float]]:
    n_cand = len(cand_rows)
    picked = np.zeros(n_cand, dtype=bool)
    ranks = ground.id_rank[cand_rows]
    init = _initial_gains(ground, cand_rows)
    cover: np.ndarray | None = None
    out: list[tuple[int, float]] = []
    for _ in range(min(m, n_cand)):
        best_i = -1
        best_gain = -np.inf
        best_rank = -1
        for i in range(n_cand):
            if picked[i]:
                continue
            if cover is None:
                gain = float(init[i])
            else:
                gain = _marginal_gain(ground, int(cand_rows[i]), cover)
            if gain > best_gain or (gain == best_gain and ranks[i] < best_rank):
                best_i, best_gain, best_rank = i, gain, int(ranks[i])
        row = int(cand_rows[best_i])
        picked[best_i] = True
        col = ground.sim_column(row)
        cover = col.copy() if cover is None else np.maximum(cover, col)
        out.append((row, best_gain))
    return out


def _greedy_lazy(
    ground: SimilarityGround, cand_rows: np.ndarray, m: int
) -> list[tuple[int, float]]:
    """Stale-bound priority re-evaluation.

    The first-step gains are raw modular sums and may UNDERestimate later
    gains when similarities are negative (later gains sum max(0, .) terms),
    so the queue is rebuilt with fresh gains right after the first pick.
    From then on per-candidate gains only shrink and a bound recomputed at
    the current step is exact, making the output identical to naive greedy.
    """
    n_cand = len(cand_rows)
    ranks = ground.id_rank[cand_rows]
    init = _initial_gains(ground, cand_rows)
    heap: list[tuple[float, int, int]] = [
        (-float(init[i]), int(ranks[i]), i) for i in range(n_cand)
    ]
    heapq.heapify(heap)
    stamp = np.zeros(n_cand, dtype=np.int64)
    picked = np.zeros(n_cand, dtype=bool)
    cover: np.ndarray | None = None
    step = 0
    out: list[tuple[int, float]] = []
    while heap and len(out) < min(m, n_cand):
        neg_gain, rank, i = heapq.heappop(heap)
        if picked[i]:
            continue
        if stamp[i] == step:
            row = int(cand_rows[i])
            picked[i] = True
            col = ground.sim_column(row)
            cover = col.copy() if cover is None else np.maximum(cover, col)
            out.append((row, -neg_gain))
            step += 1
            if step == 1:
                heap = []
                for j in range(n_cand):
                    if picked[j]:
                        continue
                    gain = _marginal_gain(ground, int(cand_rows[j]), cover)
                    stamp[j] = 1
                    heap.append((-gain, int(ranks[j]), j))
                heapq.heapify(heap)
        else:
            gain = _marginal_gain(ground, int(cand_rows[i]), cover)
            stamp[i] = step
            heapq.heappush(heap, (-gain, rank, i))
    return out


def greedy_select(
    pool: CandidatePool,
    ground: SimilarityGround,
    m: int,
    mode: str = "lazy",
) -> PseudoLabelSet:
    """Pick min(m, |pool|) pool members.

    Modes: ``naive`` and ``lazy`` run greedy coverage maximization (identical
    results, ties to the lowest doc_id); ``top-score`` ranks purely by the
    pool's best_score annotation.
    """
    if m < 1:
        raise ConfigError(f"m must be >= 1, got {m}")
    if mode not in ("naive", "lazy", "top-score"):
        raise ConfigError(f"unknown selection mode {mode!r}")
    if len(pool) == 0:
        log.warning("class %d: empty pool, empty selection", pool.class_index)
        return PseudoLabelSet(class_index=pool.class_index, selected=[], target_size=m)

    if mode == "top-score":
        ranked = sorted(pool.members, key=lambda mem: (-mem.best_score, mem.doc_id))
        chosen = [SelectedDoc(r.doc_id, r.best_score) for r in ranked[:m]]
        return PseudoLabelSet(
            class_index=pool.class_index, selected=chosen, target_size=m
        )

    cand_rows = np.asarray(
        [ground.index_of(mem.doc_id) for mem in pool.members], dtype=np.int64
    )
    runner = _greedy_lazy if mode == "lazy" else _greedy_naive
    picks = runner(ground, cand_rows, m)
    return PseudoLabelSet(
        class_index=pool.class_index,
        selected=[SelectedDoc(ground.doc_ids[row], gain) for row, gain in picks],
        target_size=m,
    )


def select_other(
    residual_ids: list[str],
    named_descs: list[ClassDescription],
    c: int,
    task_store: EmbeddingStore,
    other_class_index: int,
) -> PseudoLabelSet:
    """Seeds for the catch-all class: the c residual task docs farthest from
    every named description, i.e. with the smallest max description similarity.

    The objective is modular, so picking the c smallest scores is the exact
    minimizer. The recorded gain is the negated score, keeping insertion-order
    gains non-increasing like the greedy selections.
    """
    if c < 1:
        raise ConfigError(f"c must be >= 1, got {c}")
    if not named_descs:
        raise ConfigError("at least one named class description required")
    for d in named_descs:
        if d.is_other:
            raise ConfigError(
                "named_descs must not include the catch-all description"
            )
    if not residual_ids:
        log.warning("empty residual set; catch-all selection is empty")
        return PseudoLabelSet(
            class_index=other_class_index, selected=[], target_size=c
        )
    if len(residual_ids) < c:
        log.warning(
            "residual set holds %d docs, requested %d; taking all",
            len(residual_ids),
            c,
        )
    ids = sorted(residual_ids)
    rows = np.asarray([task_store.index_of(d) for d in ids], dtype=np.int64)
    desc_mat = np.stack([d.vector for d in named_descs])
    scores = (task_store.vectors[rows] @ desc_mat.T).max(axis=1)
    # Ascending score; equal scores fall back to the (already sorted) id order.
    order = np.lexsort((np.arange(len(ids)), scores))[: min(c, len(ids))]
    return PseudoLabelSet(
        class_index=other_class_index,
        selected=[SelectedDoc(ids[i], -float(scores[i])) for i in order],
        target_size=c,
    )


def selection_jsonl_lines(selection: PseudoLabelSet) -> list[str]:
    return [
        json.dumps(
            {
                "class": selection.class_index,
                "doc_id": s.doc_id,
                "rank": rank,
                "gain": s.gain,
            },
            sort_keys=True,
        )
        for rank, s in enumerate(selection.selected, start=1)
    ]
