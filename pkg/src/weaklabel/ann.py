"""Top-k nearest-neighbor search by cosine: exact scan and an IVF index.

The exact index is a full scan and doubles as the correctness oracle for
the IVF index, which partitions the store with seeded spherical k-means
and scans only the ``nprobe`` nearest partitions at query time. Ties are
broken everywhere by ascending doc_id so results are bit-reproducible.
Built indexes are immutable and safe for concurrent search.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    CorruptionError,
    DataError,
    DimensionError,
    EmptyStoreError,
    FormatError,
)
from .vecstore import EmbeddingStore

log = logging.getLogger(__name__)

#: Stores under this row count default to the exact index.
EXACT_INDEX_LIMIT = 50_000
DEFAULT_CLUSTERS = 512
DEFAULT_NPROBE = 3

# K-means settings: k-means++ seeding, spherical updates, capped Lloyd
# iterations with a relative-movement stopping rule. Fully seeded.
KMEANS_MAX_ITER = 25
KMEANS_TOL = 1e-4

INDEX_MAGIC = b"FCIX"
INDEX_VERSION = 1
_INDEX_HEADER = struct.Struct("<4sIIIQq")  # magic, version, dim, n_clusters, count, seed


@dataclass(eq=False)
class NeighborList:
    """Search hits for one query, descending by score, no duplicate ids."""

    query_ref: str
    hits: list[tuple[str, float]]

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.hits]


def _check_query(store: EmbeddingStore, query: np.ndarray) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (store.dim,):
        raise DimensionError(f"query shape {q.shape} != ({store.dim},)")
    if not np.isfinite(q).all():
        raise DataError("query contains non-finite values")
    return q


def _ranked_hits(
    store: EmbeddingStore,
    rows: np.ndarray | None,
    query: np.ndarray,
    top_k: int,
    query_ref: str,
) -> NeighborList:
    """Score candidate rows in float64, order by (-score, doc_id), cut to k."""
    if rows is None:
        cand = np.arange(store.count, dtype=np.int64)
        scores = store.vectors @ query
    else:
        cand = rows
        scores = store.vectors[rows] @ query
    order = np.lexsort((store.id_rank[cand], -scores))
    top = order[: min(top_k, len(cand))]
    return NeighborList(
        query_ref=query_ref,
        hits=[(store.doc_ids[cand[i]], float(scores[i])) for i in top],
    )


@dataclass(eq=False)
class ExactIndex:
    """Brute-force scan over the whole store; the oracle for IVF search."""

    store: EmbeddingStore

    def search(self, query: np.ndarray, top_k: int, query_ref: str = "") -> NeighborList:
        if top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {top_k}")
        q = _check_query(self.store, query)
        return _ranked_hits(self.store, None, q, top_k, query_ref)


@dataclass(eq=False)
class IvfIndex:
    """Inverted-file index: k-means partitions, nprobe-limited search."""

    store: EmbeddingStore
    n_clusters: int
    centroids: np.ndarray  # (n_clusters, dim) float64 unit rows
    inverted_lists: list[np.ndarray]  # per-centroid row indices
    rng_seed: int

    def search(
        self,
        query: np.ndarray,
        top_k: int,
        nprobe: int = DEFAULT_NPROBE,
        query_ref: str = "",
    ) -> NeighborList:
        if top_k < 1:
            raise ConfigError(f"top_k must be >= 1, got {top_k}")
        if not 1 <= nprobe <= self.n_clusters:
            raise ConfigError(
                f"nprobe must be in [1, {self.n_clusters}], got {nprobe}"
            )
        q = _check_query(self.store, query)
        csims = self.centroids @ q
        probe = np.lexsort((np.arange(self.n_clusters), -csims))[:nprobe]
        rows = np.concatenate([self.inverted_lists[c] for c in probe])
        if rows.size == 0:
            return NeighborList(query_ref=query_ref, hits=[])
        return _ranked_hits(self.store, rows, q, top_k, query_ref)


Index = ExactIndex | IvfIndex


def build_exact_index(store: EmbeddingStore) -> ExactIndex:
    if store.count == 0:
        raise EmptyStoreError(f"cannot index empty store {store.corpus_id!r}")
    return ExactIndex(store=store)


def build_ivf_index(
    store: EmbeddingStore, n_clusters: int = DEFAULT_CLUSTERS, seed: int = 0
) -> IvfIndex:
    """Train a seeded spherical-k-means partition over the full store.

    n_clusters above store.count is reduced to store.count with a warning:
    desk-scale corpora are routinely smaller than the default 512.
    """
    if store.count == 0:
        raise EmptyStoreError(f"cannot index empty store {store.corpus_id!r}")
    if n_clusters < 1:
        raise ConfigError(f"n_clusters must be >= 1, got {n_clusters}")
    if n_clusters > store.count:
        log.warning(
            "reducing n_clusters from %d to store size %d", n_clusters, store.count
        )
        n_clusters = store.count
    rng = np.random.default_rng(seed)
    centroids, lists = _spherical_kmeans(store.vectors, n_clusters, rng)
    return IvfIndex(
        store=store,
        n_clusters=n_clusters,
        centroids=centroids,
        inverted_lists=lists,
        rng_seed=seed,
    )


def build_default_index(
    store: EmbeddingStore,
    seed: int = 0,
    n_clusters: int = DEFAULT_CLUSTERS,
) -> Index:
    """Exact below EXACT_INDEX_LIMIT rows (faster and correct there), IVF above."""
    if store.count < EXACT_INDEX_LIMIT:
        return build_exact_index(store)
    return build_ivf_index(store, n_clusters=n_clusters, seed=seed)


def search(
    index: Index, query: np.ndarray, top_k: int, nprobe: int | None = None
) -> NeighborList:
    """Uniform entry point over both index kinds. nprobe is ignored for exact."""
    if isinstance(index, ExactIndex):
        return index.search(query, top_k)
    if nprobe is None:
        nprobe = min(DEFAULT_NPROBE, index.n_clusters)
    return index.search(query, top_k, nprobe=nprobe)


# -- k-means ---------------------------------------------------------------


def _kmeans_pp_init(
    vectors: np.ndarray, k: int, rng: np.random.Generator
) -> np.ndarray:
    n = vectors.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = int(rng.integers(n))
    best = vectors @ vectors[chosen[0]]
    for i in range(1, k):
        # Squared Euclidean to the nearest chosen center; unit rows make it
        # 2 - 2*cos. Chosen rows are zeroed exactly.
        d2 = np.maximum(0.0, 2.0 - 2.0 * best)
        d2[chosen[:i]] = 0.0
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # Every row coincides with a chosen center; take the lowest
            # unchosen row so the result stays deterministic.
            mask = np.ones(n, dtype=bool)
            mask[chosen[:i]] = False
            idx = int(np.flatnonzero(mask)[0])
        chosen[i] = idx
        best = np.maximum(best, vectors @ vectors[idx])
    return vectors[chosen].copy()


def _assign_with_repair(sims: np.ndarray, k: int) -> np.ndarray:
    """Nearest-centroid assignment; empty clusters steal the worst-covered row.

    Repairs run in ascending cluster order and pick the donor row with the
    lowest similarity to its current centroid (lowest row index on ties), so
    the result is deterministic.
    """
    n = sims.shape[0]
    assign = np.argmax(sims, axis=1)
    counts = np.bincount(assign, minlength=k)
    empties = np.flatnonzero(counts == 0)
    if empties.size:
        assigned_sim = sims[np.arange(n), assign].copy()
        for c in empties:
            donors = counts[assign] > 1
            if not donors.any():
                break
            cand = np.where(donors, assigned_sim, np.inf)
            row = int(np.argmin(cand))
            counts[assign[row]] -= 1
            assign[row] = c
            counts[c] += 1
            assigned_sim[row] = sims[row, c]
    return assign


def _spherical_kmeans(
    vectors: np.ndarray, k: int, rng: np.random.Generator
) -> tuple[np.ndarray, list[np.ndarray]]:
    centroids = _kmeans_pp_init(vectors, k, rng)
    for _ in range(KMEANS_MAX_ITER):
        sims = vectors @ centroids.T
        assign = _assign_with_repair(sims, k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, vectors)
        norms = np.linalg.norm(sums, axis=1)
        dead = norms <= 1e-12
        sums[dead] = centroids[dead]
        norms[dead] = 1.0
        new_centroids = sums / norms[:, None]
        movement = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if movement < KMEANS_TOL:
            break
    sims = vectors @ centroids.T
    assign = _assign_with_repair(sims, k)
    lists = [np.flatnonzero(assign == c).astype(np.int64) for c in range(k)]
    return centroids, lists


# -- persistence -------------------------------------------------------------


def save_ivf_index(index: IvfIndex, path: str | Path) -> None:
    """Persist centroids and inverted lists; centroids round to float32."""
    store = index.store
    with open(path, "wb") as f:
        f.write(
            _INDEX_HEADER.pack(
                INDEX_MAGIC,
                INDEX_VERSION,
                store.dim,
                index.n_clusters,
                store.count,
                index.rng_seed,
            )
        )
        f.write(
            np.ascontiguousarray(index.centroids, dtype="<f4").tobytes(order="C")
        )
        for rows in index.inverted_lists:
            f.write(struct.pack("<Q", len(rows)))
            f.write(np.ascontiguousarray(rows, dtype="<u8").tobytes())


def load_ivf_index(path: str | Path, store: EmbeddingStore) -> IvfIndex:
    path = Path(path)
    with open(path, "rb") as f:
        head = f.read(_INDEX_HEADER.size)
        if len(head) < _INDEX_HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, dim, n_clusters, count, seed = _INDEX_HEADER.unpack(head)
        if magic != INDEX_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != INDEX_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if dim != store.dim or count != store.count:
            raise DimensionError(
                f"{path}: index built for {count}x{dim}, "
                f"store is {store.count}x{store.dim}"
            )
        cbytes = f.read(n_clusters * dim * 4)
        if len(cbytes) != n_clusters * dim * 4:
            raise CorruptionError(f"{path}: truncated centroid block")
        centroids = (
            np.frombuffer(cbytes, dtype="<f4").reshape(n_clusters, dim).astype(np.float64)
        )
        lists = []
        total = 0
        for _ in range(n_clusters):
            lenbytes = f.read(8)
            if len(lenbytes) != 8:
                raise CorruptionError(f"{path}: truncated list header")
            (length,) = struct.unpack("<Q", lenbytes)
            rows_bytes = f.read(length * 8)
            if len(rows_bytes) != length * 8:
                raise CorruptionError(f"{path}: truncated inverted list")
            rows = np.frombuffer(rows_bytes, dtype="<u8").astype(np.int64)
            if rows.size and rows.max() >= store.count:
                raise CorruptionError(f"{path}: row index out of range")
            lists.append(rows)
            total += length
    if total != store.count:
        raise CorruptionError(
            f"{path}: inverted lists cover {total} rows, store has {store.count}"
        )
    return IvfIndex(
        store=store,
        n_clusters=n_clusters,
        centroids=centroids,
        inverted_lists=lists,
        rng_seed=seed,
    )
