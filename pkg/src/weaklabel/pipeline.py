"""End-to-end orchestration: stores -> indexes -> retrieval -> selection ->
conflict resolution -> grid search -> final model and run report.

Every stage consumes read-only outputs of earlier stages, and all
randomness fans out from a single root seed keyed by stage name, so a run
is a pure function of its config. Per-class retrieval caches are keyed on
the neighborhood size n; greedy selections are computed once per (class, n)
at the largest requested subset size and prefix-sliced for smaller m
(greedy order does not depend on the target size).
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import ann
from .classifier import (
    ClassifierModel,
    TrainConfig,
    TrainingSet,
    predict_labels,
    save_model,
    train,
)
from .entmax import entropy_accuracy_report, grid_search, save_grid_report
from .errors import (
    ConfigError,
    DimensionError,
    EngineError,
    InfeasiblePointError,
    RunError,
)
from .evaluation import accuracy, label_weighted_f1
from .retrieval import (
    CandidatePool,
    SeedSet,
    build_candidate_pool,
    build_candidate_pool_external,
    compute_seed_count,
    pool_jsonl_lines,
    select_seeds,
)
from .subsetsel import (
    PseudoLabelSet,
    SimilarityGround,
    greedy_select,
    select_other,
    selection_jsonl_lines,
)
from .vecstore import (
    ClassDescription,
    EmbeddingStore,
    class_descriptions_from_store,
    load_store,
)

log = logging.getLogger(__name__)

VARIANTS = ("standard", "external", "no-facility")
INDEX_KINDS = ("auto", "exact", "ivf")
CLASSIFIER_KINDS = ("linear-softmax", "nearest-centroid")


@dataclass
class RunConfig:
    task_path: str
    external_path: str
    classes_path: str
    grid_n: tuple[int, ...] = (100, 200, 300)
    grid_m: tuple[int, ...] = (300, 500, 800)
    seed_count: int | None = None  # None = automatic from task size
    index_kind: str = "auto"
    n_clusters: int = ann.DEFAULT_CLUSTERS
    nprobe: int = ann.DEFAULT_NPROBE
    classifier: str = "linear-softmax"
    epochs: int = 200
    step_size: float = 0.5
    centroid_scale: float = 10.0
    variant: str = "standard"
    other_class: bool = False
    seed: int = 0
    out_dir: str = "run-output"

    def validate(self) -> None:
        for name in ("task_path", "external_path", "classes_path"):
            p = getattr(self, name)
            if not Path(p).exists():
                raise ConfigError(f"{name} does not exist: {p}")
        if not self.grid_n or not self.grid_m:
            raise ConfigError("grid_n and grid_m must be nonempty")
        if any(v < 1 for v in self.grid_n) or any(v < 1 for v in self.grid_m):
            raise ConfigError("grid values must be >= 1")
        if self.seed_count is not None and self.seed_count < 1:
            raise ConfigError("seed_count must be >= 1")
        if self.index_kind not in INDEX_KINDS:
            raise ConfigError(f"index_kind must be one of {INDEX_KINDS}")
        if self.classifier not in CLASSIFIER_KINDS:
            raise ConfigError(f"classifier must be one of {CLASSIFIER_KINDS}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}")
        if self.variant == "external" and self.other_class:
            raise ConfigError(
                "the description-as-query variant has no usable query for a "
                "catch-all class; drop --other-class or use variant=standard"
            )
        if self.n_clusters < 1 or self.nprobe < 1:
            raise ConfigError("n_clusters and nprobe must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["grid_n"] = list(self.grid_n)
        d["grid_m"] = list(self.grid_m)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        for key in ("grid_n", "grid_m"):
            if key in d:
                d[key] = tuple(int(v) for v in d[key])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(eq=False)
class ConflictStats:
    conflicted_docs: int
    reassignments: dict[str, int] = field(default_factory=dict)  # doc -> winner


@dataclass(eq=False)
class RunReport:
    config: dict
    seed_count: int
    num_classes: int
    per_class: dict
    conflicts: dict
    grid: dict
    selected: dict
    metrics: dict | None
    assumptions: dict
    outputs: dict
    timings: dict

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "seed_count": self.seed_count,
            "num_classes": self.num_classes,
            "per_class": self.per_class,
            "conflicts": self.conflicts,
            "grid": self.grid,
            "selected": self.selected,
            "metrics": self.metrics,
            "assumptions": self.assumptions,
            "outputs": self.outputs,
            "timings": self.timings,
        }


def stage_seed(root_seed: int, stage: str) -> int:
    """Deterministic per-stage seed derived from the root seed and stage name."""
    digest = hashlib.sha256(f"{root_seed}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFFFFFFFFFFFFFF


@contextmanager
def _stage(name: str, timings: dict):
    start = time.perf_counter()
    try:
        yield
    except EngineError as e:
        raise type(e)(f"[stage {name}] {e}") from e
    except Exception as e:  # noqa: BLE001 - annotate foreign failures with the stage
        raise RunError(f"[stage {name}] {type(e).__name__}: {e}") from e
    finally:
        timings[name] = timings.get(name, 0.0) + time.perf_counter() - start


def resolve_conflicts(
    selections: dict[int, PseudoLabelSet],
    pools: dict[int, CandidatePool],
    external_store: EmbeddingStore,
    num_classes: int,
    grid_point: tuple[int, int] | None = None,
) -> tuple[TrainingSet, ConflictStats]:
    """Partition multiply-selected docs: highest best_score wins, ties go to
    the lowest class index. Raises InfeasiblePointError if a class loses
    everything."""
    claims: dict[str, list[tuple[float, int]]] = {}
    for j, sel in sorted(selections.items()):
        pool = pools[j]
        for s in sel.selected:
            claims.setdefault(s.doc_id, []).append(
                (pool.by_id[s.doc_id].best_score, j)
            )
    winner: dict[str, int] = {}
    conflicted = 0
    reassignments: dict[str, int] = {}
    for doc_id, claimants in claims.items():
        if len(claimants) == 1:
            winner[doc_id] = claimants[0][1]
            continue
        conflicted += 1
        best = min(claimants, key=lambda t: (-t[0], t[1]))
        winner[doc_id] = best[1]
        reassignments[doc_id] = best[1]

    features = []
    labels = []
    provenance = []
    n, m = grid_point if grid_point is not None else (0, 0)
    for j, sel in sorted(selections.items()):
        kept = [s for s in sel.selected if winner[s.doc_id] == j]
        if not kept:
            raise InfeasiblePointError(
                f"class {j} lost all {len(sel.selected)} selected docs to conflicts"
            )
        for s in kept:
            features.append(external_store.row(s.doc_id))
            labels.append(j)
            provenance.append({"class": j, "doc_id": s.doc_id, "n": n, "m": m})
    training = TrainingSet(
        features=np.asarray(features),
        labels=np.asarray(labels, dtype=np.int64),
        num_classes=num_classes,
        provenance=provenance,
    )
    return training, ConflictStats(conflicted_docs=conflicted, reassignments=reassignments)


class _PipelineContext:
    """Shared read-only state plus per-(class, n) caches for grid search."""

    def __init__(
        self,
        config: RunConfig,
        task_store: EmbeddingStore,
        external_store: EmbeddingStore,
        descs: list[ClassDescription],
        task_index: ann.Index,
        external_index: ann.Index,
        seed_count: int,
    ):
        self.config = config
        self.task_store = task_store
        self.external_store = external_store
        self.descs = descs
        self.named_descs = [d for d in descs if not d.is_other]
        self.other_desc = next((d for d in descs if d.is_other), None)
        self.task_index = task_index
        self.external_index = external_index
        self.seed_count = seed_count
        self.nprobe = config.nprobe
        self.mode = "top-score" if config.variant == "no-facility" else "lazy"
        self.m_max = max(config.grid_m)
        self.seed_sets: dict[int, SeedSet] = {}
        self._pool_cache: dict[tuple[int, int], CandidatePool] = {}
        self._ground_cache: dict[tuple[int, int], SimilarityGround] = {}
        self._selection_cache: dict[tuple[int, int], PseudoLabelSet] = {}
        # Per-point artifacts kept for reporting.
        self.point_selections: dict[tuple[int, int], dict[int, PseudoLabelSet]] = {}
        self.point_pools: dict[tuple[int, int], dict[int, CandidatePool]] = {}
        self.point_conflicts: dict[tuple[int, int], ConflictStats] = {}
        self.point_other_seeds: dict[tuple[int, int], int] = {}

    def select_all_seeds(self) -> None:
        for desc in self.named_descs:
            self.seed_sets[desc.class_index] = select_seeds(
                desc, self.task_index, self.seed_count, nprobe=self.nprobe
            )

    def _named_pool(self, j: int, n: int, m: int) -> CandidatePool:
        desc = self.descs[j - 1]
        if self.config.variant == "external":
            key = (j, n * m)  # grid value is a multiplier on m here
            if key not in self._pool_cache:
                self._pool_cache[key] = build_candidate_pool_external(
                    desc, self.external_index, n * m, nprobe=self.nprobe
                )
            return self._pool_cache[key]
        key = (j, n)
        if key not in self._pool_cache:
            self._pool_cache[key] = build_candidate_pool(
                self.seed_sets[j],
                self.task_store,
                self.external_index,
                n,
                nprobe=self.nprobe,
            )
        return self._pool_cache[key]

    def _ground_for(self, pool: CandidatePool, key: tuple[int, int]) -> SimilarityGround:
        if key not in self._ground_cache:
            self._ground_cache[key] = SimilarityGround.from_store(
                self.external_store, pool.doc_ids()
            )
        return self._ground_cache[key]

    def _named_selection(self, j: int, n: int, m: int) -> PseudoLabelSet:
        pool = self._named_pool(j, n, m)
        if self.config.variant == "external":
            # Pool depends on m; no prefix sharing across the m axis.
            ground = self._ground_for(pool, (j, n * m))
            return greedy_select(pool, ground, m, mode=self.mode)
        key = (j, n)
        if key not in self._selection_cache:
            ground = self._ground_for(pool, key)
            self._selection_cache[key] = greedy_select(
                pool, ground, self.m_max, mode=self.mode
            )
        full = self._selection_cache[key]
        return PseudoLabelSet(
            class_index=j, selected=full.selected[:m], target_size=m
        )

    def _other_selection(
        self, n: int, m: int, named: dict[int, PseudoLabelSet]
    ) -> tuple[PseudoLabelSet, CandidatePool]:
        assert self.other_desc is not None
        other_j = self.other_desc.class_index
        taken = {s.doc_id for sel in named.values() for s in sel.selected}
        residual = [d for d in self.task_store.doc_ids if d not in taken]
        other_seeds_sel = select_other(
            residual, self.named_descs, self.seed_count, self.task_store, other_j
        )
        seed_set = SeedSet(
            class_index=other_j,
            seeds=[(s.doc_id, s.gain) for s in other_seeds_sel.selected],
        )
        self.point_other_seeds[(n, m)] = len(seed_set.seeds)
        pool = build_candidate_pool(
            seed_set, self.task_store, self.external_index, n, nprobe=self.nprobe
        )
        ground = SimilarityGround.from_store(self.external_store, pool.doc_ids())
        selection = greedy_select(pool, ground, m, mode=self.mode)
        return selection, pool

    def build_point(self, n: int, m: int) -> tuple[ClassifierModel, dict[int, int]]:
        selections: dict[int, PseudoLabelSet] = {}
        pools: dict[int, CandidatePool] = {}
        for desc in self.named_descs:
            j = desc.class_index
            pools[j] = self._named_pool(j, n, m)
            selections[j] = self._named_selection(j, n, m)
        if self.other_desc is not None:
            other_sel, other_pool = self._other_selection(n, m, selections)
            selections[self.other_desc.class_index] = other_sel
            pools[self.other_desc.class_index] = other_pool
        empty = [j for j, sel in selections.items() if len(sel) == 0]
        if empty:
            raise InfeasiblePointError(
                f"class {empty[0]} has an empty selection at n={n}, m={m}"
            )
        training, stats = resolve_conflicts(
            selections,
            pools,
            self.external_store,
            num_classes=len(self.descs),
            grid_point=(n, m),
        )
        self.point_selections[(n, m)] = selections
        self.point_pools[(n, m)] = pools
        self.point_conflicts[(n, m)] = stats
        model = train(
            training,
            TrainConfig(
                kind=self.config.classifier,
                epochs=self.config.epochs,
                step_size=self.config.step_size,
                centroid_scale=self.config.centroid_scale,
                seed=stage_seed(self.config.seed, "train"),
            ),
        )
        counts = {
            j: int((training.labels == j).sum()) for j in sorted(selections)
        }
        return model, counts


def _build_index(
    store: EmbeddingStore, config: RunConfig, stage: str
) -> ann.Index:
    if config.index_kind == "exact":
        return ann.build_exact_index(store)
    if config.index_kind == "ivf":
        return ann.build_ivf_index(
            store, n_clusters=config.n_clusters, seed=stage_seed(config.seed, stage)
        )
    return ann.build_default_index(
        store, seed=stage_seed(config.seed, stage), n_clusters=config.n_clusters
    )


def run_pipeline(config: RunConfig) -> RunReport:
    """Execute the full run and write its artifacts into config.out_dir.

    Outputs: report.json (the returned report), grid_report.json,
    pseudo_labels.jsonl and pools.jsonl for the selected grid point,
    model.json, metrics.json and diagnostic.csv when gold labels exist.
    Deterministic given the config; only the timings section varies.
    """
    timings: dict[str, float] = {}
    config.validate()
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    with _stage("load", timings):
        task_store = load_store(config.task_path, corpus_id="task")
        external_store = load_store(config.external_path, corpus_id="external")
        class_store = load_store(config.classes_path, corpus_id="classes")
        dims = {task_store.dim, external_store.dim, class_store.dim}
        if len(dims) != 1:
            raise DimensionError(f"stores disagree on dim: {sorted(dims)}")
        if task_store.count == 0:
            raise ConfigError("task store is empty")
        if external_store.count == 0:
            raise ConfigError("external store is empty")
        k = class_store.count
        if k < 2:
            raise ConfigError(f"classification needs at least 2 classes, got {k}")
        descs = class_descriptions_from_store(class_store, config.other_class)

    with _stage("index", timings):
        task_index = _build_index(task_store, config, "index-task")
        external_index = _build_index(external_store, config, "index-external")

    with _stage("seeds", timings):
        c = (
            config.seed_count
            if config.seed_count is not None
            else compute_seed_count(task_store.count, k)
        )
        ctx = _PipelineContext(
            config, task_store, external_store, descs, task_index, external_index, c
        )
        ctx.select_all_seeds()

    with _stage("grid-search", timings):
        report = grid_search(
            list(config.grid_n), list(config.grid_m), ctx.build_point, task_store
        )

    with _stage("finalize", timings):
        selected = report.selected
        selected_key = (selected.n, selected.m)
        final_model = selected.model
        save_model(final_model, out_dir / "model.json")

        gold = task_store.gold_labels if task_store.has_full_gold else None
        metrics = None
        if gold is not None:
            preds = predict_labels(final_model, task_store)
            gold_arr = np.asarray(gold, dtype=np.int64)
            metrics = {
                "accuracy": accuracy(preds, gold_arr),
                "label_weighted_f1": label_weighted_f1(preds, gold_arr),
            }
            with open(out_dir / "metrics.json", "w", encoding="utf-8") as f:
                json.dump(metrics, f, sort_keys=True, indent=2)
            diag = entropy_accuracy_report(report, gold, task_store)
            (out_dir / "diagnostic.csv").write_text(diag.to_csv(), encoding="utf-8")
            report.accuracies = {(r[0], r[1]): r[3] for r in diag.rows}

        save_grid_report(report, out_dir / "grid_report.json")

        with open(out_dir / "pseudo_labels.jsonl", "w", encoding="utf-8") as f:
            for j in sorted(ctx.point_selections[selected_key]):
                for line in selection_jsonl_lines(ctx.point_selections[selected_key][j]):
                    f.write(line + "\n")
        with open(out_dir / "pools.jsonl", "w", encoding="utf-8") as f:
            for j in sorted(ctx.point_pools[selected_key]):
                for line in pool_jsonl_lines(ctx.point_pools[selected_key][j]):
                    f.write(line + "\n")

        per_class = {}
        for j in sorted(ctx.point_selections[selected_key]):
            sel = ctx.point_selections[selected_key][j]
            if j in ctx.seed_sets:
                n_seeds = len(ctx.seed_sets[j].seeds)
            else:
                n_seeds = ctx.point_other_seeds.get(selected_key, c)
            per_class[str(j)] = {
                "seeds": n_seeds,
                "pool_size": len(ctx.point_pools[selected_key][j]),
                "selection_size": len(sel),
                "trained_size": selected.pseudo_label_counts[j],
            }

        conflicts = {
            f"{n},{m}": ctx.point_conflicts[(n, m)].conflicted_docs
            for (n, m) in sorted(ctx.point_conflicts)
        }

        assumptions = {}
        if config.other_class:
            assumptions["other_class_grid"] = (
                "the catch-all class reuses the named-class n/m grid"
            )

        run_report = RunReport(
            config=config.to_dict(),
            seed_count=c,
            num_classes=k,
            per_class=per_class,
            conflicts={"per_point": conflicts, "selected_point": conflicts[f"{selected.n},{selected.m}"]},
            grid=report.to_json_dict(),
            selected={
                "n": selected.n,
                "m": selected.m,
                "entropy": selected.entropy,
                "induced": [float(v) for v in selected.induced],
            },
            metrics=metrics,
            assumptions=assumptions,
            outputs={
                "model": "model.json",
                "grid_report": "grid_report.json",
                "pseudo_labels": "pseudo_labels.jsonl",
                "pools": "pools.jsonl",
                "metrics": "metrics.json" if metrics is not None else None,
                "diagnostic": "diagnostic.csv" if metrics is not None else None,
            },
            timings=timings,
        )

    with open(out_dir / "report.json", "w", encoding="utf-8") as f:
        json.dump(run_report.to_json_dict(), f, sort_keys=True, indent=2)

    return run_report
