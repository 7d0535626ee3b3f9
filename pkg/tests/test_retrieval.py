"""Seed selection and candidate-pool filtering against brute-force oracles."""

from __future__ import annotations

import logging

import numpy as np
import pytest

from conftest import make_store, unit_rows
from weaklabel.ann import build_exact_index
from weaklabel.errors import ConfigError
from weaklabel.retrieval import (
    build_candidate_pool,
    build_candidate_pool_external,
    compute_seed_count,
    select_seeds,
)
from weaklabel.vecstore import ClassDescription


def desc_for(vec, j=1, is_other=False):
    return ClassDescription(class_index=j, text=f"c{j}", vector=np.asarray(vec, float), is_other=is_other)


def brute_force_pool(seed_vectors, external_store, n, min_support=2):
    """Recompute the pool from raw neighbor lists: python sort, set logic."""
    support: dict[str, int] = {}
    best: dict[str, float] = {}
    for q in seed_vectors:
        scored = sorted(
            (
                (-float(np.dot(external_store.vectors[i], q)), external_store.doc_ids[i])
                for i in range(external_store.count)
            ),
        )[:n]
        for neg, doc in scored:
            support[doc] = support.get(doc, 0) + 1
            best[doc] = max(best.get(doc, -np.inf), -neg)
    return {
        doc: (s, best[doc]) for doc, s in support.items() if s >= min_support
    }


class TestSeedCount:
    def test_reference_size(self):
        assert compute_seed_count(7600, 4) == 190

    def test_floor_guard(self):
        assert compute_seed_count(5, 10) == 1

    def test_large(self):
        assert compute_seed_count(100_000, 10) == 1000

    def test_exact_integer_arithmetic(self):
        # ceil boundaries must not wobble with float rounding
        assert compute_seed_count(40, 4) == 1
        assert compute_seed_count(41, 4) == 2

    def test_invalid_inputs(self):
        with pytest.raises(ConfigError):
            compute_seed_count(0, 4)
        with pytest.raises(ConfigError):
            compute_seed_count(100, 1)


class TestSelectSeeds:
    def test_full_ranking(self, rng):
        store = make_store(unit_rows(rng, 12, 6))
        index = build_exact_index(store)
        seeds = select_seeds(desc_for(unit_rows(rng, 1, 6)[0]), index, 12)
        assert len(seeds.seeds) == 12
        scores = [s for _, s in seeds.seeds]
        assert all(a >= b for a, b in zip(scores, scores[1:]))

    def test_identical_doc_ranks_first(self, rng):
        rows = unit_rows(rng, 8, 6)
        store = make_store(rows)
        index = build_exact_index(store)
        seeds = select_seeds(desc_for(rows[5]), index, 3)
        assert seeds.seeds[0][0] == store.doc_ids[5]
        assert seeds.seeds[0][1] == pytest.approx(1.0, abs=1e-12)

    def test_cluster_purity(self, rng):
        # Two well-separated gaussian clusters; seeds for the matching
        # description should come from the matching cluster.
        c1 = np.array([6.0, 0.0, 0.0, 0.0])
        c2 = np.array([0.0, 6.0, 0.0, 0.0])
        rows = np.concatenate(
            [c1 + rng.normal(size=(50, 4)), c2 + rng.normal(size=(50, 4))]
        )
        rows /= np.linalg.norm(rows, axis=1)[:, None]
        store = make_store(rows)
        index = build_exact_index(store)
        seeds = select_seeds(desc_for(c1 / np.linalg.norm(c1)), index, 10)
        from_first = sum(1 for d, _ in seeds.seeds if store.index_of(d) < 50)
        assert from_first >= 9

    def test_other_desc_rejected(self, rng):
        store = make_store(unit_rows(rng, 5, 4))
        index = build_exact_index(store)
        with pytest.raises(ConfigError):
            select_seeds(desc_for(store.vectors[0], is_other=True), index, 2)


class TestCandidatePool:
    def test_identical_seeds_share_neighborhood(self, rng):
        ext = make_store(unit_rows(rng, 20, 6), corpus_id="ext")
        v = unit_rows(rng, 1, 6)[0]
        task = make_store(np.stack([v, v]), ids=["s1", "s2"], corpus_id="task")
        from weaklabel.retrieval import SeedSet

        seeds = SeedSet(class_index=1, seeds=[("s1", 1.0), ("s2", 1.0)])
        pool = build_candidate_pool(seeds, task, build_exact_index(ext), 5)
        assert len(pool) == 5
        assert all(m.support_count == 2 for m in pool.members)

    def test_disjoint_neighborhoods_empty_pool(self):
        # External docs split along two orthogonal axes; one seed per axis
        # with n=2 gives disjoint top lists.
        ext_rows = np.array(
            [[1.0, 0, 0, 0], [0.9, 0.1, 0, 0], [0, 0, 1.0, 0], [0, 0.1, 0.9, 0]]
        )
        ext_rows /= np.linalg.norm(ext_rows, axis=1)[:, None]
        ext = make_store(ext_rows, corpus_id="ext")
        task = make_store(
            np.array([[1.0, 0, 0, 0], [0.0, 0, 1.0, 0]]), ids=["s1", "s2"]
        )
        from weaklabel.retrieval import SeedSet

        seeds = SeedSet(class_index=1, seeds=[("s1", 0.9), ("s2", 0.8)])
        pool = build_candidate_pool(seeds, task, build_exact_index(ext), 2)
        assert len(pool) == 0

    def test_hand_built_enumeration(self, rng):
        ext = make_store(unit_rows(rng, 8, 5), corpus_id="ext")
        task_rows = unit_rows(rng, 5, 5)
        task = make_store(task_rows, corpus_id="task")
        from weaklabel.retrieval import SeedSet

        seeds = SeedSet(
            class_index=1, seeds=[(d, 0.0) for d in task.doc_ids]
        )
        pool = build_candidate_pool(seeds, task, build_exact_index(ext), 3)
        want = brute_force_pool(task_rows, ext, 3)
        assert {m.doc_id for m in pool.members} == set(want)
        for m in pool.members:
            assert m.support_count == want[m.doc_id][0]
            assert m.best_score == pytest.approx(want[m.doc_id][1], abs=1e-12)

    def test_randomized_against_brute_force(self, rng):
        from weaklabel.retrieval import SeedSet

        for trial in range(20):
            trial_rng = np.random.default_rng(1000 + trial)
            n_ext = int(trial_rng.integers(5, 40))
            n_seeds = int(trial_rng.integers(2, 6))
            n = int(trial_rng.integers(1, 8))
            ext = make_store(unit_rows(trial_rng, n_ext, 6), corpus_id="ext")
            task_rows = unit_rows(trial_rng, n_seeds, 6)
            task = make_store(task_rows, corpus_id="task")
            seeds = SeedSet(class_index=1, seeds=[(d, 0.0) for d in task.doc_ids])
            pool = build_candidate_pool(seeds, task, build_exact_index(ext), n)
            want = brute_force_pool(task_rows, ext, n)
            assert {m.doc_id: m.support_count for m in pool.members} == {
                d: s for d, (s, _) in want.items()
            }

    def test_monotone_in_n(self, rng):
        from weaklabel.retrieval import SeedSet

        ext = make_store(unit_rows(rng, 30, 6), corpus_id="ext")
        task = make_store(unit_rows(rng, 4, 6), corpus_id="task")
        index = build_exact_index(ext)
        seeds = SeedSet(class_index=1, seeds=[(d, 0.0) for d in task.doc_ids])
        previous: set[str] = set()
        for n in (1, 3, 5, 10, 30):
            pool = build_candidate_pool(seeds, task, index, n)
            ids = {m.doc_id for m in pool.members}
            assert previous <= ids
            previous = ids

    def test_single_seed_relaxes_filter(self, rng, caplog):
        from weaklabel.retrieval import SeedSet

        ext = make_store(unit_rows(rng, 10, 6), corpus_id="ext")
        task = make_store(unit_rows(rng, 1, 6), corpus_id="task")
        seeds = SeedSet(class_index=1, seeds=[(task.doc_ids[0], 0.0)])
        with caplog.at_level(logging.WARNING):
            pool = build_candidate_pool(seeds, task, build_exact_index(ext), 4)
        assert "support filter relaxed" in caplog.text
        assert len(pool) == 4
        assert all(m.support_count == 1 for m in pool.members)


class TestExternalVariant:
    def test_single_and_full(self, rng):
        ext = make_store(unit_rows(rng, 10, 6), corpus_id="ext")
        index = build_exact_index(ext)
        d = desc_for(unit_rows(rng, 1, 6)[0])
        assert len(build_candidate_pool_external(d, index, 1)) == 1
        assert len(build_candidate_pool_external(d, index, 10)) == 10

    def test_grid_sizes(self, rng):
        ext = make_store(unit_rows(rng, 3200, 6), corpus_id="ext")
        index = build_exact_index(ext)
        d = desc_for(unit_rows(rng, 1, 6)[0])
        m = 300
        for mult in (2, 5, 10):
            pool = build_candidate_pool_external(d, index, mult * m)
            assert len(pool) == min(mult * m, ext.count)
        assert [min(mult * m, 3200) for mult in (2, 5, 10)] == [600, 1500, 3000]

    def test_support_is_one(self, rng):
        ext = make_store(unit_rows(rng, 10, 6), corpus_id="ext")
        pool = build_candidate_pool_external(
            desc_for(unit_rows(rng, 1, 6)[0]), build_exact_index(ext), 5
        )
        assert all(m.support_count == 1 for m in pool.members)
