import itertools

import numpy as np
import pytest

from screenmatch.errors import DimensionMismatch, EmptyScreen, InvalidConfig
from screenmatch.matcher import (HEURISTIC_VERSION, MatchParams,
                                 SimilarityMatrix, assign, correspond, cosine,
                                 filter_matches, greedy_assign,
                                 heuristic_correspond, heuristic_embeddings,
                                 match_embeddings, prune_topk,
                                 similarity_matrix, total_similarity)
from screenmatch.rng import derived_rng


def sm(entries, pruned=None):
    entries = np.asarray(entries, dtype=np.float64)
    m, n = entries.shape
    return SimilarityMatrix(
        entries=entries,
        row_ids=tuple(f"r{i}" for i in range(m)),
        col_ids=tuple(f"c{j}" for j in range(n)),
        pruned=np.zeros((m, n), dtype=bool) if pruned is None else np.asarray(pruned, dtype=bool),
        source_screen_id="src", target_screen_id="dst")


def brute_force_best_total(s):
    """Max-total partial matching over eligible entries, by enumerating
    complete assignments of the zero-padded square matrix."""
    m, n = s.entries.shape
    eligible = (~s.pruned) & (s.entries > 0.0)
    k = max(m, n)
    best = 0.0
    for perm in itertools.permutations(range(k)):
        total = sum(s.entries[i, perm[i]]
                    for i in range(m) if perm[i] < n and eligible[i, perm[i]])
        best = max(best, total)
    return best


class TestMatchParams:
    def test_defaults(self):
        p = MatchParams()
        assert (p.k, p.c, p.assignment) == (5, 0.4, "optimal")

    @pytest.mark.parametrize("kw", [
        {"k": 0}, {"c": 1.5}, {"c": -1.5}, {"assignment": "hungarian"},
    ])
    def test_rejects(self, kw):
        with pytest.raises(InvalidConfig):
            MatchParams(**kw)

    def test_as_dict(self):
        assert MatchParams(k=3, c=0.1, assignment="greedy").as_dict() == {
            "k": 3, "c": 0.1, "assignment": "greedy"}


class TestCosine:
    def test_parallel(self):
        assert cosine(np.array([2.0, 0.0]), np.array([5.0, 0.0])) == 1.0

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 3.0])) == 0.0

    def test_zero_vector_defines_zero(self):
        assert cosine(np.zeros(4), np.ones(4)) == 0.0


class TestSimilarityMatrix:
    def embeddings(self, vectors, screen_id="s"):
        from screenmatch.encoder import ElementEmbeddings
        vectors = np.asarray(vectors, dtype=np.float64)
        return ElementEmbeddings(screen_id=screen_id,
                                 element_ids=[f"e{i}" for i in range(len(vectors))],
                                 vectors=vectors)

    def test_entries_match_pairwise_cosine(self):
        rng = derived_rng(0, "simmat")
        a = self.embeddings(rng.normal(size=(3, 5)))
        b = self.embeddings(rng.normal(size=(4, 5)), screen_id="t")
        s = similarity_matrix(a, b)
        assert s.shape == (3, 4)
        assert s.source_screen_id == "s" and s.target_screen_id == "t"
        for i in range(3):
            for j in range(4):
                assert s.entries[i, j] == pytest.approx(
                    cosine(a.vectors[i], b.vectors[j]), abs=1e-12)
        assert not s.pruned.any()

    def test_zero_norm_rows_give_zero(self):
        a = self.embeddings([[0.0, 0.0], [1.0, 0.0]])
        b = self.embeddings([[1.0, 1.0]])
        s = similarity_matrix(a, b)
        assert s.entries[0, 0] == 0.0
        assert s.entries[1, 0] == pytest.approx(np.sqrt(0.5))

    def test_clipped_to_unit_interval(self):
        v = self.embeddings([[1e-8, 1e-8]])
        s = similarity_matrix(v, v)
        assert s.entries[0, 0] <= 1.0

    def test_empty_raises(self):
        a = self.embeddings(np.zeros((0, 3)))
        b = self.embeddings([[1.0, 0.0, 0.0]])
        with pytest.raises(EmptyScreen):
            similarity_matrix(a, b)

    def test_dim_mismatch(self):
        with pytest.raises(DimensionMismatch):
            similarity_matrix(self.embeddings([[1.0, 0.0]]),
                              self.embeddings([[1.0, 0.0, 0.0]]))


class TestPruneTopk:
    def test_column_rescues_row_pruned_entry(self):
        # (0,1) loses row 0's top-1 to 0.9 but owns column 1's top-1
        s = prune_topk(sm([[0.9, 0.8], [0.7, 0.1]]), k=1)
        assert not s.pruned[0, 0]
        assert not s.pruned[0, 1]
        assert not s.pruned[1, 0]
        assert s.pruned[1, 1]

    def test_large_k_prunes_nothing(self):
        s = prune_topk(sm([[0.9, 0.8], [0.7, 0.1]]), k=5)
        assert not s.pruned.any()

    def test_ties_break_toward_lower_index(self):
        s = prune_topk(sm([[0.5, 0.5, 0.5]]), k=1)
        # row keeps index 0; every column keeps its own top (the single row)
        assert not s.pruned.any()
        wide = prune_topk(sm([[0.5, 0.5], [0.5, 0.5], [0.4, 0.4]]), k=1)
        # every tied choice resolves to index 0, so only row 0 survives in col 1
        assert not wide.pruned[0, 0] and not wide.pruned[0, 1]
        assert not wide.pruned[1, 0]
        assert wide.pruned[1, 1] and wide.pruned[2, 1]

    def test_invalid_k(self):
        with pytest.raises(InvalidConfig):
            prune_topk(sm([[1.0]]), k=0)

    def test_composes_with_existing_pruning(self):
        first = prune_topk(sm([[0.9, 0.8], [0.7, 0.1]]), k=1)
        again = prune_topk(first, k=2)
        # nothing un-prunes
        assert again.pruned[1, 1]


class TestAssign:
    def test_frozen_two_by_two(self):
        pairs = assign(sm([[0.9, 0.1], [0.2, 0.8]]))
        assert pairs == [(0, 0, 0.9), (1, 1, 0.8)]
        assert total_similarity(pairs) == pytest.approx(1.7)

    def test_prefers_global_total_over_greedy_choice(self):
        pairs = assign(sm([[0.9, 0.85], [0.8, 0.1]]))
        assert pairs == [(0, 1, 0.85), (1, 0, 0.8)]
        assert total_similarity(pairs) == pytest.approx(1.65)

    def test_nonpositive_entries_left_unmatched(self):
        pairs = assign(sm([[0.9, -0.5], [-0.2, 0.0]]))
        assert pairs == [(0, 0, 0.9)]

    def test_pruned_entries_excluded(self):
        pairs = assign(sm([[0.9, 0.1], [0.2, 0.8]],
                          pruned=[[True, False], [False, False]]))
        assert (0, 0, 0.9) not in pairs
        assert total_similarity(pairs) == pytest.approx(
            max(0.1 + 0.2, 0.8))

    def test_rectangular_leaves_extras_unmatched(self):
        pairs = assign(sm([[0.9], [0.8], [0.7]]))
        assert pairs == [(0, 0, 0.9)]

    def test_one_to_one(self):
        rng = derived_rng(0, "onetoone")
        for _ in range(30):
            m, n = rng.integers(1, 7, size=2)
            s = sm(rng.uniform(-1, 1, size=(m, n)))
            pairs = assign(s)
            assert len({p[0] for p in pairs}) == len(pairs)
            assert len({p[1] for p in pairs}) == len(pairs)

    def test_matches_brute_force(self):
        rng = derived_rng(0, "bf-assign")
        for trial in range(80):
            m, n = rng.integers(1, 6, size=2)
            entries = rng.uniform(-0.2, 1.0, size=(m, n))
            s = sm(entries)
            if trial % 3 == 0:
                s = prune_topk(s, k=int(rng.integers(1, 4)))
            total = total_similarity(assign(s))
            assert total == pytest.approx(brute_force_best_total(s), abs=1e-12)


class TestGreedyAssign:
    def test_family_strictly_suboptimal(self):
        s = sm([[0.9, 0.85], [0.8, 0.1]])
        greedy = greedy_assign(s)
        assert greedy == [(0, 0, 0.9), (1, 1, pytest.approx(0.1))]
        assert total_similarity(greedy) == pytest.approx(1.0)
        assert total_similarity(greedy) < total_similarity(assign(s))

    def test_never_beats_optimal(self):
        rng = derived_rng(0, "greedy-vs-opt")
        for _ in range(200):
            m, n = rng.integers(1, 7, size=2)
            s = sm(rng.uniform(-0.5, 1.0, size=(m, n)))
            assert total_similarity(greedy_assign(s)) <= \
                total_similarity(assign(s)) + 1e-12

    def test_tie_breaks_toward_first_index(self):
        pairs = greedy_assign(sm([[0.5, 0.5], [0.5, 0.5]]))
        assert pairs == [(0, 0, 0.5), (1, 1, 0.5)]

    def test_skips_nonpositive(self):
        assert greedy_assign(sm([[-0.3, 0.0], [0.0, -0.1]])) == []

    def test_output_sorted_by_row(self):
        pairs = greedy_assign(sm([[0.1, 0.9], [0.8, 0.2]]))
        assert pairs == [(0, 1, 0.9), (1, 0, 0.8)]


class TestFilterMatches:
    def test_threshold_is_inclusive(self):
        s = sm([[0.4, 0.0], [0.0, 0.39999]])
        mapping = filter_matches([(0, 0, 0.4), (1, 1, 0.39999)], s, c=0.4,
                                 model_version="v", params={"k": 5})
        assert [(p.source_id, p.target_id) for p in mapping.pairs] == [("r0", "c0")]
        assert mapping.pairs[0].score == 0.4
        assert mapping.model_version == "v"
        assert mapping.params == {"k": 5}
        assert mapping.source_screen_id == "src"
        assert mapping.target_screen_id == "dst"

    def test_empty_survivors(self):
        mapping = filter_matches([(0, 0, 0.1)], sm([[0.1]]), c=0.5)
        assert mapping.pairs == ()


class TestEndToEnd:
    def test_heuristic_identity(self, login_screen):
        mapping = heuristic_correspond(login_screen, login_screen)
        ids = login_screen.element_ids()
        got = {(p.source_id, p.target_id) for p in mapping.pairs}
        # identity is optimal, but equal-category elements are interchangeable
        # at similarity 1.0; only the pair count and score are guaranteed
        assert len(mapping.pairs) == len(ids)
        assert all(p.score == pytest.approx(1.0) for p in mapping.pairs)
        assert mapping.model_version == HEURISTIC_VERSION
        assert {a for a, _ in got} == set(ids)

    def test_heuristic_embeddings_are_category_onehots(self, two_button_screen):
        emb = heuristic_embeddings(two_button_screen)
        assert emb.vectors.shape == (2, 83)
        assert np.all(emb.vectors.sum(axis=1) == 1.0)
        # both buttons share a category, so the rows coincide
        assert np.array_equal(emb.vectors[0], emb.vectors[1])

    def test_heuristic_empty_screen(self, two_button_screen):
        import dataclasses
        empty = dataclasses.replace(two_button_screen, elements=())
        with pytest.raises(EmptyScreen):
            heuristic_embeddings(empty)

    def test_correspond_identity_with_untrained_model(self, tiny_model,
                                                      login_screen):
        mapping = correspond(login_screen, login_screen, tiny_model)
        ids = login_screen.element_ids()
        assert [(p.source_id, p.target_id) for p in mapping.pairs] == \
            [(i, i) for i in ids]
        assert all(p.score == pytest.approx(1.0, abs=1e-9) for p in mapping.pairs)
        assert mapping.model_version == tiny_model.model_version()
        assert mapping.params == MatchParams().as_dict()

    def test_correspond_greedy_param(self, tiny_model, login_screen,
                                     two_button_screen):
        p = MatchParams(assignment="greedy")
        mapping = correspond(login_screen, two_button_screen, tiny_model, p=p)
        assert mapping.params["assignment"] == "greedy"

    def test_match_embeddings_respects_threshold(self, tiny_model, login_screen,
                                                 two_button_screen):
        strict = correspond(login_screen, two_button_screen, tiny_model,
                            p=MatchParams(c=0.999999))
        loose = correspond(login_screen, two_button_screen, tiny_model,
                           p=MatchParams(c=-1.0))
        assert len(strict.pairs) <= len(loose.pairs)
        assert all(p.score >= 0.999999 for p in strict.pairs)
