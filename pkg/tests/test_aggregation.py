"""Final-answer selectors."""

import random

import pytest

from coarsefine.aggregation import best_of_k, self_consistency, weighted_self_consistency
from coarsefine.errors import SelectionError
from coarsefine.routing import partition_by_answer

from oracles import reference_weighted_choice
from conftest import make_scored


def scored_set(entries):
    """entries: (chain_id, answer, orm, prm-as-single-step)."""
    return [
        make_scored(cid, answer, orm=orm, step_scores=(prm,))
        for cid, answer, orm, prm in entries
    ]


class TestSelfConsistency:
    def test_majority(self):
        partition = partition_by_answer(
            scored_set([(0, "5", 0.5, 0.5), (1, "5", 0.5, 0.5), (2, "7", 0.5, 0.5)])
        )
        assert self_consistency(partition).canonical == "5"

    def test_single_chain(self):
        partition = partition_by_answer(scored_set([(0, "9", 0.5, 0.5)]))
        assert self_consistency(partition).canonical == "9"

    def test_tie_breaks_to_first_chain(self):
        partition = partition_by_answer(
            scored_set([(0, "5", 0.5, 0.5), (1, "5", 0.5, 0.5), (2, "7", 0.5, 0.5), (3, "7", 0.5, 0.5)])
        )
        assert self_consistency(partition).canonical == "5"


class TestWeightedSelfConsistency:
    def test_mass_beats_size(self):
        # two chains summing to 1.7 outweigh one chain at 0.95
        entries = [(0, "5", 0.5, 0.4), (1, "5", 0.5, 0.3), (2, "7", 0.6, 0.35)]
        partition = partition_by_answer(scored_set(entries))
        assert weighted_self_consistency(partition).canonical == "5"

    def test_reduces_to_plain_sc_with_unit_weights(self):
        rng = random.Random(3)
        for _ in range(300):
            k = rng.randint(1, 10)
            entries = [(i, str(rng.randint(0, 3)), 1.0, 1.0) for i in range(k)]
            partition = partition_by_answer(scored_set(entries))
            assert weighted_self_consistency(partition) == self_consistency(partition)

    def test_single_chain(self):
        partition = partition_by_answer(scored_set([(0, "4", 0.2, 0.2)]))
        assert weighted_self_consistency(partition).canonical == "4"

    def test_scale_invariance_of_argmax(self):
        rng = random.Random(5)
        for _ in range(200):
            k = rng.randint(2, 10)
            entries = [
                (i, str(rng.randint(0, 3)), rng.random(), rng.random()) for i in range(k)
            ]
            scale = rng.uniform(0.1, 1.0)
            scaled = [(cid, a, orm * scale, prm * scale) for cid, a, orm, prm in entries]
            first = weighted_self_consistency(partition_by_answer(scored_set(entries)))
            second = weighted_self_consistency(partition_by_answer(scored_set(scaled)))
            assert first == second

    def test_matches_brute_force(self):
        rng = random.Random(7)
        for _ in range(2000):
            k = rng.randint(1, 10)
            entries = [
                (i, str(rng.randint(0, 3)), rng.random(), rng.random()) for i in range(k)
            ]
            partition = partition_by_answer(scored_set(entries))
            expected = reference_weighted_choice(
                [(cid, a, orm + prm) for cid, a, orm, prm in entries]
            )
            assert weighted_self_consistency(partition).canonical == expected

    def test_ablation_weight_modes(self):
        entries = [(0, "5", 0.9, 0.1), (1, "7", 0.1, 0.9)]
        partition = partition_by_answer(scored_set(entries))
        assert weighted_self_consistency(partition, "orm_only").canonical == "5"
        assert weighted_self_consistency(partition, "prm_only").canonical == "7"


class TestBestOfK:
    def test_argmax(self):
        chains = scored_set([(0, "a", 0.3, 0.5), (1, "b", 0.9, 0.5), (2, "c", 0.5, 0.5)])
        assert best_of_k(chains).canonical == "b"

    def test_tie_breaks_to_smaller_id(self):
        chains = scored_set([(0, "a", 0.9, 0.5), (1, "b", 0.9, 0.5)])
        assert best_of_k(chains).canonical == "a"

    def test_single(self):
        assert best_of_k(scored_set([(0, "z", 0.2, 0.5)])).canonical == "z"

    def test_skips_unparsed(self):
        chains = [make_scored(0, None, orm=0.99), make_scored(1, "5", orm=0.5)]
        assert best_of_k(chains).canonical == "5"

    def test_no_answers_raises(self):
        with pytest.raises(SelectionError):
            best_of_k([make_scored(0, None), make_scored(1, None)])
