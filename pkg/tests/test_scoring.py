"""Reward-model interfaces and aggregation."""

import json
import logging
import math
import random
from fractions import Fraction
from pathlib import Path

import pytest

from coarsefine.backends.mock import mock_world
from coarsefine.backends.suites import smoke_suite
from coarsefine.core import INITIAL_ORIGIN
from coarsefine.errors import ContractViolation, ProtocolError
from coarsefine.refinement import chain_from_text
from coarsefine.scoring import (
    OUTCOME,
    PROCESS,
    ScorerHandle,
    aggregate_prm,
    attach_scores,
    score_outcome,
    score_process,
)

from conftest import make_chain

GOLDEN = Path(__file__).parent / "fixtures" / "scoring_golden.json"


class StubOutcome(ScorerHandle):
    def __init__(self, value):
        super().__init__(OUTCOME)
        self.value = value
        self.requests = []

    def request(self, question, steps):
        self.requests.append((question, list(steps)))
        return {"score": self.value}


class StubProcess(ScorerHandle):
    def __init__(self, values=None, per_step=0.8):
        super().__init__(PROCESS)
        self.values = values
        self.per_step = per_step

    def request(self, question, steps):
        if self.values is not None:
            return {"step_scores": list(self.values)}
        return {"step_scores": [self.per_step] * len(steps)}


class TestAggregatePrm:
    def test_identity(self):
        assert aggregate_prm([1.0, 1.0, 1.0]) == 1.0

    def test_exact_product(self):
        assert aggregate_prm([0.5, 0.5]) == 0.25

    def test_direct_multiplication_oracle(self):
        assert aggregate_prm([0.9, 0.8, 0.7]) == pytest.approx(0.504, abs=1e-12)

    def test_single_step_identity(self):
        assert aggregate_prm([0.37]) == 0.37

    def test_empty_rejected(self):
        with pytest.raises(ContractViolation):
            aggregate_prm([])

    def test_random_products_match_exact_oracle(self):
        rng = random.Random(20240817)
        for _ in range(500):
            scores = [rng.random() for _ in range(rng.randint(1, 12))]
            exact = math.prod(Fraction(s) for s in scores)
            assert abs(aggregate_prm(scores) - float(exact)) < 1e-12

    def test_monotone_nonincreasing_under_appends(self):
        rng = random.Random(7)
        scores = [rng.random()]
        current = aggregate_prm(scores)
        for _ in range(20):
            scores.append(rng.uniform(0.0, 0.999999))
            nxt = aggregate_prm(scores)
            assert nxt <= current
            current = nxt

    def test_ablation_rules(self):
        assert aggregate_prm([0.2, 0.8], rule="min") == 0.2
        assert aggregate_prm([0.2, 0.8], rule="mean") == pytest.approx(0.5)
        with pytest.raises(ContractViolation):
            aggregate_prm([0.5], rule="median")


class TestScoreOutcome:
    def test_clamps_with_warning(self, caplog):
        chain = make_chain(0, "5")
        with caplog.at_level(logging.WARNING):
            assert score_outcome("q", chain, StubOutcome(1.7)) == 1.0
            assert score_outcome("q", chain, StubOutcome(-0.3)) == 0.0
        assert "clamping" in caplog.text

    def test_kind_mismatch(self):
        with pytest.raises(ContractViolation):
            score_outcome("q", make_chain(0), StubProcess())

    def test_sends_raw_text_as_single_segment(self):
        stub = StubOutcome(0.5)
        chain = make_chain(0, "5", steps=("Step 1: a", "Step 2: b"), raw_text="Step 1: a\nStep 2: b")
        score_outcome("q", chain, stub)
        assert stub.requests == [("q", ["Step 1: a\nStep 2: b"])]

    def test_missing_score_is_protocol_error(self):
        class Broken(ScorerHandle):
            def __init__(self):
                super().__init__(OUTCOME)

            def request(self, question, steps):
                return {"value": 0.5}

        with pytest.raises(ProtocolError):
            score_outcome("q", make_chain(0), Broken())

    def test_nan_rejected(self):
        with pytest.raises(ProtocolError):
            score_outcome("q", make_chain(0), StubOutcome(float("nan")))


class TestScoreProcess:
    def test_one_score_per_step(self):
        chain = make_chain(0, steps=("Step 1: a", "Step 2: b", "Step 3: c"))
        scores = score_process("q", chain, StubProcess(per_step=0.6))
        assert scores == [0.6, 0.6, 0.6]

    def test_step_count_mismatch_rejected(self):
        chain = make_chain(0, steps=("Step 1: a", "Step 2: b", "Step 3: c"))
        with pytest.raises(ProtocolError) as err:
            score_process("q", chain, StubProcess(values=[0.5, 0.5]))
        assert err.value.payload is not None

    def test_single_step_aggregate_identity(self):
        chain = make_chain(0, steps=("Step 1: only",))
        scores = score_process("q", chain, StubProcess(values=[0.41]))
        assert aggregate_prm(scores) == 0.41


class TestMockScoringRules:
    @pytest.fixture
    def world(self):
        suite = smoke_suite()
        return suite, mock_world(suite)

    def _chains(self, suite, bundle, prob_index):
        prob = suite.problems[prob_index]
        texts = bundle.generator.complete(
            f"Question: {prob.question}\n", suite.k, 0.8, 0, role="solver"
        )
        return prob, [chain_from_text(t, i, INITIAL_ORIGIN) for i, t in enumerate(texts)]

    def test_gold_chain_scores_point_nine(self, world):
        suite, bundle = world
        prob, chains = self._chains(suite, bundle, 0)  # easy: all gold
        assert score_outcome(prob.question, chains[0], bundle.orm) == 0.9

    def test_wrong_chain_scores_point_one(self, world):
        suite, bundle = world
        prob, chains = self._chains(suite, bundle, 1)  # fixable: all wrong
        assert score_outcome(prob.question, chains[0], bundle.orm) == 0.1

    def test_planted_error_gives_high_low_low(self, world):
        suite, bundle = world
        prob, chains = self._chains(suite, bundle, 1)
        scores = score_process(prob.question, chains[0], bundle.prm)
        assert scores == [0.9, 0.2, 0.2]


class TestAttachScores:
    def test_order_preserved_and_invariants(self):
        chains = [make_chain(i, str(i), steps=("Step 1: a", "Step 2: b")) for i in range(5)]
        scored = attach_scores("q", chains, StubOutcome(0.4), StubProcess(per_step=0.7))
        assert [sc.chain.chain_id for sc in scored] == [0, 1, 2, 3, 4]
        for sc in scored:
            assert sc.satisfies_product_rule()
            assert sc.prm_solution_score == pytest.approx(0.49, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ContractViolation):
            attach_scores("q", [], StubOutcome(0.5), StubProcess())

    def test_golden_fixture_reproduced(self):
        golden = json.loads(GOLDEN.read_text())
        suite = smoke_suite()
        bundle = mock_world(suite)
        prob = suite.problems[1]
        assert prob.question == golden["question"]
        texts = bundle.generator.complete(
            f"Solve it.\n\nQuestion: {prob.question}\n", suite.k, 0.8, 0, role="solver"
        )
        chains = [chain_from_text(t, i, INITIAL_ORIGIN) for i, t in enumerate(texts)]
        scored = attach_scores(prob.question, chains, bundle.orm, bundle.prm)
        got = [
            {
                "chain_id": sc.chain.chain_id,
                "answer": sc.chain.answer.canonical if sc.chain.answer else None,
                "step_scores": list(sc.step_scores),
                "prm_solution_score": sc.prm_solution_score,
                "orm_solution_score": sc.orm_solution_score,
                "raw_text": sc.chain.raw_text,
            }
            for sc in scored
        ]
        assert got == golden["chains"]
