"""Backend clients and the mock world."""

import json

import pytest
import requests

from coarsefine.backends.client import (
    InflightLimiter,
    OpenAIChatBackend,
    HttpScorerHandle,
    with_retries,
)
from coarsefine.backends.mock import (
    ChainPlan,
    MockProblem,
    MockSuite,
    load_suite,
    mock_world,
    suite_from_dict,
    suite_to_dict,
)
from coarsefine.backends.suites import mixed_suite, smoke_suite
from coarsefine.core import EASY, HARD, INITIAL_ORIGIN, EndpointConfig, EngineConfig
from coarsefine.errors import ConfigError, ProtocolError, TransportError
from coarsefine.harness import run_method
from coarsefine.refinement import chain_from_text
from coarsefine.routing import partition_by_answer, route
from coarsefine.scoring import OUTCOME, attach_scores


class FakeResponse:
    def __init__(self, status_code, payload=None, text=""):
        self.status_code = status_code
        self._payload = payload
        self.text = text or (json.dumps(payload) if payload is not None else "")

    def json(self):
        if self._payload is None:
            raise ValueError("no json body")
        return self._payload


class FakeSession:
    def __init__(self, script):
        self.script = list(script)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "body": json})
        item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def _chat_payload(texts):
    return {"choices": [{"message": {"content": t}} for t in texts]}


ENDPOINT = EndpointConfig(base_url="http://example.test", model="m1")


def make_generation_backend(script, max_retries=2):
    return OpenAIChatBackend(
        ENDPOINT,
        InflightLimiter(4),
        max_retries=max_retries,
        backoff_base=0.001,
        session=FakeSession(script),
    )


class TestOpenAIChatBackend:
    def test_happy_path_and_body_shape(self):
        backend = make_generation_backend([FakeResponse(200, _chat_payload(["a", "b"]))])
        out = backend.complete("prompt text", 2, 0.8, 7, role="solver")
        assert out == ["a", "b"]
        body = backend.session.calls[0]["body"]
        assert body["model"] == "m1"
        assert body["temperature"] == 0.8
        assert body["n"] == 2
        assert body["seed"] == 7
        assert body["messages"] == [{"role": "user", "content": "prompt text"}]
        assert backend.session.calls[0]["url"].endswith("/v1/chat/completions")

    def test_retries_transport_error_once_no_duplicate_result(self):
        backend = make_generation_backend(
            [requests.ConnectionError("down"), FakeResponse(200, _chat_payload(["x"]))]
        )
        assert backend.complete("p", 1, 0.8, 0) == ["x"]
        assert len(backend.session.calls) == 2

    def test_503_is_retryable(self):
        backend = make_generation_backend(
            [FakeResponse(503), FakeResponse(200, _chat_payload(["x"]))]
        )
        assert backend.complete("p", 1, 0.8, 0) == ["x"]

    def test_bounded_retries_then_transport_error(self):
        backend = make_generation_backend([FakeResponse(503)] * 5, max_retries=2)
        with pytest.raises(TransportError):
            backend.complete("p", 1, 0.8, 0)
        assert len(backend.session.calls) == 3  # initial + 2 retries

    def test_malformed_payload_is_protocol_error(self):
        backend = make_generation_backend([FakeResponse(200, {"unexpected": True})])
        with pytest.raises(ProtocolError) as err:
            backend.complete("p", 1, 0.8, 0)
        assert err.value.payload == {"unexpected": True}

    def test_wrong_completion_count_rejected(self):
        backend = make_generation_backend([FakeResponse(200, _chat_payload(["only-one"]))])
        with pytest.raises(ProtocolError):
            backend.complete("p", 2, 0.8, 0)

    def test_requires_base_url(self):
        with pytest.raises(ConfigError):
            OpenAIChatBackend(EndpointConfig(), InflightLimiter(1))


class TestHttpScorer:
    def test_score_request_shape(self):
        scorer = HttpScorerHandle(
            OUTCOME, ENDPOINT, InflightLimiter(2), backoff_base=0.001,
            session=FakeSession([FakeResponse(200, {"score": 0.4})]),
        )
        payload = scorer.request("why", ["full text"])
        assert payload == {"score": 0.4}
        body = scorer.session.calls[0]["body"]
        assert body == {"mode": "outcome", "question": "why", "steps": ["full text"], "model": "m1"}

    def test_400_is_protocol_error_with_payload(self):
        scorer = HttpScorerHandle(
            OUTCOME, ENDPOINT, InflightLimiter(2), backoff_base=0.001,
            session=FakeSession([FakeResponse(400, text="bad body")]),
        )
        with pytest.raises(ProtocolError) as err:
            scorer.request("q", ["s"])
        assert err.value.payload == "bad body"


class TestWithRetries:
    def test_side_effects_not_duplicated_in_result(self):
        calls = []

        def flaky():
            calls.append(1)
            if len(calls) == 1:
                raise TransportError("first attempt fails")
            return {"ok": True}

        assert with_retries(flaky, max_retries=3, backoff_base=0.001, context="t") == {"ok": True}
        assert len(calls) == 2


class TestMockDeterminism:
    def test_same_prompt_same_seed_identical(self):
        suite = smoke_suite()
        prompt = f"Question: {suite.problems[0].question}\n"
        first = mock_world(suite).generator.complete(prompt, 3, 0.8, 7, role="solver")
        second = mock_world(suite).generator.complete(prompt, 3, 0.8, 7, role="solver")
        assert first == second
        assert len(first) == 3

    def test_n_forty_gives_forty(self):
        suite = smoke_suite()
        prompt = f"Question: {suite.problems[0].question}\n"
        out = mock_world(suite).generator.complete(prompt, 40, 0.8, 0, role="solver")
        assert len(out) == 40
        assert all(text.strip() for text in out)

    def test_unknown_question_rejected(self):
        suite = smoke_suite()
        with pytest.raises(ProtocolError):
            mock_world(suite).generator.complete("Question: who?\n", 1, 0.8, 0)


class TestSuiteValidation:
    def test_duplicate_id_named(self):
        base = suite_to_dict(smoke_suite())
        base["problems"][1]["id"] = base["problems"][0]["id"]
        with pytest.raises(ConfigError) as err:
            suite_from_dict(base)
        assert "problems[1].id" in str(err.value)

    def test_error_step_out_of_range_named(self):
        base = suite_to_dict(smoke_suite())
        base["problems"][0]["chains"][1]["error_steps"] = [9]
        with pytest.raises(ConfigError) as err:
            suite_from_dict(base)
        assert "problems[0].chains[1].error_steps" in str(err.value)

    def test_corrupt_prob_range(self):
        base = suite_to_dict(smoke_suite())
        base["corrupt_correct_prob"] = 1.5
        with pytest.raises(ConfigError) as err:
            suite_from_dict(base)
        assert "corrupt_correct_prob" in str(err.value)

    def test_file_roundtrip(self, tmp_path):
        suite = mixed_suite()
        path = tmp_path / "suite.json"
        path.write_text(json.dumps(suite_to_dict(suite)))
        assert load_suite(path) == suite

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError):
            load_suite(path)


def _initial_scored(suite, bundle, prob):
    prompt = f"Question: {prob.question}\n"
    texts = bundle.generator.complete(prompt, suite.k, 0.8, 0, role="solver")
    chains = [chain_from_text(t, i, INITIAL_ORIGIN) for i, t in enumerate(texts)]
    return attach_scores(prob.question, chains, bundle.orm, bundle.prm)


class TestMockWorldScenarios:
    def test_easy_unanimous_routes_easy(self):
        suite = smoke_suite()
        bundle = mock_world(suite)
        scored = _initial_scored(suite, bundle, suite.problems[0])
        decision = route(partition_by_answer(scored), EngineConfig(k=suite.k))
        assert decision.difficulty == EASY

    def test_hard_flat_four_clusters_routes_hard(self):
        # four equal clusters, majority carrying extra bad steps
        plans = []
        for idx, answer in enumerate(("50", "51", "52", "53")):
            errors = (2, 3) if idx == 0 else (3,)
            plans.extend([ChainPlan(answer=answer, error_steps=errors)] * 2)
        prob = MockProblem(
            id="flat", question="Scenario flat: four way spread.", gold="49",
            chains=tuple(plans),
        )
        suite = MockSuite(problems=(prob,), k=8)
        bundle = mock_world(suite)
        scored = _initial_scored(suite, bundle, prob)
        partition = partition_by_answer(scored)
        decision = route(partition, EngineConfig(k=8))
        # entropy above one nat for the outcome model, weak majority for the
        # process model: both conditions fail
        import math

        assert decision.cond2["orm"].entropy == pytest.approx(math.log(4), abs=1e-9)
        assert not decision.cond1["prm"].passed
        assert decision.difficulty == HARD

    def test_hard_fixable_pipeline_reaches_gold(self):
        suite = smoke_suite()
        bundle = mock_world(suite)
        config = EngineConfig(k=suite.k, backend="mock", mock_suite="smoke")
        report = run_method("magicore", suite.problem_list(), config, bundle)
        fixable = next(r for r in report.records if r.problem_id == "fixable-000")
        assert fixable.correct
        assert fixable.stop_reason == "condition_met"
