"""Backend clients: an OpenAI-compatible chat-completions generator and an
HTTP reward-model scorer, plus the shared retry and concurrency plumbing.

All handles are shareable across threads.  A single bounded semaphore caps
in-flight requests across every role so the engine never exceeds the
configured concurrency, no matter how many worker threads exist.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import requests

from ..core import EndpointConfig, EngineConfig
from ..errors import ConfigError, ContractViolation, ProtocolError, TransportError
from ..scoring import OUTCOME, PROCESS, ScorerHandle

log = logging.getLogger(__name__)

ROLES = ("solver", "reviewer", "refiner", "joint")
# Roles whose completions count as solution samples.  Reviewer feedback is
# bookkept separately: it produces critiques, not candidate solutions.
GENERATION_ROLES = ("solver", "refiner", "joint")


class GenerationBackend:
    """Interface for completion backends."""

    def complete(
        self,
        prompt: str,
        n: int,
        temperature: float,
        seed: int,
        role: str = "solver",
    ) -> list[str]:
        raise NotImplementedError


@dataclass(frozen=True)
class RequestRecord:
    kind: str  # "generate" | "score"
    role: str  # generation role, or scorer mode for score requests
    problem_id: str
    n: int  # completions requested (generate) or 1 (score)


class RequestLog:
    """Thread-safe request ledger kept by the mock world (and available to
    any backend that wants one).  Aggregation is order-insensitive."""

    def __init__(self):
        self._lock = threading.Lock()
        self._records: list[RequestRecord] = []

    def add(self, record: RequestRecord) -> None:
        with self._lock:
            self._records.append(record)

    def records(self) -> list[RequestRecord]:
        with self._lock:
            return list(self._records)

    def generation_calls(self, problem_id: str) -> int:
        """Solution completions issued for one problem (solver + refiner)."""
        return sum(
            r.n
            for r in self.records()
            if r.kind == "generate" and r.problem_id == problem_id and r.role in GENERATION_ROLES
        )

    def feedback_calls(self, problem_id: str) -> int:
        return sum(
            r.n
            for r in self.records()
            if r.kind == "generate" and r.problem_id == problem_id and r.role == "reviewer"
        )

    def scoring_calls(self, problem_id: str) -> int:
        return sum(1 for r in self.records() if r.kind == "score" and r.problem_id == problem_id)

    def clear(self) -> None:
        with self._lock:
            self._records.clear()


def with_retries(
    fn: Callable[[], dict],
    max_retries: int,
    backoff_base: float,
    context: str,
) -> dict:
    """Run ``fn`` with bounded exponential backoff on transport errors.

    Requests are idempotent reads from the engine's point of view, so a
    retried call never duplicates an engine-visible side effect.
    """
    attempt = 0
    while True:
        try:
            return fn()
        except TransportError as exc:
            if attempt >= max_retries:
                raise TransportError(f"{context}: giving up after {attempt + 1} attempts: {exc}") from exc
            delay = backoff_base * (2**attempt)
            log.warning("%s: transport error (%s), retrying in %.2fs", context, exc, delay)
            time.sleep(delay)
            attempt += 1


class InflightLimiter:
    """Global cap on concurrent wire calls, shared by all handles of a run."""

    def __init__(self, limit: int):
        if limit < 1:
            raise ContractViolation("concurrency limit must be >= 1")
        self._sem = threading.BoundedSemaphore(limit)

    def __enter__(self):
        self._sem.acquire()
        return self

    def __exit__(self, *exc_info):
        self._sem.release()
        return False


def _post_json(
    session: requests.Session,
    url: str,
    body: dict,
    headers: dict,
    timeout: float,
) -> dict:
    try:
        resp = session.post(url, json=body, headers=headers, timeout=timeout)
    except requests.RequestException as exc:
        raise TransportError(f"POST {url} failed: {exc}") from exc
    if resp.status_code == 503:
        raise TransportError(f"POST {url} returned 503")
    if resp.status_code >= 500:
        raise TransportError(f"POST {url} returned {resp.status_code}")
    if resp.status_code != 200:
        raise ProtocolError(f"POST {url} returned {resp.status_code}", payload=resp.text)
    try:
        return resp.json()
    except ValueError as exc:
        raise ProtocolError(f"POST {url} returned non-JSON body", payload=resp.text) from exc


def _auth_headers(endpoint: EndpointConfig) -> dict:
    headers = {"Content-Type": "application/json"}
    if endpoint.api_key_env:
        key = os.environ.get(endpoint.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
    return headers


class OpenAIChatBackend(GenerationBackend):
    """Chat-completions client compatible with OpenAI-style servers.

    One endpoint serves every role by default; per-role endpoints may be
    supplied for deployments that split the roles across servers.
    """

    def __init__(
        self,
        endpoint: EndpointConfig,
        limiter: InflightLimiter,
        max_retries: int = 3,
        backoff_base: float = 0.25,
        timeout: float = 120.0,
        role_endpoints: Optional[dict[str, EndpointConfig]] = None,
        session: Optional[requests.Session] = None,
    ):
        if not endpoint.base_url:
            raise ConfigError("generation.base_url", "required for the http backend")
        self.endpoint = endpoint
        self.role_endpoints = dict(role_endpoints or {})
        self.limiter = limiter
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.timeout = timeout
        self.session = session or requests.Session()

    def complete(
        self,
        prompt: str,
        n: int,
        temperature: float,
        seed: int,
        role: str = "solver",
    ) -> list[str]:
        if n < 1:
            raise ContractViolation("n must be >= 1")
        if role not in ROLES:
            raise ContractViolation(f"unknown role {role!r}")
        endpoint = self.role_endpoints.get(role, self.endpoint)
        url = endpoint.base_url.rstrip("/") + "/v1/chat/completions"
        body = {
            "model": endpoint.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "n": n,
            "seed": seed,
        }

        def call() -> dict:
            with self.limiter:
                return _post_json(self.session, url, body, _auth_headers(endpoint), self.timeout)

        payload = with_retries(call, self.max_retries, self.backoff_base, f"generate[{role}]")
        try:
            texts = [choice["message"]["content"] for choice in payload["choices"]]
        except (KeyError, TypeError) as exc:
            raise ProtocolError("malformed chat-completions response", payload=payload) from exc
        if len(texts) != n:
            raise ProtocolError(
                f"requested {n} completions, got {len(texts)}", payload=payload
            )
        return texts


class HttpScorerHandle(ScorerHandle):
    """Scoring client for the reward-model wire protocol.

    POST {base}/v1/score with body
    ``{"mode": "outcome"|"process", "question": str, "steps": [str, ...]}``.
    Outcome requests send the full solution text as a single segment and get
    back ``{"score": float}``; process requests send the parsed steps and get
    ``{"step_scores": [float, ...]}`` with one score per step.
    """

    def __init__(
        self,
        kind: str,
        endpoint: EndpointConfig,
        limiter: InflightLimiter,
        max_retries: int = 3,
        backoff_base: float = 0.25,
        timeout: float = 120.0,
        session: Optional[requests.Session] = None,
    ):
        super().__init__(kind)
        if not endpoint.base_url:
            raise ConfigError(f"{kind}.base_url", "required for the http backend")
        self.endpoint = endpoint
        self.limiter = limiter
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.timeout = timeout
        self.session = session or requests.Session()

    def request(self, question: str, steps: Sequence[str]) -> dict:
        url = self.endpoint.base_url.rstrip("/") + "/v1/score"
        body = {"mode": self.kind, "question": question, "steps": list(steps)}
        if self.endpoint.model:
            body["model"] = self.endpoint.model

        def call() -> dict:
            with self.limiter:
                return _post_json(self.session, url, body, _auth_headers(self.endpoint), self.timeout)

        return with_retries(call, self.max_retries, self.backoff_base, f"score[{self.kind}]")


@dataclass
class BackendBundle:
    """Everything the engine needs to talk to the outside world."""

    generator: GenerationBackend
    orm: ScorerHandle
    prm: ScorerHandle
    request_log: Optional[RequestLog] = None


class CallMeter:
    """Engine-side tally of issued calls, independent of any backend log.

    Reports built from these counters can be cross-checked against the mock
    world's request log.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._generation = 0
        self._feedback = 0
        self._scoring = 0

    def count_generation(self, role: str, n: int) -> None:
        with self._lock:
            if role == "reviewer":
                self._feedback += n
            else:
                self._generation += n

    def count_scoring(self) -> None:
        with self._lock:
            self._scoring += 1

    @property
    def generation_calls(self) -> int:
        with self._lock:
            return self._generation

    @property
    def feedback_calls(self) -> int:
        with self._lock:
            return self._feedback

    @property
    def scoring_calls(self) -> int:
        with self._lock:
            return self._scoring


class _MeteredGenerator(GenerationBackend):
    def __init__(self, inner: GenerationBackend, meter: CallMeter):
        self.inner = inner
        self.meter = meter

    def complete(self, prompt, n, temperature, seed, role="solver"):
        out = self.inner.complete(prompt, n, temperature, seed, role)
        self.meter.count_generation(role, n)
        return out


class _MeteredScorer(ScorerHandle):
    def __init__(self, inner: ScorerHandle, meter: CallMeter):
        super().__init__(inner.kind)
        self.inner = inner
        self.meter = meter

    def request(self, question, steps):
        out = self.inner.request(question, steps)
        self.meter.count_scoring()
        return out


def metered_bundle(bundle: BackendBundle) -> tuple[BackendBundle, CallMeter]:
    """Wrap a bundle so every successful call is tallied (one meter per
    problem keeps per-problem accounting exact under concurrency)."""
    meter = CallMeter()
    wrapped = BackendBundle(
        generator=_MeteredGenerator(bundle.generator, meter),
        orm=_MeteredScorer(bundle.orm, meter),
        prm=_MeteredScorer(bundle.prm, meter),
        request_log=bundle.request_log,
    )
    return wrapped, meter


def build_http_backends(config: EngineConfig) -> BackendBundle:
    limiter = InflightLimiter(config.concurrency_limit)
    return BackendBundle(
        generator=OpenAIChatBackend(
            config.generation,
            limiter,
            max_retries=config.max_retries,
            backoff_base=config.backoff_base,
        ),
        orm=HttpScorerHandle(
            OUTCOME, config.orm, limiter,
            max_retries=config.max_retries, backoff_base=config.backoff_base,
        ),
        prm=HttpScorerHandle(
            PROCESS, config.prm, limiter,
            max_retries=config.max_retries, backoff_base=config.backoff_base,
        ),
    )
