"""Reward-model interfaces and score aggregation.

Two scorer kinds exist: outcome (one global score per solution) and process
(one score per step).  Both speak the same wire protocol; see
:class:`HttpScorerHandle` for the exact shape.  Solution-level process scores
are the product of the step scores under the default rule.
"""

from __future__ import annotations

import abc
import logging
import math
from typing import Sequence

from .core import ReasoningChain, ScoredChain
from .errors import ContractViolation, ProtocolError, TransportError

log = logging.getLogger(__name__)

OUTCOME = "outcome"
PROCESS = "process"


class ScorerHandle(abc.ABC):
    """Client for one reward-model endpoint, fixed to one scorer kind.

    Implementations must tolerate concurrent in-flight requests; no mutable
    state beyond connection pooling.
    """

    def __init__(self, kind: str):
        if kind not in (OUTCOME, PROCESS):
            raise ContractViolation(f"unknown scorer kind {kind!r}")
        self.kind = kind

    @abc.abstractmethod
    def request(self, question: str, steps: Sequence[str]) -> dict:
        """Issue one scoring request and return the parsed response payload."""


def _clamp(value: float, context: str) -> float:
    if not isinstance(value, (int, float)) or math.isnan(value):
        raise ProtocolError(f"{context}: score {value!r} is not a finite number", payload=value)
    if value < 0.0 or value > 1.0:
        log.warning("%s: score %s outside [0, 1], clamping", context, value)
        return min(1.0, max(0.0, float(value)))
    return float(value)


def score_outcome(question: str, chain: ReasoningChain, scorer: ScorerHandle) -> float:
    """Global correctness score for the whole solution, in [0, 1].

    The scorer sees the chain's exact raw text, not the step-split view.
    """
    if scorer.kind != OUTCOME:
        raise ContractViolation(f"scorer kind {scorer.kind!r}, expected {OUTCOME!r}")
    if not chain.raw_text:
        raise ContractViolation("chain.raw_text must be non-empty")
    payload = scorer.request(question, [chain.raw_text])
    if "score" not in payload:
        raise ProtocolError("outcome response missing 'score'", payload=payload)
    return _clamp(payload["score"], f"chain {chain.chain_id} outcome")


def score_process(question: str, chain: ReasoningChain, scorer: ScorerHandle) -> list[float]:
    """Per-step correctness scores, one per step, each in [0, 1]."""
    if scorer.kind != PROCESS:
        raise ContractViolation(f"scorer kind {scorer.kind!r}, expected {PROCESS!r}")
    if not chain.steps:
        raise ContractViolation("chain.steps must be non-empty")
    payload = scorer.request(question, list(chain.steps))
    scores = payload.get("step_scores")
    if not isinstance(scores, list):
        raise ProtocolError("process response missing 'step_scores'", payload=payload)
    if len(scores) != len(chain.steps):
        raise ProtocolError(
            f"chain {chain.chain_id}: backend returned {len(scores)} step scores "
            f"for {len(chain.steps)} steps",
            payload=payload,
        )
    return [_clamp(s, f"chain {chain.chain_id} step {i + 1}") for i, s in enumerate(scores)]


def aggregate_prm(step_scores: Sequence[float], rule: str = "product") -> float:
    """Collapse step scores into one solution-level score.

    The product rule is the default and the one every solution-level
    invariant assumes; min and mean exist only for ablation runs.
    """
    if not step_scores:
        raise ContractViolation("aggregate_prm requires at least one step score")
    if rule == "product":
        return math.prod(step_scores)
    if rule == "min":
        return min(step_scores)
    if rule == "mean":
        return sum(step_scores) / len(step_scores)
    raise ContractViolation(f"unknown aggregation rule {rule!r}")


def attach_scores(
    question: str,
    chains: Sequence[ReasoningChain],
    orm: ScorerHandle,
    prm: ScorerHandle,
    prm_aggregation: str = "product",
) -> list[ScoredChain]:
    """Score every chain with both reward models, preserving input order."""
    if not chains:
        raise ContractViolation("attach_scores requires at least one chain")
    out = []
    for chain in chains:
        try:
            orm_score = score_outcome(question, chain, orm)
            step_scores = score_process(question, chain, prm)
        except ProtocolError as exc:
            raise ProtocolError(f"chain {chain.chain_id}: {exc}", payload=exc.payload) from exc
        except TransportError as exc:
            raise TransportError(f"chain {chain.chain_id}: {exc}") from exc
        out.append(
            ScoredChain(
                chain=chain,
                step_scores=tuple(step_scores),
                prm_solution_score=aggregate_prm(step_scores, prm_aggregation),
                orm_solution_score=orm_score,
            )
        )
    return out
