"""Shared builders for tests."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import pytest

from coarsefine.core import INITIAL_ORIGIN, ChainOrigin, ReasoningChain, ScoredChain
from coarsefine.extraction import normalize


def make_chain(
    chain_id: int,
    answer: Optional[str] = None,
    steps: Sequence[str] = ("Step 1: a", "Step 2: b"),
    raw_text: Optional[str] = None,
    origin: ChainOrigin = INITIAL_ORIGIN,
) -> ReasoningChain:
    return ReasoningChain(
        chain_id=chain_id,
        origin=origin,
        steps=tuple(steps),
        raw_text=raw_text or "\n".join(steps),
        answer=normalize(answer) if answer is not None else None,
    )


def make_scored(
    chain_id: int,
    answer: Optional[str] = None,
    orm: float = 0.5,
    step_scores: Sequence[float] = (0.9, 0.9),
    origin: ChainOrigin = INITIAL_ORIGIN,
) -> ScoredChain:
    steps = tuple(f"Step {i + 1}: part {i + 1}" for i in range(len(step_scores)))
    return ScoredChain(
        chain=make_chain(chain_id, answer, steps=steps, origin=origin),
        step_scores=tuple(step_scores),
        prm_solution_score=math.prod(step_scores),
        orm_solution_score=orm,
    )


@pytest.fixture
def scored_factory():
    return make_scored


@pytest.fixture
def chain_factory():
    return make_chain
