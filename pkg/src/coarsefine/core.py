"""Shared value types for the reasoning engine.

Every type here is immutable after construction, so instances can be shared
freely between worker threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .errors import ConfigError, ContractViolation

# Reward-model identifiers used as dictionary keys throughout.
ORM = "orm"
PRM = "prm"
REWARD_MODELS = (ORM, PRM)

EASY = "easy"
HARD = "hard"

_MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class NormalizedAnswer:
    """A final answer in canonical textual form, plus an exact numeric value
    when the text parses as one.

    Two answers are equal iff their canonical forms match, or both carry a
    numeric value and those values are equal as rationals.  Exact rational
    comparison is what lets ``14/3`` and ``4.666...``-style decimals cluster
    correctly where float equality would not.

    Instances should be produced by :func:`coarsefine.extraction.normalize`;
    hand-built instances whose canonical text looks numeric but whose
    ``numeric_value`` is unset can break hashing guarantees.
    """

    canonical: str
    numeric_value: Optional[Fraction] = None

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NormalizedAnswer):
            return NotImplemented
        if self.canonical == other.canonical:
            return True
        return (
            self.numeric_value is not None
            and other.numeric_value is not None
            and self.numeric_value == other.numeric_value
        )

    def __hash__(self) -> int:
        return hash(self.cluster_key())

    def cluster_key(self):
        """Grouping key: numeric identity when available, else canonical text."""
        if self.numeric_value is not None:
            return ("num", self.numeric_value)
        return ("text", self.canonical)


@dataclass(frozen=True)
class Problem:
    """One input question.  ``gold_answer`` is harness-only metadata."""

    id: str
    question: str
    gold_answer: Optional[NormalizedAnswer] = None
    difficulty_label: Optional[str] = None

    def __post_init__(self):
        if not self.question:
            raise ContractViolation("Problem.question must be non-empty")


@dataclass(frozen=True)
class ChainOrigin:
    """Where a chain came from: the initial sampling batch, or a refinement
    round (``iteration`` >= 1)."""

    kind: str  # "initial" | "refined"
    iteration: int = 0

    def __post_init__(self):
        if self.kind not in ("initial", "refined"):
            raise ContractViolation(f"unknown origin kind {self.kind!r}")
        if self.kind == "refined" and self.iteration < 1:
            raise ContractViolation("refined origin requires iteration >= 1")

    @classmethod
    def refined(cls, iteration: int) -> "ChainOrigin":
        return cls("refined", iteration)


INITIAL_ORIGIN = ChainOrigin("initial")


@dataclass(frozen=True)
class ReasoningChain:
    """A single generated solution, split into ordered steps.

    ``chain_id`` is assigned in generation order, is unique per problem, and
    acts as the universal deterministic tie-breaker.  ``raw_text`` is the
    exact model output.
    """

    chain_id: int
    origin: ChainOrigin
    steps: tuple[str, ...]
    raw_text: str
    answer: Optional[NormalizedAnswer] = None

    def __post_init__(self):
        if self.chain_id < 0:
            raise ContractViolation("chain_id must be >= 0")
        if not self.raw_text:
            raise ContractViolation("raw_text must be non-empty")
        object.__setattr__(self, "steps", tuple(self.steps))


@dataclass(frozen=True)
class ScoredChain:
    """A chain plus its reward-model scores.

    ``step_scores`` holds one process score per step; ``prm_solution_score``
    is their aggregate (the product under the default aggregation rule) and
    ``orm_solution_score`` the outcome model's global score.  All scores live
    in [0, 1].  Build instances through
    :func:`coarsefine.scoring.attach_scores` so the product identity holds.
    """

    chain: ReasoningChain
    step_scores: tuple[float, ...]
    prm_solution_score: float
    orm_solution_score: float

    def __post_init__(self):
        object.__setattr__(self, "step_scores", tuple(self.step_scores))
        if len(self.step_scores) != len(self.chain.steps):
            raise ContractViolation(
                f"chain {self.chain.chain_id}: {len(self.step_scores)} step scores "
                f"for {len(self.chain.steps)} steps"
            )
        for name, value in (
            ("prm_solution_score", self.prm_solution_score),
            ("orm_solution_score", self.orm_solution_score),
        ):
            if not 0.0 <= value <= 1.0:
                raise ContractViolation(f"{name}={value} outside [0, 1]")
        for s in self.step_scores:
            if not 0.0 <= s <= 1.0:
                raise ContractViolation(f"step score {s} outside [0, 1]")

    @property
    def chain_id(self) -> int:
        return self.chain.chain_id

    def solution_score(self, rm: str) -> float:
        """Solution-level score under the named reward model."""
        if rm == ORM:
            return self.orm_solution_score
        if rm == PRM:
            return self.prm_solution_score
        raise ContractViolation(f"unknown reward model {rm!r}")

    def satisfies_product_rule(self, tol: float = _MASS_TOL) -> bool:
        return abs(self.prm_solution_score - math.prod(self.step_scores)) <= tol


@dataclass(frozen=True)
class AnswerCluster:
    """All chains sharing one normalized final answer, with their summed
    reward-model masses."""

    answer: NormalizedAnswer
    members: tuple[ScoredChain, ...]
    orm_mass: float
    prm_mass: float

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ContractViolation("AnswerCluster.members must be non-empty")
        if abs(self.orm_mass - sum(m.orm_solution_score for m in self.members)) > _MASS_TOL:
            raise ContractViolation("orm_mass does not match member sum")
        if abs(self.prm_mass - sum(m.prm_solution_score for m in self.members)) > _MASS_TOL:
            raise ContractViolation("prm_mass does not match member sum")

    @classmethod
    def from_members(cls, answer: NormalizedAnswer, members: Sequence[ScoredChain]) -> "AnswerCluster":
        return cls(
            answer=answer,
            members=tuple(members),
            orm_mass=sum(m.orm_solution_score for m in members),
            prm_mass=sum(m.prm_solution_score for m in members),
        )

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def min_chain_id(self) -> int:
        return min(m.chain_id for m in self.members)

    def mass(self, rm: str) -> float:
        if rm == ORM:
            return self.orm_mass
        if rm == PRM:
            return self.prm_mass
        raise ContractViolation(f"unknown reward model {rm!r}")


@dataclass(frozen=True)
class ClusterPartition:
    """Chains grouped by normalized answer.

    ``k`` counts the clustered (answer-bearing) chains and equals the sum of
    cluster sizes.  Chains whose answer could not be parsed are kept in
    ``unparsed``; they never vote and never enter the routing statistics.
    """

    clusters: tuple[AnswerCluster, ...]
    k: int
    unparsed: tuple[ScoredChain, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))
        object.__setattr__(self, "unparsed", tuple(self.unparsed))
        total = sum(c.size for c in self.clusters)
        if total != self.k:
            raise ContractViolation(f"cluster sizes sum to {total}, expected k={self.k}")
        keys = [c.answer.cluster_key() for c in self.clusters]
        if len(set(keys)) != len(keys):
            raise ContractViolation("two clusters share a normalized answer")
        seen: set[int] = set()
        for c in self.clusters:
            for m in c.members:
                if m.chain_id in seen:
                    raise ContractViolation(f"chain {m.chain_id} appears in two clusters")
                seen.add(m.chain_id)

    def chains(self) -> list[ScoredChain]:
        """All clustered chains, in chain_id order."""
        out = [m for c in self.clusters for m in c.members]
        out.sort(key=lambda sc: sc.chain_id)
        return out


@dataclass(frozen=True)
class Condition1Result:
    """Majority-quality check for one reward model: is the majority cluster's
    mean solution score at least the mean over all clustered chains?"""

    majority_mean: float
    overall_mean: float
    normalized: float
    passed: bool


@dataclass(frozen=True)
class Condition2Result:
    """Confidence check for one reward model: entropy of the RM-mass-weighted
    cluster distribution, squashed to a confidence in [0, 1]."""

    entropy: float
    confidence: float
    passed: bool


@dataclass(frozen=True)
class RoutingDecision:
    """The easy/hard verdict plus every intermediate statistic, for audit.

    ``degenerate`` marks decisions forced to hard because no usable answer
    clusters existed (or a reward model contributed zero total mass).
    """

    cond1: Mapping[str, Condition1Result]
    cond2: Mapping[str, Condition2Result]
    difficulty: str
    degenerate: bool = False

    def __post_init__(self):
        if self.difficulty not in (EASY, HARD):
            raise ContractViolation(f"difficulty must be easy or hard, got {self.difficulty!r}")
        object.__setattr__(self, "cond1", dict(self.cond1))
        object.__setattr__(self, "cond2", dict(self.cond2))
        if not self.degenerate:
            expected = EASY if (self.cond1_overall or self.cond2_overall) else HARD
            if expected != self.difficulty:
                raise ContractViolation(
                    f"difficulty {self.difficulty} inconsistent with conditions"
                )

    @property
    def cond1_overall(self) -> bool:
        return set(self.cond1) >= set(REWARD_MODELS) and all(
            self.cond1[rm].passed for rm in REWARD_MODELS
        )

    @property
    def cond2_overall(self) -> bool:
        return set(self.cond2) >= set(REWARD_MODELS) and all(
            self.cond2[rm].passed for rm in REWARD_MODELS
        )


@dataclass(frozen=True)
class EndpointConfig:
    """Where one backend lives and which model it serves."""

    base_url: str = ""
    model: str = ""
    api_key_env: str = ""


@dataclass(frozen=True)
class EngineConfig:
    """Run-wide knobs.  Defaults follow the engine's reference operating
    point: 40 chains sampled at temperature 0.8, at most 3 refinement
    rounds, confidence sharpness alpha = 2."""

    k: int = 40
    temperature: float = 0.8
    max_iterations: int = 3
    alpha: float = 2.0
    concurrency_limit: int = 8
    seed: int = 0
    max_retries: int = 3
    backoff_base: float = 0.25
    backend: str = "mock"  # "mock" | "http"
    mock_suite: str = ""  # builtin suite name or path, mock backend only
    prm_aggregation: str = "product"  # "min" / "mean" are ablation-only
    weight_mode: str = "both"  # "orm_only" / "prm_only" are ablation-only
    joint_roles: bool = False  # ablation: single review+refine call
    answer_style: str = "auto"
    entropy_log_base: Optional[float] = None  # None = natural log
    routing_override: Optional[str] = None  # None | "always_easy" | "always_hard"
    prompt_dir: str = ""  # directory of template overrides, empty = shipped assets
    generation: EndpointConfig = field(default_factory=EndpointConfig)
    orm: EndpointConfig = field(default_factory=EndpointConfig)
    prm: EndpointConfig = field(default_factory=EndpointConfig)

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k", "must be >= 1")
        if self.max_iterations < 0:
            raise ConfigError("max_iterations", "must be >= 0")
        if self.alpha <= 0:
            raise ConfigError("alpha", "must be > 0")
        if self.concurrency_limit < 1:
            raise ConfigError("concurrency_limit", "must be >= 1")
        if self.max_retries < 0:
            raise ConfigError("max_retries", "must be >= 0")
        if self.backend not in ("mock", "http"):
            raise ConfigError("backend", f"unknown backend {self.backend!r}")
        if self.prm_aggregation not in ("product", "min", "mean"):
            raise ConfigError("prm_aggregation", f"unknown rule {self.prm_aggregation!r}")
        if self.weight_mode not in ("both", "orm_only", "prm_only"):
            raise ConfigError("weight_mode", f"unknown mode {self.weight_mode!r}")
        if self.routing_override not in (None, "always_easy", "always_hard"):
            raise ConfigError("routing_override", f"unknown override {self.routing_override!r}")
        if self.entropy_log_base is not None and self.entropy_log_base <= 1.0:
            raise ConfigError("entropy_log_base", "must be > 1")


@dataclass(frozen=True)
class IterationTrace:
    """Full record of one refinement round."""

    iteration_index: int
    feedback: tuple[str, ...]
    refined_chains: tuple[ScoredChain, ...]
    pool_before_retention: tuple[ScoredChain, ...]
    retained: tuple[ScoredChain, ...]
    routing_after: RoutingDecision
    selected_answer: Optional[NormalizedAnswer]
    failures: tuple[str, ...] = ()

    def __post_init__(self):
        if self.iteration_index < 1:
            raise ContractViolation("iteration_index must be >= 1")
        pool_ids = {sc.chain_id for sc in self.pool_before_retention}
        for sc in self.retained:
            if sc.chain_id not in pool_ids:
                raise ContractViolation("retained chain missing from pool")
