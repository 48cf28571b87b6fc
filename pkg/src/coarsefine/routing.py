"""Difficulty routing: cluster chains by answer, then test two conditions
per reward model.

Condition 1 asks whether the majority answer is high quality: the mean
solution score inside the largest cluster, normalized by subtracting the
mean over all clustered chains, must be >= 0.

Condition 2 asks whether the reward model is confident in a single answer:
the entropy of the mass-weighted cluster distribution is inverted and
squashed, confidence = sigmoid(alpha * (1 - H)), and must be >= 0.5.  With
natural-log entropy and alpha = 2 this is exactly H <= 1 nat.

A problem is easy iff either condition passes for *both* reward models.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

from .core import (
    EASY,
    HARD,
    REWARD_MODELS,
    AnswerCluster,
    ClusterPartition,
    Condition1Result,
    Condition2Result,
    EngineConfig,
    RoutingDecision,
    ScoredChain,
)
from .errors import ContractViolation, RoutingDegenerate


def sigmoid(x: float) -> float:
    # branch on sign for numeric stability at large |x|
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def partition_by_answer(chains: Sequence[ScoredChain]) -> ClusterPartition:
    """Group chains by normalized-answer equality.

    Chains without a parsed answer are excluded from clusters and kept
    separately; they cannot vote.  Cluster order follows first appearance
    (smallest chain_id first), which keeps downstream tie-breaking
    deterministic.
    """
    if not chains:
        raise ContractViolation("partition_by_answer requires at least one chain")
    ordered = sorted(chains, key=lambda sc: sc.chain_id)
    groups: dict[object, list[ScoredChain]] = {}
    unparsed = []
    for sc in ordered:
        if sc.chain.answer is None:
            unparsed.append(sc)
            continue
        groups.setdefault(sc.chain.answer.cluster_key(), []).append(sc)
    if not groups:
        raise RoutingDegenerate("no chain has a parseable answer")
    clusters = tuple(
        AnswerCluster.from_members(members[0].chain.answer, members)
        for members in groups.values()
    )
    return ClusterPartition(
        clusters=clusters,
        k=sum(c.size for c in clusters),
        unparsed=tuple(unparsed),
    )


def majority_cluster(partition: ClusterPartition) -> AnswerCluster:
    """Largest cluster by member count; ties go to the cluster containing
    the smallest chain_id."""
    if not partition.clusters:
        raise ContractViolation("empty partition")
    return min(partition.clusters, key=lambda c: (-c.size, c.min_chain_id))


def condition1(partition: ClusterPartition, rm: str) -> Condition1Result:
    """Majority-quality check for one reward model."""
    if rm not in REWARD_MODELS:
        raise ContractViolation(f"unknown reward model {rm!r}")
    majority = majority_cluster(partition)
    majority_mean = sum(m.solution_score(rm) for m in majority.members) / majority.size
    all_chains = partition.chains()
    overall_mean = sum(m.solution_score(rm) for m in all_chains) / len(all_chains)
    normalized = majority_mean - overall_mean
    return Condition1Result(
        majority_mean=majority_mean,
        overall_mean=overall_mean,
        normalized=normalized,
        passed=normalized >= 0.0,
    )


def cluster_entropy(masses: Sequence[float], log_base: Optional[float] = None) -> float:
    """Shannon entropy of the normalized mass distribution.

    Natural log by default (0 * log 0 := 0).  Total mass must be positive.
    """
    if any(m < 0 for m in masses):
        raise ContractViolation("cluster masses must be >= 0")
    total = sum(masses)
    if total <= 0.0:
        raise RoutingDegenerate("total reward-model mass is zero")
    h = 0.0
    for m in masses:
        if m > 0.0:
            p = m / total
            h -= p * math.log(p)
    if log_base is not None:
        h /= math.log(log_base)
    return h


def condition2(
    partition: ClusterPartition,
    rm: str,
    alpha: float,
    log_base: Optional[float] = None,
) -> Condition2Result:
    """Confidence check for one reward model.

    Raises :class:`RoutingDegenerate` when the model assigns zero total mass,
    in which case the condition counts as failed.
    """
    if rm not in REWARD_MODELS:
        raise ContractViolation(f"unknown reward model {rm!r}")
    if alpha <= 0:
        raise ContractViolation("alpha must be > 0")
    entropy = cluster_entropy([c.mass(rm) for c in partition.clusters], log_base)
    confidence = sigmoid(alpha * (1.0 - entropy))
    return Condition2Result(entropy=entropy, confidence=confidence, passed=confidence >= 0.5)


_DEGENERATE_COND2 = Condition2Result(entropy=math.inf, confidence=0.0, passed=False)


def route(partition: ClusterPartition, config: EngineConfig) -> RoutingDecision:
    """Combine both conditions over both reward models into the easy/hard
    verdict.

    A reward model with zero total mass fails Condition 2 and flags the
    decision as degenerate; the problem can still come out easy via
    Condition 1.
    """
    cond1 = {rm: condition1(partition, rm) for rm in REWARD_MODELS}
    cond2 = {}
    degenerate = False
    for rm in REWARD_MODELS:
        try:
            cond2[rm] = condition2(partition, rm, config.alpha, config.entropy_log_base)
        except RoutingDegenerate:
            cond2[rm] = _DEGENERATE_COND2
            degenerate = True
    easy = all(cond1[rm].passed for rm in REWARD_MODELS) or all(
        cond2[rm].passed for rm in REWARD_MODELS
    )
    return RoutingDecision(
        cond1=cond1,
        cond2=cond2,
        difficulty=EASY if easy else HARD,
        degenerate=degenerate,
    )


def forced_hard_decision() -> RoutingDecision:
    """Decision used when no chain produced a parseable answer: no clusters
    exist, so refinement is the only productive path."""
    return RoutingDecision(cond1={}, cond2={}, difficulty=HARD, degenerate=True)
