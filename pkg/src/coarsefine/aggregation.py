"""Final-answer selection over a cluster partition.

Three selectors: plain majority vote (self-consistency), reward-weighted
majority vote, and single best chain by outcome score.  Every tie anywhere
breaks toward the smallest chain_id, which makes all selectors deterministic
under a fixed seed.
"""

from __future__ import annotations

from typing import Sequence

from .core import ClusterPartition, NormalizedAnswer, ScoredChain
from .errors import ContractViolation, SelectionError

WEIGHT_MODES = ("both", "orm_only", "prm_only")


def self_consistency(partition: ClusterPartition) -> NormalizedAnswer:
    """Answer of the cluster with the most members."""
    if not partition.clusters:
        raise ContractViolation("empty partition")
    best = min(partition.clusters, key=lambda c: (-c.size, c.min_chain_id))
    return best.answer


def _chain_weight(sc: ScoredChain, mode: str) -> float:
    if mode == "both":
        return sc.orm_solution_score + sc.prm_solution_score
    if mode == "orm_only":
        return sc.orm_solution_score
    if mode == "prm_only":
        return sc.prm_solution_score
    raise ContractViolation(f"unknown weight mode {mode!r}")


def weighted_self_consistency(
    partition: ClusterPartition, weight_mode: str = "both"
) -> NormalizedAnswer:
    """Answer of the cluster with the largest summed per-chain weight.

    The default weight of a chain is its outcome score plus its solution-level
    process score; the single-model modes exist for ablation runs.  With all
    weights equal this reduces exactly to :func:`self_consistency`.
    """
    if not partition.clusters:
        raise ContractViolation("empty partition")
    best = min(
        partition.clusters,
        key=lambda c: (-sum(_chain_weight(m, weight_mode) for m in c.members), c.min_chain_id),
    )
    return best.answer


def best_of_k(chains: Sequence[ScoredChain]) -> NormalizedAnswer:
    """Answer of the single chain with the highest outcome score.

    Only answer-bearing chains are eligible.
    """
    eligible = [sc for sc in chains if sc.chain.answer is not None]
    if not eligible:
        raise SelectionError("no chain has a parseable answer")
    best = min(eligible, key=lambda sc: (-sc.orm_solution_score, sc.chain_id))
    return best.chain.answer
