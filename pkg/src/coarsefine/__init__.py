"""coarsefine: adaptive coarse-to-fine orchestration for multi-step LLM
reasoning.

The engine samples k reasoning chains per problem, scores them with outcome
and process reward models, and classifies the problem as easy or hard from
the majority answer's quality and the reward models' answer confidence.
Easy problems are answered by reward-weighted majority vote; hard problems
enter an iterative reviewer/refiner loop driven by step-level scores, keeping
the top k chains by outcome score each round.
"""

__version__ = "0.1.0"

from .core import (
    AnswerCluster,
    ChainOrigin,
    ClusterPartition,
    Condition1Result,
    Condition2Result,
    EngineConfig,
    EndpointConfig,
    INITIAL_ORIGIN,
    IterationTrace,
    NormalizedAnswer,
    Problem,
    ReasoningChain,
    RoutingDecision,
    ScoredChain,
)
from .aggregation import best_of_k, self_consistency, weighted_self_consistency
from .extraction import extract_answer, normalize, split_steps
from .routing import condition1, condition2, partition_by_answer, route
from .scoring import aggregate_prm, attach_scores, score_outcome, score_process
from .refinement import (
    PromptLibrary,
    PromptTemplate,
    annotate_chain,
    refine,
    refine_iteration,
    refine_until_done,
    retain_top_k,
    review,
)
from .harness import (
    RunReport,
    emit_report,
    load_dataset,
    routing_agreement,
    run_method,
    solve_problem,
)

__all__ = [
    "AnswerCluster",
    "ChainOrigin",
    "ClusterPartition",
    "Condition1Result",
    "Condition2Result",
    "EndpointConfig",
    "EngineConfig",
    "INITIAL_ORIGIN",
    "IterationTrace",
    "NormalizedAnswer",
    "Problem",
    "PromptLibrary",
    "PromptTemplate",
    "ReasoningChain",
    "RoutingDecision",
    "RunReport",
    "ScoredChain",
    "aggregate_prm",
    "annotate_chain",
    "attach_scores",
    "best_of_k",
    "condition1",
    "condition2",
    "emit_report",
    "extract_answer",
    "load_dataset",
    "normalize",
    "partition_by_answer",
    "refine",
    "refine_iteration",
    "refine_until_done",
    "retain_top_k",
    "review",
    "route",
    "routing_agreement",
    "run_method",
    "score_outcome",
    "score_process",
    "self_consistency",
    "solve_problem",
    "split_steps",
    "weighted_self_consistency",
]
