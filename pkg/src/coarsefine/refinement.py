"""Multi-agent refinement for hard problems.

One iteration runs, for every retained chain: annotate the steps with their
process scores, ask the reviewer for targeted feedback, ask the refiner for a
revised chain, and re-score the result with both reward models.  The
originals and the refined chains are then pooled and only the top k by
outcome score survive.  The loop re-routes the retained pool after each
iteration and stops as soon as the problem looks easy, or when the iteration
budget runs out.

Reviewer and refiner are separate calls with separate templates; a joint
single-call variant exists behind ``EngineConfig.joint_roles`` for ablation
runs only.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .aggregation import weighted_self_consistency
from .backends.client import BackendBundle
from .core import (
    EASY,
    HARD,
    ChainOrigin,
    EngineConfig,
    IterationTrace,
    NormalizedAnswer,
    ReasoningChain,
    RoutingDecision,
    ScoredChain,
)
from .errors import (
    ContractViolation,
    IterationError,
    ProtocolError,
    ReviewError,
    RoutingDegenerate,
    TransportError,
)
from .extraction import extract_answer, split_steps
from .routing import forced_hard_decision, partition_by_answer, route
from .scoring import attach_scores

REQUIRED_PLACEHOLDERS: Mapping[str, tuple[str, ...]] = {
    "solver": ("question",),
    "reviewer": ("question", "annotated_chain", "exemplar"),
    "refiner": ("question", "annotated_chain", "feedback", "exemplar"),
    "joint": ("question", "annotated_chain", "exemplar"),
}

_EXEMPLAR_FILES = {
    "reviewer": "reviewer_exemplar.txt",
    "refiner": "refiner_exemplar.txt",
    "joint": "refiner_exemplar.txt",
}


@dataclass(frozen=True)
class PromptTemplate:
    """A role's prompt skeleton with named placeholders."""

    role: str
    text: str

    def __post_init__(self):
        required = REQUIRED_PLACEHOLDERS.get(self.role)
        if required is None:
            raise ContractViolation(f"unknown template role {self.role!r}")
        missing = [name for name in required if "{" + name + "}" not in self.text]
        if missing:
            raise ContractViolation(
                f"{self.role} template is missing placeholders: {', '.join(missing)}"
            )

    def render(self, **fields: str) -> str:
        return self.text.format(**fields)


@dataclass(frozen=True)
class PromptLibrary:
    """All role templates plus their 1-shot exemplars."""

    templates: Mapping[str, PromptTemplate]
    exemplars: Mapping[str, str]

    @classmethod
    def load(cls, override_dir: str = "") -> "PromptLibrary":
        """Shipped templates, optionally shadowed by files of the same name
        in ``override_dir``."""
        base = resources.files("coarsefine").joinpath("assets/prompts")

        def read(name: str) -> str:
            if override_dir:
                candidate = Path(override_dir) / name
                if candidate.is_file():
                    return candidate.read_text()
            return base.joinpath(name).read_text()

        templates = {
            role: PromptTemplate(role, read(f"{role}.txt")) for role in REQUIRED_PLACEHOLDERS
        }
        exemplars = {role: read(fname).strip() for role, fname in _EXEMPLAR_FILES.items()}
        return cls(templates=templates, exemplars=exemplars)

    def render(self, role: str, **fields: str) -> str:
        if role in self.exemplars and "exemplar" not in fields:
            fields["exemplar"] = self.exemplars[role]
        return self.templates[role].render(**fields)


def display_score(step_score: float) -> int:
    """Integer tenths for display, rounded half-up: 0.95 shows as 10/10."""
    return int(math.floor(step_score * 10.0 + 0.5))


def annotate_chain(scored: ScoredChain) -> str:
    """Render a chain with each step's process score appended, the form the
    reviewer consumes."""
    return "\n".join(
        f"{step} (Score: {display_score(s)}/10)"
        for step, s in zip(scored.chain.steps, scored.step_scores)
    )


def chain_from_text(
    raw: str,
    chain_id: int,
    origin: ChainOrigin,
    answer_style: str = "auto",
) -> ReasoningChain:
    """Parse a completion into a chain; a missing answer is not an error."""
    return ReasoningChain(
        chain_id=chain_id,
        origin=origin,
        steps=tuple(split_steps(raw)),
        raw_text=raw,
        answer=extract_answer(raw, answer_style),
    )


def review(
    question: str,
    annotated: str,
    backend,
    library: PromptLibrary,
    temperature: float,
    seed: int,
) -> str:
    """One reviewer call for one chain.  Empty feedback is an error; the
    caller keeps the original chain for this round."""
    prompt = library.render("reviewer", question=question, annotated_chain=annotated)
    feedback = backend.complete(prompt, 1, temperature, seed, role="reviewer")[0].strip()
    if not feedback:
        raise ReviewError("reviewer returned an empty completion")
    return feedback


def refine(
    question: str,
    annotated_chain: str,
    feedback: str,
    backend,
    library: PromptLibrary,
    *,
    chain_id: int,
    iteration: int,
    temperature: float,
    seed: int,
    answer_style: str = "auto",
) -> ReasoningChain:
    """One refiner call for one chain, conditioned on the reviewer feedback."""
    if not feedback:
        raise ContractViolation("refine requires non-empty feedback")
    prompt = library.render(
        "refiner", question=question, annotated_chain=annotated_chain, feedback=feedback
    )
    raw = backend.complete(prompt, 1, temperature, seed, role="refiner")[0]
    if not raw.strip():
        raise ReviewError("refiner returned an empty completion")
    return chain_from_text(raw, chain_id, ChainOrigin.refined(iteration), answer_style)


def review_and_refine_joint(
    question: str,
    annotated_chain: str,
    backend,
    library: PromptLibrary,
    *,
    chain_id: int,
    iteration: int,
    temperature: float,
    seed: int,
    answer_style: str = "auto",
) -> tuple[str, ReasoningChain]:
    """Ablation path: one completion carrying both feedback and revision."""
    prompt = library.render("joint", question=question, annotated_chain=annotated_chain)
    raw = backend.complete(prompt, 1, temperature, seed, role="joint")[0]
    feedback, marker, revised = raw.partition("Revised solution:")
    if not marker or not revised.strip():
        raise ReviewError("joint completion did not contain a revised solution")
    chain = chain_from_text(
        revised.strip(), chain_id, ChainOrigin.refined(iteration), answer_style
    )
    return feedback.strip(), chain


def retain_top_k(pool: Sequence[ScoredChain], k: int) -> list[ScoredChain]:
    """The k pool members with the highest outcome scores.

    Ties break toward the smaller chain_id, then initial before refined.
    Short pools (refinement failures) keep everything.
    """
    if not pool:
        raise ContractViolation("retain_top_k requires a non-empty pool")
    if k < 1:
        raise ContractViolation("k must be >= 1")
    ranked = sorted(
        pool,
        key=lambda sc: (
            -sc.orm_solution_score,
            sc.chain_id,
            sc.chain.origin.kind != "initial",
        ),
    )
    return ranked[: min(k, len(ranked))]


@dataclass(frozen=True)
class RefinementOutcome:
    """What the loop produced, and why it stopped."""

    final_answer: Optional[NormalizedAnswer]
    traces: tuple[IterationTrace, ...]
    stop_reason: str  # "condition_met" | "max_iterations"
    fallback: bool = False  # true when no iteration succeeded


def _refine_one(
    question: str,
    scored: ScoredChain,
    new_chain_id: int,
    iteration_index: int,
    config: EngineConfig,
    backends: BackendBundle,
    library: PromptLibrary,
) -> tuple[str, str, object]:
    """Annotate, review, refine, and re-score one chain.

    Returns ("ok", feedback, scored_chain) or ("err", feedback, message);
    tuples keep executor.map ordering clean.
    """
    annotated = annotate_chain(scored)
    feedback = ""
    try:
        if config.joint_roles:
            feedback, refined = review_and_refine_joint(
                question,
                annotated,
                backends.generator,
                library,
                chain_id=new_chain_id,
                iteration=iteration_index,
                temperature=config.temperature,
                seed=config.seed,
                answer_style=config.answer_style,
            )
        else:
            feedback = review(
                question, annotated, backends.generator, library, config.temperature, config.seed
            )
            refined = refine(
                question,
                annotated,
                feedback,
                backends.generator,
                library,
                chain_id=new_chain_id,
                iteration=iteration_index,
                temperature=config.temperature,
                seed=config.seed,
                answer_style=config.answer_style,
            )
        rescored = attach_scores(
            question, [refined], backends.orm, backends.prm, config.prm_aggregation
        )[0]
        return ("ok", feedback, rescored)
    except (TransportError, ProtocolError, ReviewError) as exc:
        return ("err", feedback, f"chain {scored.chain_id}: {exc}")


def refine_iteration(
    question: str,
    retained_chains: Sequence[ScoredChain],
    iteration_index: int,
    config: EngineConfig,
    backends: BackendBundle,
    library: Optional[PromptLibrary] = None,
    next_chain_id: Optional[int] = None,
) -> IterationTrace:
    """One full review-refine-score-retain-reroute cycle over all chains.

    Per-chain failures are recorded in the trace and the original chain
    simply stays in the pool; the iteration as a whole fails only when zero
    chains could be refined.
    """
    if iteration_index < 1:
        raise ContractViolation("iteration_index must be >= 1")
    if not retained_chains:
        raise ContractViolation("refine_iteration requires at least one chain")
    library = library or PromptLibrary.load(config.prompt_dir)
    ordered = sorted(retained_chains, key=lambda sc: sc.chain_id)
    if next_chain_id is None:
        next_chain_id = max(sc.chain_id for sc in ordered) + 1

    jobs = [(sc, next_chain_id + idx) for idx, sc in enumerate(ordered)]
    workers = min(config.concurrency_limit, len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    lambda job: _refine_one(
                        question, job[0], job[1], iteration_index, config, backends, library
                    ),
                    jobs,
                )
            )
    else:
        results = [
            _refine_one(question, sc, cid, iteration_index, config, backends, library)
            for sc, cid in jobs
        ]

    feedback = tuple(fb for _, fb, _ in results)
    refined = [payload for status, _, payload in results if status == "ok"]
    failures = tuple(payload for status, _, payload in results if status == "err")
    if not refined:
        raise IterationError(
            f"iteration {iteration_index}: no chain could be refined "
            f"({len(failures)} failures)"
        )

    pool_chains = list(ordered) + refined
    retained = retain_top_k(pool_chains, config.k)
    try:
        partition = partition_by_answer(retained)
        routing_after = route(partition, config)
        selected = weighted_self_consistency(partition, config.weight_mode)
    except RoutingDegenerate:
        routing_after = forced_hard_decision()
        selected = None

    return IterationTrace(
        iteration_index=iteration_index,
        feedback=feedback,
        refined_chains=tuple(refined),
        pool_before_retention=tuple(pool_chains),
        retained=tuple(retained),
        routing_after=routing_after,
        selected_answer=selected,
        failures=failures,
    )


def refine_until_done(
    question: str,
    initial_scored: Sequence[ScoredChain],
    initial_routing: RoutingDecision,
    config: EngineConfig,
    backends: BackendBundle,
    library: Optional[PromptLibrary] = None,
) -> RefinementOutcome:
    """Iterate refinement until a condition passes or the budget is spent.

    With ``max_iterations == 0`` no refinement happens and the answer comes
    straight from the initial chains.  If every attempted iteration fails,
    the initial weighted vote is used and the outcome is flagged as a
    fallback.
    """
    if initial_routing.difficulty != HARD and config.routing_override != "always_hard":
        raise ContractViolation("refine_until_done expects a hard-routed problem")
    library = library or PromptLibrary.load(config.prompt_dir)

    def initial_answer() -> Optional[NormalizedAnswer]:
        try:
            return weighted_self_consistency(
                partition_by_answer(initial_scored), config.weight_mode
            )
        except RoutingDegenerate:
            return None

    traces: list[IterationTrace] = []
    retained = sorted(initial_scored, key=lambda sc: sc.chain_id)
    next_id = max(sc.chain_id for sc in retained) + 1
    stop_reason = "max_iterations"
    attempted = 0
    for iteration in range(1, config.max_iterations + 1):
        attempted += 1
        try:
            trace = refine_iteration(
                question, retained, iteration, config, backends, library, next_id
            )
        except IterationError:
            break
        traces.append(trace)
        next_id += len(retained)
        retained = list(trace.retained)
        if trace.routing_after.difficulty == EASY:
            stop_reason = "condition_met"
            break

    final: Optional[NormalizedAnswer] = None
    for trace in reversed(traces):
        if trace.selected_answer is not None:
            final = trace.selected_answer
            break
    fallback = False
    if final is None:
        final = initial_answer()
        fallback = attempted > 0 and not traces
    return RefinementOutcome(
        final_answer=final,
        traces=tuple(traces),
        stop_reason=stop_reason,
        fallback=fallback,
    )
