"""One hard problem walked through the reviewer/refiner loop, verbosely.

Uses the scripted mock world so the run is deterministic: the process model
flags the planted bad steps, the reviewer names them, and the refiner's
revision flips the answer cluster to the gold answer, at which point the
routing conditions pass and the loop stops.
"""

from coarsefine.backends.mock import mock_world
from coarsefine.backends.suites import smoke_suite
from coarsefine.core import INITIAL_ORIGIN, EngineConfig
from coarsefine.refinement import (
    PromptLibrary,
    annotate_chain,
    chain_from_text,
    refine_until_done,
)
from coarsefine.routing import partition_by_answer, route
from coarsefine.scoring import attach_scores

suite = smoke_suite()
bundle = mock_world(suite)
config = EngineConfig(k=suite.k, backend="mock", mock_suite="smoke")
library = PromptLibrary.load()
problem = suite.problems[1]  # the fixable one

print(f"question: {problem.question}")
prompt = library.render("solver", question=problem.question)
texts = bundle.generator.complete(prompt, config.k, config.temperature, config.seed, role="solver")
chains = [chain_from_text(t, i, INITIAL_ORIGIN) for i, t in enumerate(texts)]
scored = attach_scores(problem.question, chains, bundle.orm, bundle.prm)

print("\n== chain 0 with step scores appended (reviewer input) ==")
print(annotate_chain(scored[0]))

decision = route(partition_by_answer(scored), config)
print(f"\ninitial routing: {decision.difficulty}")

outcome = refine_until_done(problem.question, scored, decision, config, bundle, library)
for trace in outcome.traces:
    print(f"\n== iteration {trace.iteration_index} ==")
    print(f"feedback for chain 0:\n{trace.feedback[0]}")
    print(f"refined chain 0 answer: {trace.refined_chains[0].chain.answer.canonical}")
    retained_answers = [
        sc.chain.answer.canonical if sc.chain.answer else None for sc in trace.retained
    ]
    print(f"retained answers after top-k by outcome score: {retained_answers}")
    print(f"routing after iteration: {trace.routing_after.difficulty}")
    print(f"selected answer: {trace.selected_answer.canonical}")

print(f"\nstopped because: {outcome.stop_reason}")
print(f"final answer {outcome.final_answer.canonical} (gold {problem.gold})")
