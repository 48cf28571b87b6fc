"""The two routing conditions, shown on contrived score patterns.

Condition 1 compares the majority cluster's mean solution score against the
mean over all chains (pass when the difference is >= 0).  Condition 2 turns
the entropy of the reward-mass-weighted answer distribution into a
confidence via sigmoid(2 * (1 - H)) (pass when confidence >= 0.5, which is
exactly H <= 1 nat).  A problem is easy when either condition passes for
both reward models.
"""

import math

from coarsefine.core import INITIAL_ORIGIN, EngineConfig, NormalizedAnswer, ReasoningChain, ScoredChain
from coarsefine.routing import partition_by_answer, route


def scored(chain_id, answer, orm, prm):
    chain = ReasoningChain(
        chain_id=chain_id, origin=INITIAL_ORIGIN, steps=("only step",),
        raw_text="only step", answer=NormalizedAnswer(answer),
    )
    return ScoredChain(chain=chain, step_scores=(prm,), prm_solution_score=prm, orm_solution_score=orm)


def show(title, entries):
    partition = partition_by_answer([scored(*e) for e in entries])
    decision = route(partition, EngineConfig(k=len(entries)))
    print(f"-- {title}")
    for rm in ("orm", "prm"):
        c1, c2 = decision.cond1[rm], decision.cond2[rm]
        print(
            f"   {rm}: cond1 normalized {c1.normalized:+.4f} ({'pass' if c1.passed else 'fail'})"
            f"   cond2 H {c2.entropy:.4f} conf {c2.confidence:.4f} ({'pass' if c2.passed else 'fail'})"
        )
    print(f"   => {decision.difficulty}\n")


print("entropy anchors: sigmoid(2(1-H)) at H = 0, ln2, ln3:")
for n in (1, 2, 3):
    h = math.log(n)
    conf = 1 / (1 + math.exp(-2 * (1 - h)))
    print(f"   {n} equal clusters: H = {h:.4f}, confidence = {conf:.4f}")
print()

show(
    "unanimous and well scored: both conditions pass",
    [(0, "9", 0.9, 0.8), (1, "9", 0.8, 0.7), (2, "9", 0.85, 0.75)],
)
show(
    "confident majority, mediocre scores: condition 2 carries it",
    [(0, "9", 0.4, 0.35), (1, "9", 0.42, 0.3), (2, "9", 0.38, 0.33), (3, "4", 0.1, 0.05)],
)
show(
    "flat three-way split with a weak majority: hard",
    [(0, "1", 0.1, 0.05), (1, "1", 0.12, 0.04), (2, "2", 0.4, 0.35), (3, "3", 0.38, 0.4)],
)
show(
    "prm vetoes condition 1, but condition 2 passes for both: still easy",
    [(0, "5", 0.9, 0.05), (1, "5", 0.85, 0.04), (2, "7", 0.2, 0.6), (3, "8", 0.1, 0.55)],
)
