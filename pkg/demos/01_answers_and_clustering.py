"""Answer extraction, normalization, and answer clustering.

Walks through what happens to raw completions before any reward model is
involved: step splitting, final-answer parsing, and grouping chains whose
answers agree after normalization.
"""

from coarsefine import INITIAL_ORIGIN, normalize, split_steps
from coarsefine.refinement import chain_from_text
from coarsefine.routing import partition_by_answer

completions = [
    "Step 1: The pump drains 18 - 6 = 12 liters per minute net.\n"
    "Step 2: 240 / 12 = 20 minutes. #### 20",
    "Step 1: Net outflow is 12 liters per minute.\n"
    "Step 2: The tank empties after 240/12 minutes.\n"
    "Step 3: That is 20 minutes. #### 20.0",
    "Step 1: 18 + 6 = 24 liters leave each minute.\n"
    "Step 2: 240 / 24 = 10 minutes. #### 10",
    "The answer should be $\\boxed{\\frac{240}{12}}$",
]

print("== step splitting ==")
for text in completions[:2]:
    print(split_steps(text), end="\n\n")

print("== normalization quirks ==")
for raw in ("20", "20.0", "1,000", "\\frac{240}{12}", "x = 20"):
    answer = normalize(raw)
    print(f"{raw!r:24} -> canonical {answer.canonical!r}, numeric {answer.numeric_value}")

print("\n== clustering by normalized answer ==")
chains = [chain_from_text(text, i, INITIAL_ORIGIN) for i, text in enumerate(completions)]
for chain in chains:
    print(f"chain {chain.chain_id}: answer = {chain.answer.canonical if chain.answer else None}")

# wrap with neutral scores just to build the partition
from coarsefine.core import ScoredChain

scored = [
    ScoredChain(chain=c, step_scores=(1.0,) * len(c.steps), prm_solution_score=1.0, orm_solution_score=1.0)
    for c in chains
]
partition = partition_by_answer(scored)
print()
for cluster in partition.clusters:
    ids = [m.chain_id for m in cluster.members]
    print(f"cluster {cluster.answer.canonical!r}: chains {ids}")
print("note: '20', '20.0' and 240/12 all landed in one cluster")
