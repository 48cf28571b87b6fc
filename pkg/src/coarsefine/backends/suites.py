"""Builders for the scripted mock suites shipped with the package.

Three problem archetypes cover the routing and refinement behaviors the
engine must exhibit:

* easy-unanimous: every chain lands on the gold answer, so both conditions
  pass and no refinement happens.
* hard-fixable: answers spread over three clusters (confidence fails) and
  the majority cluster carries extra bad steps (majority quality fails for
  the process model).  Targeted feedback unlocks the fix after
  ``fix_after`` refinement passes.
* hard-unfixable: same shape, but the refiner never finds the fix, so the
  loop runs to its iteration budget.

Run ``python -m coarsefine.backends.suites`` to regenerate the shipped suite
files after changing a builder.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .mock import ChainPlan, MockProblem, MockSuite, suite_to_dict

BUILTIN_SUITES = ("mixed", "multiround", "smoke")


def _question(index: int) -> str:
    return f"Scenario {index}: combine the listed quantities and report the final tally."


def easy_unanimous(pid: str, index: int, gold: int, k: int) -> MockProblem:
    return MockProblem(
        id=pid,
        question=_question(index),
        gold=str(gold),
        chains=tuple(ChainPlan(answer=str(gold)) for _ in range(k)),
        corrupt_answer=str(gold + 50),
    )


def _spread_hard_plans(gold: int, k: int) -> tuple[ChainPlan, ...]:
    """Three wrong-answer clusters; the majority cluster has two bad steps,
    the others one, which drives the majority's process quality below the
    overall mean while confidence stays low for both reward models."""
    if k < 3:
        raise ValueError("hard problems need k >= 3")
    wrong = [str(gold + d) for d in (1, 2, 3)]
    sizes = [k // 3 + (1 if i < k % 3 else 0) for i in range(3)]
    plans: list[ChainPlan] = []
    for cluster_idx, (answer, size) in enumerate(zip(wrong, sizes)):
        errors = (2, 3) if cluster_idx == 0 else (3,)
        plans.extend(ChainPlan(answer=answer, error_steps=errors) for _ in range(size))
    return tuple(plans)


def hard_fixable(pid: str, index: int, gold: int, k: int, fix_after: int = 1) -> MockProblem:
    return MockProblem(
        id=pid,
        question=_question(index),
        gold=str(gold),
        chains=_spread_hard_plans(gold, k),
        fixable=True,
        fix_after=fix_after,
        corrupt_answer=str(gold + 50),
    )


def hard_unfixable(pid: str, index: int, gold: int, k: int) -> MockProblem:
    return MockProblem(
        id=pid,
        question=_question(index),
        gold=str(gold),
        chains=_spread_hard_plans(gold, k),
        fixable=False,
        corrupt_answer=str(gold + 50),
    )


def mixed_suite(
    k: int = 6,
    n_easy: int = 30,
    n_fixable: int = 10,
    n_unfixable: int = 10,
    corrupt_correct_prob: float = 0.3,
) -> MockSuite:
    """The selective-refinement suite: mostly easy problems, a block that
    refinement can rescue, and a block nothing can rescue.  The corrupting
    refiner makes uniform refinement risky on the easy block."""
    problems = []
    index = 0
    for i in range(n_easy):
        problems.append(easy_unanimous(f"easy-{i:03d}", index, 40 + 3 * index, k))
        index += 1
    for i in range(n_fixable):
        problems.append(hard_fixable(f"fixable-{i:03d}", index, 40 + 3 * index, k))
        index += 1
    for i in range(n_unfixable):
        problems.append(hard_unfixable(f"unfixable-{i:03d}", index, 40 + 3 * index, k))
        index += 1
    return MockSuite(
        problems=tuple(problems), k=k, corrupt_correct_prob=corrupt_correct_prob
    )


def multiround_suite(k: int = 6) -> MockSuite:
    """Iteration-scaling suite: problems that unlock at refinement rounds 1,
    2, and 3, so accuracy climbs with every extra iteration."""
    problems = []
    index = 0
    for i in range(6):
        problems.append(easy_unanimous(f"easy-{i:03d}", index, 40 + 3 * index, k))
        index += 1
    for rounds in (1, 2, 3):
        for i in range(4):
            problems.append(
                hard_fixable(
                    f"round{rounds}-{i:03d}", index, 40 + 3 * index, k, fix_after=rounds
                )
            )
            index += 1
    for i in range(2):
        problems.append(hard_unfixable(f"unfixable-{i:03d}", index, 40 + 3 * index, k))
        index += 1
    return MockSuite(problems=tuple(problems), k=k, corrupt_correct_prob=0.0)


def smoke_suite(k: int = 4) -> MockSuite:
    """Tiny suite for quick demos and CI smoke checks."""
    problems = [
        easy_unanimous("easy-000", 0, 41, k),
        hard_fixable("fixable-000", 1, 44, k),
        hard_unfixable("unfixable-000", 2, 47, k),
    ]
    return MockSuite(problems=tuple(problems), k=k, corrupt_correct_prob=0.0)


_BUILDERS = {
    "mixed": mixed_suite,
    "multiround": multiround_suite,
    "smoke": smoke_suite,
}


def builtin_suite(name: str) -> MockSuite:
    if name not in _BUILDERS:
        raise KeyError(f"unknown builtin suite {name!r}; choose from {BUILTIN_SUITES}")
    return _BUILDERS[name]()


def builtin_suite_path(name: str) -> Path:
    """Location of the shipped JSON file for a builtin suite."""
    if name not in _BUILDERS:
        raise KeyError(f"unknown builtin suite {name!r}; choose from {BUILTIN_SUITES}")
    return Path(str(resources.files("coarsefine").joinpath(f"assets/suites/{name}.json")))


def write_builtin_suites(out_dir: Path) -> list[Path]:
    paths = []
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, builder in _BUILDERS.items():
        path = out_dir / f"{name}.json"
        path.write_text(json.dumps(suite_to_dict(builder()), indent=2) + "\n")
        paths.append(path)
    return paths


if __name__ == "__main__":
    target = Path(__file__).resolve().parent.parent / "assets" / "suites"
    for written in write_builtin_suites(target):
        print(f"wrote {written}")
