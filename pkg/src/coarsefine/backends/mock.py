"""Deterministic in-process mock of the generation and scoring backends.

The mock world realizes a scripted suite of problems: every solver chain,
review, refinement, and score is a pure function of the request content plus
the caller-supplied seed, so whole engine runs are bit-identical across
repeated runs and independent of thread scheduling.

State lives entirely in the chain text via small inline tags:

* ``(miscalc)`` marks a planted bad step.  The process scorer gives 0.2 to
  that step and every later one, 0.9 elsewhere.
* ``(rev n)`` counts how many refinement passes a still-wrong chain has
  absorbed.  The outcome scorer adds a small deterministic bonus per pass so
  partial progress survives top-k retention; base chains score exactly 0.9
  (gold answer) or 0.1 (anything else).
* ``(polished)`` marks a confidently-wrong chain produced when the refiner
  corrupts an already-correct solution.  Such chains fool the outcome scorer
  (0.95) and show no bad steps, which is what makes uniform refinement
  over-correct.

The refiner fixes a chain only when the suite marks it fixable, the feedback
actually names every planted bad step, and the chain has absorbed enough
passes (``fix_after``).  Feedback produced without step scores (for example
by the self-refine baseline) never names steps, so it never unlocks a fix.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from ..core import Problem
from ..errors import ConfigError, ContractViolation, ProtocolError
from ..extraction import extract_answer, normalize
from ..scoring import OUTCOME, PROCESS, ScorerHandle
from .client import BackendBundle, GenerationBackend, RequestLog, RequestRecord, ROLES

ERROR_TAG = "(miscalc)"
GLOSS_TAG = "(polished)"
_REV_TAG = re.compile(r"\(rev (\d+)\)")
_SCORE_SUFFIX = re.compile(r"\s*\(Score:\s*\d+/10\)\s*$")
_FEEDBACK_STEP = re.compile(r"Step (\d+)\b")
_LOW_SCORE_LINE = re.compile(r"\(Score:\s*(\d+)/10\)")

LOW_STEP_SCORE = 0.2
HIGH_STEP_SCORE = 0.9
GOLD_OUTCOME = 0.9
WRONG_OUTCOME = 0.1
GLOSS_OUTCOME = 0.95
REV_BONUS = 0.005


@dataclass(frozen=True)
class ChainPlan:
    """Blueprint for one solver chain: its final answer and which steps are
    planted as bad."""

    answer: str
    error_steps: tuple[int, ...] = ()
    n_steps: int = 3


@dataclass(frozen=True)
class MockProblem:
    id: str
    question: str
    gold: str
    chains: tuple[ChainPlan, ...]
    fixable: bool = True
    fix_after: int = 1
    corrupt_answer: str = ""


@dataclass(frozen=True)
class MockSuite:
    """A scripted world: problems plus the per-suite refiner corruption rate."""

    problems: tuple[MockProblem, ...]
    k: int
    corrupt_correct_prob: float = 0.0

    def problem_list(self) -> list[Problem]:
        """The suite's problems in harness form, gold answers normalized."""
        return [
            Problem(id=p.id, question=p.question, gold_answer=normalize(p.gold))
            for p in self.problems
        ]


def _validate_suite(suite: MockSuite) -> None:
    if suite.k < 1:
        raise ConfigError("k", "must be >= 1")
    if not 0.0 <= suite.corrupt_correct_prob <= 1.0:
        raise ConfigError("corrupt_correct_prob", "must be within [0, 1]")
    if not suite.problems:
        raise ConfigError("problems", "must be non-empty")
    ids = set()
    questions = set()
    for i, prob in enumerate(suite.problems):
        where = f"problems[{i}]"
        if not prob.id:
            raise ConfigError(f"{where}.id", "must be non-empty")
        if prob.id in ids:
            raise ConfigError(f"{where}.id", f"duplicate id {prob.id!r}")
        ids.add(prob.id)
        if not prob.question:
            raise ConfigError(f"{where}.question", "must be non-empty")
        if prob.question in questions:
            raise ConfigError(f"{where}.question", "duplicate question text")
        questions.add(prob.question)
        if not prob.gold:
            raise ConfigError(f"{where}.gold", "must be non-empty")
        if prob.fix_after < 1:
            raise ConfigError(f"{where}.fix_after", "must be >= 1")
        if not prob.chains:
            raise ConfigError(f"{where}.chains", "must be non-empty")
        for j, plan in enumerate(prob.chains):
            pwhere = f"{where}.chains[{j}]"
            if not plan.answer:
                raise ConfigError(f"{pwhere}.answer", "must be non-empty")
            if plan.n_steps < 1:
                raise ConfigError(f"{pwhere}.n_steps", "must be >= 1")
            for step in plan.error_steps:
                if not 1 <= step <= plan.n_steps:
                    raise ConfigError(
                        f"{pwhere}.error_steps", f"step {step} outside 1..{plan.n_steps}"
                    )


def load_suite(path: str | Path) -> MockSuite:
    """Parse a suite file; validation errors name the offending field."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"not valid JSON: {exc}") from exc
    return suite_from_dict(raw)


def suite_from_dict(raw: dict) -> MockSuite:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "suite must be a JSON object")
    try:
        problems = []
        for i, p in enumerate(raw.get("problems", [])):
            chains = tuple(
                ChainPlan(
                    answer=str(c["answer"]),
                    error_steps=tuple(int(s) for s in c.get("error_steps", [])),
                    n_steps=int(c.get("n_steps", 3)),
                )
                for c in p.get("chains", [])
            )
            problems.append(
                MockProblem(
                    id=str(p.get("id", "")),
                    question=str(p.get("question", "")),
                    gold=str(p.get("gold", "")),
                    chains=chains,
                    fixable=bool(p.get("fixable", True)),
                    fix_after=int(p.get("fix_after", 1)),
                    corrupt_answer=str(p.get("corrupt_answer", "")),
                )
            )
        suite = MockSuite(
            problems=tuple(problems),
            k=int(raw.get("k", 0)),
            corrupt_correct_prob=float(raw.get("corrupt_correct_prob", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("problems", f"malformed suite entry: {exc}") from exc
    _validate_suite(suite)
    return suite


def suite_to_dict(suite: MockSuite) -> dict:
    return {
        "k": suite.k,
        "corrupt_correct_prob": suite.corrupt_correct_prob,
        "problems": [
            {
                "id": p.id,
                "question": p.question,
                "gold": p.gold,
                "fixable": p.fixable,
                "fix_after": p.fix_after,
                "corrupt_answer": p.corrupt_answer,
                "chains": [
                    {
                        "answer": c.answer,
                        "error_steps": list(c.error_steps),
                        "n_steps": c.n_steps,
                    }
                    for c in p.chains
                ],
            }
            for p in suite.problems
        ],
    }


# --- synthetic chain text -------------------------------------------------

_STEP_FILLERS = (
    "Read the question and write down the given quantities",
    "Combine the quantities into the intermediate result",
    "Use the intermediate result to finish the computation",
    "Double-check the arithmetic for the final expression",
    "Simplify the expression one more time",
)


def build_chain_text(
    plan_answer: str,
    error_steps: Sequence[int] = (),
    n_steps: int = 3,
    sample_index: int = 0,
    rev: int = 0,
    gloss: bool = False,
) -> str:
    """Render one synthetic chain.  The final step carries the answer in the
    "#### answer" convention on the same line, so the chain splits into
    exactly ``n_steps`` steps."""
    lines = []
    for i in range(1, n_steps + 1):
        filler = _STEP_FILLERS[(i - 1) % len(_STEP_FILLERS)]
        text = f"Step {i}: {filler} (sample {sample_index})."
        if i in error_steps:
            text += f" {ERROR_TAG}"
        if gloss and i == n_steps:
            text += f" {GLOSS_TAG}"
        if rev > 0 and i == 1:
            text += f" (rev {rev})"
        if i == n_steps:
            text += f" The answer is {plan_answer}. #### {plan_answer}"
        lines.append(text)
    return "\n".join(lines)


def _revision_count(text: str) -> int:
    m = _REV_TAG.search(text)
    return int(m.group(1)) if m else 0


def _strip_scores(text: str) -> str:
    return "\n".join(_SCORE_SUFFIX.sub("", line) for line in text.splitlines())


def _bump_revision(text: str) -> str:
    rev = _revision_count(text)
    if rev:
        return _REV_TAG.sub(f"(rev {rev + 1})", text, count=1)
    lines = text.splitlines()
    lines[0] = f"{lines[0]} (rev 1)"
    return "\n".join(lines)


def _unit_hash(seed: int, text: str) -> float:
    """Deterministic uniform draw in [0, 1) from (seed, text)."""
    digest = hashlib.sha256(f"{seed}|{text}".encode()).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


# --- prompt parsing -------------------------------------------------------


def _live_block(prompt: str) -> str:
    """The request section of a prompt: everything after the last
    "Question:" marker.  The shipped templates put the 1-shot exemplar
    before it, so the last marker always starts the live request."""
    idx = prompt.rfind("Question:")
    if idx < 0:
        raise ProtocolError("mock backend cannot find a Question: marker", payload=prompt)
    return prompt[idx + len("Question:"):]


def _section(block: str, start: Optional[str], end: Optional[str]) -> str:
    lo = 0
    if start is not None:
        i = block.find(start)
        if i < 0:
            return ""
        lo = i + len(start)
    hi = len(block)
    if end is not None:
        j = block.find(end, lo)
        if j >= 0:
            hi = j
    return block[lo:hi].strip()


class MockWorld:
    """Shared scripted state: the suite, a question index, and the request
    log used by accounting tests."""

    def __init__(self, suite: MockSuite):
        _validate_suite(suite)
        self.suite = suite
        self.by_question = {p.question: p for p in suite.problems}
        self.request_log = RequestLog()

    def problem_for(self, question: str) -> MockProblem:
        prob = self.by_question.get(question.strip())
        if prob is None:
            raise ProtocolError(f"mock world does not know question {question!r}")
        return prob

    # -- role behaviors ----------------------------------------------------

    def solve(self, prob: MockProblem, n: int) -> list[str]:
        plans = prob.chains
        return [
            build_chain_text(
                plans[j % len(plans)].answer,
                error_steps=plans[j % len(plans)].error_steps,
                n_steps=plans[j % len(plans)].n_steps,
                sample_index=j,
            )
            for j in range(n)
        ]

    def review(self, annotated: str) -> str:
        lines = annotated.splitlines()
        complaints = []
        for i, line in enumerate(lines, start=1):
            m = _LOW_SCORE_LINE.search(line)
            if m and int(m.group(1)) <= 3:
                complaints.append(
                    f"Step {i}: the score of {m.group(1)}/10 points to a mistake in this step; "
                    "redo this part of the calculation."
                )
        if not complaints:
            return "All steps look solid; no changes needed."
        return "\n".join(complaints)

    def refine(self, prob: MockProblem, chain_text: str, feedback: str, seed: int, prompt: str) -> str:
        clean = _strip_scores(chain_text)
        answer = extract_answer(clean, "auto")
        gold = normalize(prob.gold)
        rev = _revision_count(clean)

        error_idx = [
            i for i, line in enumerate(clean.splitlines(), start=1) if ERROR_TAG in line
        ]
        if error_idx:
            named = {int(s) for s in _FEEDBACK_STEP.findall(feedback)}
            targeted = all(i in named for i in error_idx)
            if prob.fixable and targeted and rev + 1 >= prob.fix_after:
                return build_chain_text(prob.gold, n_steps=len(clean.splitlines()))
            return _bump_revision(clean)

        if (
            answer is not None
            and answer == gold
            and GLOSS_TAG not in clean
            and self.suite.corrupt_correct_prob > 0.0
            and _unit_hash(seed, prompt) < self.suite.corrupt_correct_prob
        ):
            corrupt = prob.corrupt_answer or f"{prob.gold}0"
            return build_chain_text(corrupt, n_steps=len(clean.splitlines()), gloss=True)
        return clean

    # -- scoring -----------------------------------------------------------

    def outcome_score(self, prob: MockProblem, text: str) -> float:
        if GLOSS_TAG in text:
            return GLOSS_OUTCOME
        answer = extract_answer(text, "auto")
        if answer is not None and answer == normalize(prob.gold):
            return GOLD_OUTCOME
        return WRONG_OUTCOME + REV_BONUS * min(_revision_count(text), 10)

    def process_scores(self, steps: Sequence[str]) -> list[float]:
        scores = []
        seen_error = False
        for step in steps:
            if ERROR_TAG in step:
                seen_error = True
            scores.append(LOW_STEP_SCORE if seen_error else HIGH_STEP_SCORE)
        return scores


class MockGenerator(GenerationBackend):
    """Completion backend scripted by a :class:`MockWorld`.

    Output is a pure function of (prompt, n, seed, role); the reviewer and
    refiner behaviors additionally assume the shipped prompt templates (the
    live request must follow the last "Question:" marker).
    """

    def __init__(self, world: MockWorld):
        self.world = world

    def complete(
        self,
        prompt: str,
        n: int,
        temperature: float,
        seed: int,
        role: str = "solver",
    ) -> list[str]:
        if n < 1:
            raise ContractViolation("n must be >= 1")
        if role not in ROLES:
            raise ContractViolation(f"unknown role {role!r}")
        block = _live_block(prompt)
        question = _section(block, None, "\nSolution:")
        prob = self.world.problem_for(question)
        self.world.request_log.add(RequestRecord("generate", role, prob.id, n))

        if role == "solver":
            return self.world.solve(prob, n)

        annotated = _section(block, "Solution:", "\nFeedback:")
        if role == "reviewer":
            return [self.world.review(annotated)] * n
        feedback = _section(block, "Feedback:", "\nRevised solution:")
        if role == "refiner":
            return [self.world.refine(prob, annotated, feedback, seed, prompt)] * n
        # joint role: feedback and revision in one completion
        review = self.world.review(annotated)
        refined = self.world.refine(prob, annotated, review, seed, prompt)
        return [f"{review}\nRevised solution:\n{refined}"] * n


class MockScorerHandle(ScorerHandle):
    """Scorer backed by the mock world; payload shapes mirror the wire
    protocol exactly."""

    def __init__(self, kind: str, world: MockWorld):
        super().__init__(kind)
        self.world = world

    def request(self, question: str, steps: Sequence[str]) -> dict:
        prob = self.world.problem_for(question)
        self.world.request_log.add(RequestRecord("score", self.kind, prob.id, 1))
        if self.kind == OUTCOME:
            return {"score": self.world.outcome_score(prob, "\n".join(steps))}
        return {"step_scores": self.world.process_scores(steps)}


def mock_world(suite: MockSuite) -> BackendBundle:
    """Build the full backend bundle for a scripted suite."""
    world = MockWorld(suite)
    return BackendBundle(
        generator=MockGenerator(world),
        orm=MockScorerHandle(OUTCOME, world),
        prm=MockScorerHandle(PROCESS, world),
        request_log=world.request_log,
    )
