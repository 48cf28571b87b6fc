"""Experimental surface: dataset loading, the method zoo, metrics, and run
reports.

``run_method`` executes one method over a problem list and reduces the
per-problem records into a :class:`RunReport`.  Problems run concurrently and
independently; the reducer keys on problem id, so reports are deterministic
regardless of scheduling.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .aggregation import best_of_k, self_consistency, weighted_self_consistency
from .backends.client import BackendBundle, metered_bundle
from .core import (
    EASY,
    HARD,
    INITIAL_ORIGIN,
    EngineConfig,
    NormalizedAnswer,
    Problem,
    ReasoningChain,
    RoutingDecision,
    ScoredChain,
)
from .errors import (
    ContractViolation,
    DatasetError,
    EngineError,
    RoutingDegenerate,
    SelectionError,
)
from .extraction import extract_answer, normalize
from .refinement import PromptLibrary, chain_from_text, refine, refine_until_done, review
from .routing import forced_hard_decision, partition_by_answer, route
from .scoring import attach_scores, score_outcome

METHODS = ("cot", "self_refine", "sc", "best_of_k", "sr_plus_sc", "weighted_sc", "magicore")

SCHEMA_VERSION = 1


# --- dataset ingestion ------------------------------------------------------


def load_dataset(path: str | Path, format: str = "jsonl") -> list[Problem]:
    """Read problems from a JSON-lines file.

    Each line is an object with ``id``, ``question``, ``answer`` and an
    optional ``difficulty_label``.  Gold answers pass through the same
    normalization as model answers, so "#### 72", "72" and "$72$" all load
    as the same gold value.
    """
    if format != "jsonl":
        raise ContractViolation(f"unsupported dataset format {format!r}")
    path = Path(path)
    problems: list[Problem] = []
    seen: set[str] = set()
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            if not isinstance(row, dict):
                raise DatasetError(f"{path}:{lineno}: expected a JSON object")
            missing = [k for k in ("id", "question", "answer") if k not in row]
            if missing:
                raise DatasetError(f"{path}:{lineno}: missing fields {missing}")
            pid = str(row["id"])
            if pid in seen:
                raise DatasetError(f"{path}:{lineno}: duplicate id {pid!r}")
            seen.add(pid)
            gold_text = str(row["answer"])
            gold = extract_answer(gold_text, "auto") or normalize(gold_text)
            label = row.get("difficulty_label")
            problems.append(
                Problem(
                    id=pid,
                    question=str(row["question"]),
                    gold_answer=gold,
                    difficulty_label=str(label) if label is not None else None,
                )
            )
    return problems


# --- per-problem records and the run report ---------------------------------


@dataclass(frozen=True)
class ProblemRecord:
    """Everything observed while solving one problem with one method."""

    problem_id: str
    method: str
    predicted: Optional[str]  # canonical answer text
    correct: Optional[bool]  # None when the dataset has no gold answer
    generation_calls: int
    feedback_calls: int
    scoring_calls: int
    iteration_answers: tuple[Optional[str], ...] = ()
    routing: Optional[RoutingDecision] = None
    stop_reason: str = ""
    fallback: bool = False
    error: str = ""

    def answer_at(self, iteration: int) -> Optional[str]:
        """Answer after the given iteration, carrying the last one forward."""
        if not self.iteration_answers:
            return self.predicted
        idx = min(iteration, len(self.iteration_answers) - 1)
        return self.iteration_answers[idx]


@dataclass(frozen=True)
class RunReport:
    method: str
    config: dict
    records: tuple[ProblemRecord, ...]
    accuracy: Optional[float]
    mean_generation_calls: float
    per_iteration_accuracy: tuple[float, ...] = ()


def _is_correct(predicted: Optional[NormalizedAnswer], gold: Optional[NormalizedAnswer]):
    if gold is None:
        return None
    return predicted is not None and predicted == gold


def _canonical(answer: Optional[NormalizedAnswer]) -> Optional[str]:
    return None if answer is None else answer.canonical


# --- method implementations ---------------------------------------------------


def _sample_chains(
    problem: Problem,
    n: int,
    config: EngineConfig,
    backends: BackendBundle,
    library: PromptLibrary,
) -> list[ReasoningChain]:
    prompt = library.render("solver", question=problem.question)
    texts = backends.generator.complete(
        prompt, n, config.temperature, config.seed, role="solver"
    )
    return [
        chain_from_text(text, i, INITIAL_ORIGIN, config.answer_style)
        for i, text in enumerate(texts)
    ]


def _neutral_scores(chains: Sequence[ReasoningChain]) -> list[ScoredChain]:
    """Wrap chains with unit scores for methods that ignore reward models."""
    return [
        ScoredChain(
            chain=c,
            step_scores=(1.0,) * len(c.steps),
            prm_solution_score=1.0,
            orm_solution_score=1.0,
        )
        for c in chains
    ]


def _solve_cot(problem, config, backends, library) -> dict:
    chain = _sample_chains(problem, 1, config, backends, library)[0]
    return {"predicted": chain.answer, "iteration_answers": (chain.answer,)}


def _self_refine_thread(
    problem: Problem,
    chain: ReasoningChain,
    config: EngineConfig,
    backends: BackendBundle,
    library: PromptLibrary,
    next_id: int,
) -> list[Optional[NormalizedAnswer]]:
    """One self-refinement lineage: plain-text feedback, no reward models.

    Returns the answer after each iteration, index 0 being the input chain.
    """
    answers = [chain.answer]
    current = chain
    for iteration in range(1, config.max_iterations + 1):
        feedback = review(
            problem.question,
            current.raw_text,
            backends.generator,
            library,
            config.temperature,
            config.seed,
        )
        current = refine(
            problem.question,
            current.raw_text,
            feedback,
            backends.generator,
            library,
            chain_id=next_id,
            iteration=iteration,
            temperature=config.temperature,
            seed=config.seed,
            answer_style=config.answer_style,
        )
        next_id += 1
        answers.append(current.answer)
    return answers


def _solve_self_refine(problem, config, backends, library) -> dict:
    chain = _sample_chains(problem, 1, config, backends, library)[0]
    answers = _self_refine_thread(problem, chain, config, backends, library, next_id=1)
    return {"predicted": answers[-1], "iteration_answers": tuple(answers)}


def _solve_sc(problem, config, backends, library) -> dict:
    chains = _sample_chains(problem, config.k, config, backends, library)
    try:
        partition = partition_by_answer(_neutral_scores(chains))
        answer = self_consistency(partition)
    except RoutingDegenerate:
        answer = None
    return {"predicted": answer, "iteration_answers": (answer,)}


def _solve_best_of_k(problem, config, backends, library) -> dict:
    chains = _sample_chains(problem, config.k, config, backends, library)
    scored = [
        ScoredChain(
            chain=c,
            step_scores=(1.0,) * len(c.steps),
            prm_solution_score=1.0,
            orm_solution_score=score_outcome(problem.question, c, backends.orm),
        )
        for c in chains
    ]
    try:
        answer = best_of_k(scored)
    except SelectionError:
        answer = None
    return {"predicted": answer, "iteration_answers": (answer,)}


def _solve_sr_plus_sc(problem, config, backends, library) -> dict:
    chains = _sample_chains(problem, config.k, config, backends, library)
    per_iteration: list[list[Optional[NormalizedAnswer]]] = []
    next_id = config.k
    for chain in chains:
        answers = _self_refine_thread(problem, chain, config, backends, library, next_id)
        next_id += config.max_iterations
        per_iteration.append(answers)

    def vote(items: list[Optional[NormalizedAnswer]]) -> Optional[NormalizedAnswer]:
        voted = [
            ReasoningChain(chain_id=i, origin=INITIAL_ORIGIN, steps=("x",), raw_text="x", answer=a)
            for i, a in enumerate(items)
        ]
        try:
            return self_consistency(partition_by_answer(_neutral_scores(voted)))
        except RoutingDegenerate:
            return None

    rounds = len(per_iteration[0])
    iteration_answers = tuple(
        vote([thread[r] for thread in per_iteration]) for r in range(rounds)
    )
    return {"predicted": iteration_answers[-1], "iteration_answers": iteration_answers}


def _score_and_partition(problem, chains, config, backends):
    scored = attach_scores(
        problem.question, chains, backends.orm, backends.prm, config.prm_aggregation
    )
    try:
        partition = partition_by_answer(scored)
        decision = route(partition, config)
    except RoutingDegenerate:
        return scored, None, forced_hard_decision()
    return scored, partition, decision


def _solve_weighted_sc(problem, config, backends, library) -> dict:
    chains = _sample_chains(problem, config.k, config, backends, library)
    scored, partition, decision = _score_and_partition(problem, chains, config, backends)
    answer = (
        weighted_self_consistency(partition, config.weight_mode)
        if partition is not None
        else None
    )
    return {"predicted": answer, "iteration_answers": (answer,), "routing": decision}


def _solve_magicore(problem, config, backends, library) -> dict:
    """The full adaptive pipeline: sample, score, route, then aggregate or
    iterate the multi-agent refinement loop."""
    chains = _sample_chains(problem, config.k, config, backends, library)
    scored, partition, decision = _score_and_partition(problem, chains, config, backends)

    difficulty = decision.difficulty
    if config.routing_override == "always_easy":
        difficulty = EASY
    elif config.routing_override == "always_hard":
        difficulty = HARD

    initial_answer = (
        weighted_self_consistency(partition, config.weight_mode)
        if partition is not None
        else None
    )

    if difficulty == EASY or config.max_iterations == 0:
        answers = (initial_answer,)
        return {
            "predicted": initial_answer,
            "iteration_answers": answers,
            "routing": decision,
            "stop_reason": "" if difficulty == EASY else "max_iterations",
        }

    outcome = refine_until_done(problem.question, scored, decision, config, backends, library)
    iteration_answers: list[Optional[NormalizedAnswer]] = [initial_answer]
    last = initial_answer
    for trace in outcome.traces:
        last = trace.selected_answer if trace.selected_answer is not None else last
        iteration_answers.append(last)
    return {
        "predicted": outcome.final_answer,
        "iteration_answers": tuple(iteration_answers),
        "routing": decision,
        "stop_reason": outcome.stop_reason,
        "fallback": outcome.fallback,
    }


_SOLVERS = {
    "cot": _solve_cot,
    "self_refine": _solve_self_refine,
    "sc": _solve_sc,
    "best_of_k": _solve_best_of_k,
    "sr_plus_sc": _solve_sr_plus_sc,
    "weighted_sc": _solve_weighted_sc,
    "magicore": _solve_magicore,
}


def solve_problem(
    method: str,
    problem: Problem,
    config: EngineConfig,
    backends: BackendBundle,
    library: Optional[PromptLibrary] = None,
) -> ProblemRecord:
    """Run one method on one problem, tallying every backend call."""
    if method not in METHODS:
        raise ContractViolation(f"unknown method {method!r}")
    library = library or PromptLibrary.load(config.prompt_dir)
    metered, meter = metered_bundle(backends)
    try:
        result = _SOLVERS[method](problem, config, metered, library)
        predicted = result.get("predicted")
        return ProblemRecord(
            problem_id=problem.id,
            method=method,
            predicted=_canonical(predicted),
            correct=_is_correct(predicted, problem.gold_answer),
            generation_calls=meter.generation_calls,
            feedback_calls=meter.feedback_calls,
            scoring_calls=meter.scoring_calls,
            iteration_answers=tuple(
                _canonical(a) for a in result.get("iteration_answers", ())
            ),
            routing=result.get("routing"),
            stop_reason=result.get("stop_reason", ""),
            fallback=bool(result.get("fallback", False)),
        )
    except EngineError as exc:
        return ProblemRecord(
            problem_id=problem.id,
            method=method,
            predicted=None,
            correct=False if problem.gold_answer is not None else None,
            generation_calls=meter.generation_calls,
            feedback_calls=meter.feedback_calls,
            scoring_calls=meter.scoring_calls,
            error=f"{type(exc).__name__}: {exc}",
        )


def _config_snapshot(config: EngineConfig) -> dict:
    return {
        "k": config.k,
        "temperature": config.temperature,
        "max_iterations": config.max_iterations,
        "alpha": config.alpha,
        "concurrency_limit": config.concurrency_limit,
        "seed": config.seed,
        "backend": config.backend,
        "prm_aggregation": config.prm_aggregation,
        "weight_mode": config.weight_mode,
        "joint_roles": config.joint_roles,
        "answer_style": config.answer_style,
        "routing_override": config.routing_override,
    }


def run_method(
    method: str,
    problems: Sequence[Problem],
    config: EngineConfig,
    backends: BackendBundle,
) -> RunReport:
    """Run one method over a problem set and reduce to a report.

    Per-problem failures are recorded and the run continues; the run itself
    fails only when every single problem failed.
    """
    if not problems:
        raise ContractViolation("run_method requires at least one problem")
    library = PromptLibrary.load(config.prompt_dir)
    workers = min(config.concurrency_limit, len(problems))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(
                pool.map(
                    lambda p: solve_problem(method, p, config, backends, library), problems
                )
            )
    else:
        records = [solve_problem(method, p, config, backends, library) for p in problems]
    if all(r.error for r in records):
        raise EngineError(f"run_method({method}): every problem failed")
    records.sort(key=lambda r: r.problem_id)

    graded = [r for r in records if r.correct is not None]
    accuracy = sum(1 for r in graded if r.correct) / len(graded) if graded else None
    mean_generation = sum(r.generation_calls for r in records) / len(records)

    per_iteration: tuple[float, ...] = ()
    if graded:
        golds = {p.id: p.gold_answer for p in problems}
        max_rounds = max(len(r.iteration_answers) for r in records)
        accs = []
        for rnd in range(max_rounds):
            hits = 0
            for r in graded:
                ans = r.answer_at(rnd)
                gold = golds[r.problem_id]
                if ans is not None and gold is not None and normalize(ans) == gold:
                    hits += 1
            accs.append(hits / len(graded))
        per_iteration = tuple(accs)

    return RunReport(
        method=method,
        config=_config_snapshot(config),
        records=tuple(records),
        accuracy=accuracy,
        mean_generation_calls=mean_generation,
        per_iteration_accuracy=per_iteration,
    )


# --- routing agreement --------------------------------------------------------


@dataclass(frozen=True)
class AgreementMetrics:
    """Precision/recall/F1 of predicted difficulty, hard being positive."""

    precision: float
    recall: float
    f1: float
    no_positive_predictions: bool = False


def routing_agreement(
    decisions: Sequence[RoutingDecision | str], labels: Sequence[str]
) -> AgreementMetrics:
    """Decisions may be full :class:`RoutingDecision` objects or bare
    difficulty strings (the form run.json stores)."""
    if len(decisions) != len(labels):
        raise ContractViolation("decisions and labels must have equal length")
    predicted = [d if isinstance(d, str) else d.difficulty for d in decisions]
    for value in list(predicted) + list(labels):
        if value not in (EASY, HARD):
            raise ContractViolation(f"difficulty must be easy or hard, got {value!r}")
    tp = sum(1 for d, l in zip(predicted, labels) if d == HARD and l == HARD)
    fp = sum(1 for d, l in zip(predicted, labels) if d == HARD and l == EASY)
    fn = sum(1 for d, l in zip(predicted, labels) if d == EASY and l == HARD)
    no_predicted = (tp + fp) == 0
    precision = 0.0 if no_predicted else tp / (tp + fp)
    recall = 0.0 if (tp + fn) == 0 else tp / (tp + fn)
    f1 = 0.0 if (precision + recall) == 0 else 2 * precision * recall / (precision + recall)
    return AgreementMetrics(
        precision=precision, recall=recall, f1=f1, no_positive_predictions=no_predicted
    )


# --- report emission ------------------------------------------------------------


def _clean_float(x: Optional[float]):
    if x is None:
        return None
    return x if math.isfinite(x) else None


def decision_to_dict(decision: Optional[RoutingDecision]) -> Optional[dict]:
    if decision is None:
        return None
    return {
        "difficulty": decision.difficulty,
        "degenerate": decision.degenerate,
        "cond1": {
            rm: {
                "majority_mean": _clean_float(c.majority_mean),
                "overall_mean": _clean_float(c.overall_mean),
                "normalized": _clean_float(c.normalized),
                "passed": c.passed,
            }
            for rm, c in sorted(decision.cond1.items())
        },
        "cond2": {
            rm: {
                "entropy": _clean_float(c.entropy),
                "confidence": _clean_float(c.confidence),
                "passed": c.passed,
            }
            for rm, c in sorted(decision.cond2.items())
        },
    }


def record_to_dict(record: ProblemRecord) -> dict:
    return {
        "problem_id": record.problem_id,
        "method": record.method,
        "predicted": record.predicted,
        "correct": record.correct,
        "generation_calls": record.generation_calls,
        "feedback_calls": record.feedback_calls,
        "scoring_calls": record.scoring_calls,
        "iteration_answers": list(record.iteration_answers),
        "routing": decision_to_dict(record.routing),
        "stop_reason": record.stop_reason,
        "fallback": record.fallback,
        "error": record.error,
    }


def report_to_dict(report: RunReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "method": report.method,
        "config": report.config,
        "accuracy": report.accuracy,
        "mean_generation_calls": report.mean_generation_calls,
        "per_iteration_accuracy": list(report.per_iteration_accuracy),
        "records": [record_to_dict(r) for r in report.records],
    }


def _summary_lines(reports: Sequence[RunReport]) -> list[str]:
    lines = [
        "# Run summary",
        "",
        "| method | accuracy | mean samples/problem | per-iteration accuracy |",
        "|---|---|---|---|",
    ]
    for rep in reports:
        acc = "n/a" if rep.accuracy is None else f"{rep.accuracy:.3f}"
        iters = (
            " / ".join(f"{a:.3f}" for a in rep.per_iteration_accuracy)
            if rep.per_iteration_accuracy
            else "n/a"
        )
        lines.append(f"| {rep.method} | {acc} | {rep.mean_generation_calls:.1f} | {iters} |")
    header = reports[0].config if reports else {}
    lines += ["", "## Config", ""]
    for key in sorted(header):
        lines.append(f"- {key}: {header[key]}")
    lines.append("")
    return lines


def emit_report(
    report: RunReport | Sequence[RunReport],
    out_dir: str | Path,
    accuracy_vs_k: Optional[Sequence[dict]] = None,
) -> dict[str, Path]:
    """Write run.json and summary.md (and optionally an accuracy-vs-k CSV).

    run.json is schema-versioned and byte-stable: no timestamps, sorted keys,
    records ordered by problem id.
    """
    reports = [report] if isinstance(report, RunReport) else list(report)
    if not reports:
        raise ContractViolation("emit_report requires at least one report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}

    run_payload = {
        "schema_version": SCHEMA_VERSION,
        "runs": [report_to_dict(rep) for rep in reports],
    }
    run_path = out / "run.json"
    run_path.write_text(json.dumps(run_payload, indent=2, sort_keys=True) + "\n")
    paths["run"] = run_path

    summary_path = out / "summary.md"
    summary_path.write_text("\n".join(_summary_lines(reports)))
    paths["summary"] = summary_path

    if accuracy_vs_k is not None:
        csv_path = out / "accuracy_vs_k.csv"
        with csv_path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["method", "k", "accuracy"])
            writer.writeheader()
            for row in accuracy_vs_k:
                writer.writerow(row)
        paths["accuracy_vs_k"] = csv_path
    return paths
