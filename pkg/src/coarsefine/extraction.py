"""Parsing of raw model completions: step splitting and final-answer
extraction/normalization.

Normalization is deliberately minimal (LaTeX fractions, digit-group commas,
equation left-hand sides, whitespace, trailing periods).  Anything needing
symbolic simplification is out of scope; equality stays decidable and
auditable.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Optional

from .core import NormalizedAnswer
from .errors import ContractViolation

STEP_MARKER = re.compile(r"^[ \t]*step\s*\d+\s*:", re.IGNORECASE | re.MULTILINE)
_PARAGRAPH_BREAK = re.compile(r"\n[ \t]*\n+")
_NUMBER_TOKEN = re.compile(r"-?\d[\d,]*(?:\.\d+)?")
_DIGIT_COMMA = re.compile(r"(?<=\d),(?=\d)")
_FRAC = re.compile(r"\\[dt]?frac\s*\{([^{}]*)\}\s*\{([^{}]*)\}")
_INT = re.compile(r"^-?\d+$")
_DECIMAL = re.compile(r"^-?(?:\d+\.\d*|\.\d+)$")
_RATIO = re.compile(r"^(-?\d+)\s*/\s*(-?\d+)$")

ANSWER_STYLES = ("auto", "boxed", "gsm8k_hash", "last_number")


def step_spans(raw: str) -> list[tuple[int, int]]:
    """Character spans of the step segments of ``raw``.

    Spans are non-overlapping and ascending.  When "Step N:" markers exist,
    each span starts at a marker and runs to the next marker (text before the
    first marker is preamble, not a step).  Without markers the text is split
    at blank lines; a single block yields one span covering everything.
    """
    matches = list(STEP_MARKER.finditer(raw))
    if matches:
        spans = []
        for i, m in enumerate(matches):
            end = matches[i + 1].start() if i + 1 < len(matches) else len(raw)
            spans.append((m.start(), end))
        return spans

    spans = []
    cursor = 0
    for gap in _PARAGRAPH_BREAK.finditer(raw):
        if raw[cursor: gap.start()].strip():
            spans.append((cursor, gap.start()))
        cursor = gap.end()
    if raw[cursor:].strip():
        spans.append((cursor, len(raw)))
    if not spans:
        spans = [(0, len(raw))]
    return spans


def split_steps(raw: str) -> list[str]:
    """Split a completion into ordered step texts.

    Total: degenerate input comes back as a single step.  The underlying
    spans (see :func:`step_spans`) tile the marked region of ``raw``, so no
    step content is ever dropped.
    """
    if not raw:
        raise ContractViolation("split_steps requires non-empty text")
    steps = [raw[a:b].strip() for a, b in step_spans(raw)]
    steps = [s for s in steps if s]
    return steps if steps else [raw]


def normalize(candidate: str) -> NormalizedAnswer:
    """Canonicalize an answer candidate.

    Idempotent: feeding the canonical form back in reproduces the same
    result.  The numeric value is an exact rational when the canonical text
    is an integer, a decimal, or an integer ratio.
    """
    if not candidate:
        raise ContractViolation("normalize requires non-empty text")
    s = candidate.strip()
    s = s.replace("$", "")
    s = s.replace("\\left", "").replace("\\right", "").replace("\\!", "")
    if "=" in s:
        s = s.rsplit("=", 1)[1]
    s = _FRAC.sub(lambda m: f"{m.group(1)}/{m.group(2)}", s)
    s = s.replace("{", "").replace("}", "")
    s = _DIGIT_COMMA.sub("", s)
    s = " ".join(s.split())
    s = s.rstrip(".").strip()
    return NormalizedAnswer(canonical=s, numeric_value=_parse_rational(s))


def _parse_rational(s: str) -> Optional[Fraction]:
    if _INT.match(s):
        return Fraction(int(s))
    if _DECIMAL.match(s):
        return Fraction(s)
    m = _RATIO.match(s)
    if m and int(m.group(2)) != 0:
        return Fraction(int(m.group(1)), int(m.group(2)))
    return None


def _candidate_boxed(raw: str) -> Optional[str]:
    start = raw.rfind("\\boxed{")
    if start < 0:
        return None
    i = start + len("\\boxed{")
    depth = 1
    out = []
    while i < len(raw) and depth > 0:
        ch = raw[i]
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                break
        out.append(ch)
        i += 1
    content = "".join(out).strip()
    # unwrap nested \boxed{\boxed{x}}
    while content.startswith("\\boxed{") and content.endswith("}"):
        content = content[len("\\boxed{"):-1].strip()
    return content or None


def _candidate_hash(raw: str) -> Optional[str]:
    if "####" not in raw:
        return None
    tail = raw.rsplit("####", 1)[1].strip()
    if not tail:
        return None
    return tail.splitlines()[0].strip() or None


def _candidate_last_number(raw: str) -> Optional[str]:
    tokens = _NUMBER_TOKEN.findall(raw)
    return tokens[-1] if tokens else None


def extract_answer(raw: str, style: str = "auto") -> Optional[NormalizedAnswer]:
    """Pull the final answer out of a completion and normalize it.

    ``auto`` tries \\boxed{...} first, then the "#### answer" convention,
    then the last numeric token.  Returns None when no candidate exists;
    such chains still get scored and refined, they just cannot vote.
    """
    if style not in ANSWER_STYLES:
        raise ContractViolation(f"unknown answer style {style!r}")
    if not raw:
        return None
    if style == "boxed":
        candidate = _candidate_boxed(raw)
    elif style == "gsm8k_hash":
        candidate = _candidate_hash(raw)
    elif style == "last_number":
        candidate = _candidate_last_number(raw)
    else:
        candidate = _candidate_boxed(raw) or _candidate_hash(raw) or _candidate_last_number(raw)
    if candidate is None:
        return None
    answer = normalize(candidate)
    return answer if answer.canonical else None
