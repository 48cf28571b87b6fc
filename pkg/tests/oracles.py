"""Independent reference implementations used to freeze expected values.

These deliberately avoid the package's own code paths: the splitter walks
lines by hand, the fraction normalizer uses its own tiny parser, and the
selectors recompute weights with plain dictionaries.  Keeping them naive is
the point; they are the oracles the fast implementations are checked against.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Optional

_STEP_LINE = re.compile(r"^[ \t]*step\s*\d+\s*:", re.IGNORECASE)


def reference_split(raw: str) -> list[str]:
    """Line-walking splitter: start a new segment at every "Step N:" line.
    Without marker lines, split on blank lines; else one block."""
    lines = raw.split("\n")
    has_marker = any(_STEP_LINE.match(line) for line in lines)
    segments: list[list[str]] = []
    if has_marker:
        current: Optional[list[str]] = None
        for line in lines:
            if _STEP_LINE.match(line):
                if current is not None:
                    segments.append(current)
                current = [line]
            elif current is not None:
                current.append(line)
            # text before the first marker is preamble, not a step
        if current is not None:
            segments.append(current)
    else:
        current = []
        for line in lines:
            if line.strip():
                current.append(line)
            elif current:
                segments.append(current)
                current = []
        if current:
            segments.append(current)
    steps = ["\n".join(seg).strip() for seg in segments]
    steps = [s for s in steps if s]
    return steps if steps else [raw]


_FRACTION = re.compile(r"\\[dt]?frac\{(-?\d+)\}\{(-?\d+)\}")


def reference_fraction(candidate: str) -> Optional[Fraction]:
    """Tiny LaTeX/plain fraction reader for the normalization fixtures."""
    s = candidate.strip().strip("$").strip()
    if "=" in s:
        s = s.rsplit("=", 1)[1].strip()
    m = _FRACTION.fullmatch(s)
    if m:
        return Fraction(int(m.group(1)), int(m.group(2)))
    m = re.fullmatch(r"(-?\d+)\s*/\s*(-?\d+)", s)
    if m and int(m.group(2)) != 0:
        return Fraction(int(m.group(1)), int(m.group(2)))
    s2 = s.replace(",", "")
    if re.fullmatch(r"-?\d+", s2):
        return Fraction(int(s2))
    if re.fullmatch(r"-?\d+\.\d+", s2):
        return Fraction(s2)
    return None


def reference_weighted_choice(
    entries: list[tuple[int, str, float]]
) -> str:
    """Brute-force weighted vote: entries are (chain_id, answer_key, weight).
    Returns the winning answer key; ties by smallest chain id in the group."""
    weights: dict[str, float] = {}
    first_id: dict[str, int] = {}
    for chain_id, key, weight in entries:
        weights[key] = weights.get(key, 0.0) + weight
        first_id[key] = min(first_id.get(key, chain_id), chain_id)
    return min(weights, key=lambda key: (-weights[key], first_id[key]))


def reference_retention(
    entries: list[tuple[int, float, bool]], k: int
) -> list[int]:
    """Sort-and-slice retention oracle: entries are (chain_id, orm, is_initial).
    Returns the retained chain ids in rank order."""
    ranked = sorted(entries, key=lambda e: (-e[1], e[0], not e[2]))
    return [chain_id for chain_id, _, _ in ranked[: min(k, len(ranked))]]
