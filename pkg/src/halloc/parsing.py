"""Parsers for the model-output formats produced by the prompt corpus."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from halloc.data import letter_id
from halloc.errors import ParseError

_NONE_RE = re.compile(r"[\W_]*none[\W_]*\Z", re.IGNORECASE)
_ITEM_START_RE = re.compile(r"^\s*\**([A-Z]{1,2})[.)]\**\s*(.*)$")
_FINAL_OUTPUT_RE = re.compile(r"final output\s*:", re.IGNORECASE)
_BULLET_RE = re.compile(r"^\s*[-*•]\s+(.*\S)\s*$")
_FINAL_ANSWER_RE = re.compile(
    r"final answer\s*[:\-]?\s*[*\"'\s]*(yes|no)\b", re.IGNORECASE
)
_YES_NO_RE = re.compile(r"\b(yes|no)\b", re.IGNORECASE)
_LETTER_TOKEN_RE = re.compile(r"(?<![A-Za-z])([AB])(?![A-Za-z])")


@dataclass(frozen=True)
class ParsedDescriptions:
    """Ordered (letter id, description text) items, or an explicit-None marker."""

    items: tuple[tuple[str, str], ...] = ()
    is_none: bool = False

    def __post_init__(self) -> None:
        if self.is_none and self.items:
            raise ParseError("explicit None cannot carry items")

    @property
    def texts(self) -> list[str]:
        return [text for _, text in self.items]


def is_bare_none(text: str) -> bool:
    """True when the text is just "None" up to whitespace/punctuation/markup."""
    return bool(_NONE_RE.fullmatch(text.strip()))


def _letter(index: int) -> str:
    return letter_id(index)


def _collect_lettered_blocks(text: str) -> list[tuple[str, list[str]]]:
    """Split text into lettered item blocks (A., B., ...), enforcing sequential
    letters from A; out-of-sequence letter lines are treated as content."""
    blocks: list[tuple[str, list[str]]] = []
    current: list[str] | None = None
    for line in text.split("\n"):
        m = _ITEM_START_RE.match(line)
        if m and m.group(1) == _letter(len(blocks)):
            current = [m.group(2)] if m.group(2).strip() else []
            blocks.append((m.group(1), current))
        elif current is not None:
            current.append(line)
    return blocks


def _block_description(lines: list[str]) -> str:
    """Description text of a block: what follows its last Description: label,
    or the whole block when no label is present."""
    joined = "\n".join(lines)
    low = joined.lower()
    label = low.rfind("description:")
    if label >= 0:
        joined = joined[label + len("description:"):]
    return " ".join(joined.split())


def parse_description_list(raw: str, layout: str = "lettered") -> ParsedDescriptions:
    """Parse a description list in one of three layouts.

    lettered: `A. ... B. ...` blocks with optional Description: labels.
    final_output_section: lettered parse of the text after the last
        "Final Output:" marker.
    bulleted: one description per `-` line.
    A bare "None" yields is_none=True with no items.
    """
    if layout == "final_output_section":
        matches = list(_FINAL_OUTPUT_RE.finditer(raw))
        if not matches:
            raise ParseError('no "Final Output:" section found')
        raw = raw[matches[-1].end():]
        layout = "lettered"

    if is_bare_none(raw):
        return ParsedDescriptions(is_none=True)

    if layout == "lettered":
        blocks = _collect_lettered_blocks(raw)
        items = []
        for letter, lines in blocks:
            text = _block_description(lines)
            if text:
                items.append((letter, text))
        if not items:
            # Labeled no-error outputs ("Inconsistencies:\nNone") end in a
            # bare None line without any lettered items.
            lines = [ln for ln in raw.split("\n") if ln.strip()]
            if lines and is_bare_none(lines[-1]):
                return ParsedDescriptions(is_none=True)
            raise ParseError("no lettered items found and not a bare None")
        return ParsedDescriptions(items=tuple(items))

    if layout == "bulleted":
        texts = [m.group(1) for line in raw.split("\n") if (m := _BULLET_RE.match(line))]
        if not texts:
            raise ParseError("no bulleted items found and not a bare None")
        return ParsedDescriptions(
            items=tuple((_letter(i), t) for i, t in enumerate(texts))
        )

    raise ParseError(f"unknown layout: {layout!r}")


@dataclass(frozen=True)
class FactCandidate:
    letter: str
    fact: str
    description: str


def parse_fact_description_list(raw: str) -> list[FactCandidate]:
    """Parse lettered Fact:/Description: blocks (high-recall candidate output)."""
    if is_bare_none(raw):
        return []
    blocks = _collect_lettered_blocks(raw)
    if not blocks:
        raise ParseError("no lettered candidate blocks found")
    out = []
    for letter, lines in blocks:
        joined = "\n".join(lines)
        low = joined.lower()
        fact_at = low.find("fact:")
        desc_at = low.rfind("description:")
        if fact_at < 0 or desc_at < 0 or desc_at < fact_at:
            raise ParseError(f"candidate {letter} lacks Fact:/Description: labels")
        fact = " ".join(joined[fact_at + len("fact:"):desc_at].split())
        description = " ".join(joined[desc_at + len("description:"):].split())
        if not fact or not description:
            raise ParseError(f"candidate {letter} has an empty fact or description")
        out.append(FactCandidate(letter=letter, fact=fact, description=description))
    return out


def parse_binary_verdict(raw: str) -> str:
    """Final yes/no verdict of a consistency-classification transcript.
    yes -> consistent, no -> inconsistent."""
    matches = list(_FINAL_ANSWER_RE.finditer(raw))
    if not matches:
        matches = list(_YES_NO_RE.finditer(raw))
    if not matches:
        raise ParseError("no yes/no verdict found")
    verdict = matches[-1].group(1).lower()
    return "consistent" if verdict == "yes" else "inconsistent"


def _balanced_objects(raw: str) -> list[str]:
    """All top-level brace-balanced {...} spans, left to right."""
    spans = []
    depth = 0
    start = -1
    in_string = False
    escape = False
    for i, ch in enumerate(raw):
        if in_string:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}":
            if depth > 0:
                depth -= 1
                if depth == 0:
                    spans.append(raw[start : i + 1])
    return spans


def _pythonic_to_json(candidate: str) -> str:
    """Rewrite bare None/True/False tokens outside string literals."""
    out = []
    in_string = False
    escape = False
    i = 0
    while i < len(candidate):
        ch = candidate[i]
        if in_string:
            out.append(ch)
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_string = False
            i += 1
            continue
        if ch == '"':
            in_string = True
            out.append(ch)
            i += 1
            continue
        replaced = False
        for token, sub in (("None", "null"), ("True", "true"), ("False", "false")):
            if candidate.startswith(token, i):
                before = candidate[i - 1] if i else ""
                after = candidate[i + len(token)] if i + len(token) < len(candidate) else ""
                if not before.isalnum() and before != "_" and not after.isalnum() and after != "_":
                    out.append(sub)
                    i += len(token)
                    replaced = True
                    break
        if not replaced:
            out.append(ch)
            i += 1
    return "".join(out)


def parse_match_json(
    raw: str, predicted_ids: set[str], gold_ids: set[str]
) -> dict[str, str | None]:
    """Extract and validate the judge's JSON mapping (last object in the text).

    Keys must equal predicted_ids exactly; values must be gold ids or null.
    """
    candidates = _balanced_objects(raw)
    if not candidates:
        raise ParseError("no JSON object found in judge output")
    mapping = None
    for candidate in reversed(candidates):
        try:
            parsed = json.loads(_pythonic_to_json(candidate))
        except json.JSONDecodeError:
            continue
        if isinstance(parsed, dict):
            mapping = parsed
            break
    if mapping is None:
        raise ParseError("no parseable JSON object found in judge output")
    keys = set(mapping)
    if keys != set(predicted_ids):
        raise ParseError(
            f"judge keys {sorted(keys)} do not match predicted ids {sorted(predicted_ids)}"
        )
    out: dict[str, str | None] = {}
    for key, value in mapping.items():
        if value is None:
            out[key] = None
        elif isinstance(value, str) and value in gold_ids:
            out[key] = value
        else:
            raise ParseError(f"judge value {value!r} for {key} is not a gold id or null")
    return out


def parse_ptrue_letter(raw: str) -> str:
    """The single A/B verdict letter, tolerating surrounding whitespace/quotes."""
    letters = {m.group(1) for m in _LETTER_TOKEN_RE.finditer(raw)}
    if len(letters) != 1:
        raise ParseError(f"expected exactly one of A/B, found {sorted(letters)}")
    return letters.pop()


def parse_atomic_fact_verdict(raw: str) -> tuple[str, list[str]]:
    """Per-fact consistency verdict plus bullet descriptions when inconsistent."""
    m = _YES_NO_RE.search(raw)
    if not m:
        raise ParseError("no yes/no verdict found in atomic-fact output")
    verdict = m.group(1).lower()
    if verdict == "yes":
        return "yes", []
    bullets = [b.group(1) for line in raw.split("\n") if (b := _BULLET_RE.match(line))]
    if not bullets:
        raise ParseError('verdict "no" without any bulleted inconsistency')
    return "no", bullets
