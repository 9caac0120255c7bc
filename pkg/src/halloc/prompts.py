"""Prompt template registry: load, derive, and render the prompt corpus.

Templates live as UTF-8 text files under ``templates/`` with placeholders
written as literal ``<Name>`` markers. Two families are derived mechanically
rather than stored: the hinted chain-of-thought variants (hint sentence
inserted after the opening sentence, "None" fallback removed) and the
swapped-options answer-correctness probe.
"""

from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass
from importlib import resources

from halloc.errors import TemplateError

_OPENING_SENTENCE = "I will give you a text and a summary."
_NONE_LINE_RE = re.compile(r"\b(?:output|return)\b.*\bNone\b|\bNone\b.*\b(?:output|return)\b")
_OPTIONS_NORMAL = "A: CORRECT\nB: INCORRECT"
_OPTIONS_SWAPPED = "A: INCORRECT\nB: CORRECT"


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    placeholders: frozenset[str]
    system_text: str | None = None
    source: str = ""

    def __post_init__(self) -> None:
        found = set(scan_markers(self.body))
        declared = set(self.placeholders)
        if found != declared:
            raise TemplateError(
                f"{self.template_id}: body markers {sorted(found)} do not match "
                f"declared placeholders {sorted(declared)}"
            )


_MARKER_RE = re.compile(r"<([A-Za-z][A-Za-z ]*)>")


def scan_markers(body: str) -> list[str]:
    """All distinct `<Name>` markers in the body, in first-appearance order."""
    seen: list[str] = []
    for m in _MARKER_RE.finditer(body):
        if m.group(1) not in seen:
            seen.append(m.group(1))
    return seen


def derive_hint_body(base_body: str, hint: str) -> str:
    """Insert the hint sentence after the opening sentence and drop any
    instruction line about returning "None"."""
    if _OPENING_SENTENCE not in base_body:
        raise TemplateError("base template lacks the expected opening sentence")
    body = base_body.replace(_OPENING_SENTENCE, f"{_OPENING_SENTENCE} {hint}", 1)
    lines = [ln for ln in body.split("\n") if not _NONE_LINE_RE.search(ln)]
    return "\n".join(lines)


def derive_swapped_body(base_body: str) -> str:
    if base_body.count(_OPTIONS_NORMAL) != 1:
        raise TemplateError("probe template lacks a unique option block to swap")
    return base_body.replace(_OPTIONS_NORMAL, _OPTIONS_SWAPPED, 1)


def _load_builtin() -> dict[str, PromptTemplate]:
    root = resources.files("halloc") / "templates"
    manifest = json.loads((root / "manifest.json").read_text(encoding="utf-8"))
    registry: dict[str, PromptTemplate] = {}
    deferred: list[tuple[str, dict]] = []
    for template_id, entry in manifest.items():
        if entry.get("file") is None:
            deferred.append((template_id, entry))
            continue
        body = (root / entry["file"]).read_text(encoding="utf-8")
        system_text = None
        if entry.get("system_file"):
            system_text = (root / entry["system_file"]).read_text(encoding="utf-8")
        registry[template_id] = PromptTemplate(
            template_id=template_id,
            body=body,
            placeholders=frozenset(entry["placeholders"]),
            system_text=system_text,
            source=entry.get("source", ""),
        )
    for template_id, entry in deferred:
        base = registry[entry["derived_from"]]
        if "hint" in entry:
            body = derive_hint_body(base.body, entry["hint"])
        else:
            body = derive_swapped_body(base.body)
        system_text = base.system_text
        if entry.get("system_file"):
            system_text = (root / entry["system_file"]).read_text(encoding="utf-8")
        registry[template_id] = PromptTemplate(
            template_id=template_id,
            body=body,
            placeholders=frozenset(entry["placeholders"]),
            system_text=system_text,
            source=entry.get("source", ""),
        )
    return registry


_lock = threading.Lock()
_builtin: dict[str, PromptTemplate] | None = None
_extra: dict[str, PromptTemplate] = {}


def _registry() -> dict[str, PromptTemplate]:
    global _builtin
    with _lock:
        if _builtin is None:
            _builtin = _load_builtin()
        return _builtin


def get_template(template_id: str) -> PromptTemplate:
    registry = _registry()
    if template_id in _extra:
        return _extra[template_id]
    if template_id in registry:
        return registry[template_id]
    raise TemplateError(f"unknown template id: {template_id!r}")


def list_templates() -> list[str]:
    return sorted(set(_registry()) | set(_extra))


def register_template(template: PromptTemplate) -> None:
    """Register a runtime template (e.g. a custom decomposition prompt).

    Ids must not collide with built-in or previously registered templates."""
    builtin = _registry()
    with _lock:
        if template.template_id in _extra or template.template_id in builtin:
            raise TemplateError(
                f"template id {template.template_id!r} is already registered"
            )
        _extra[template.template_id] = template


def render(template_id: str, bindings: dict[str, str]) -> str:
    """Substitute placeholder markers. Bindings must cover the template's
    placeholders exactly; values are inserted verbatim in a single pass."""
    template = get_template(template_id)
    expected = set(template.placeholders)
    provided = set(bindings)
    if provided - expected:
        raise TemplateError(
            f"{template_id}: unexpected bindings {sorted(provided - expected)}"
        )
    if expected - provided:
        raise TemplateError(
            f"{template_id}: missing bindings {sorted(expected - provided)}"
        )
    pattern = re.compile(
        "|".join(re.escape(f"<{name}>") for name in sorted(expected, key=len, reverse=True))
    )
    return pattern.sub(lambda m: bindings[m.group(0)[1:-1]], template.body)
