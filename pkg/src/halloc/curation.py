"""Error enrichment with human review: high-recall candidate generation,
decision bookkeeping, agreement statistics, and dataset export."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from halloc.data import (
    Dataset,
    InconsistencyDescription,
    LabeledExample,
    letter_id,
)
from halloc.errors import CurationError, DataValidationError
from halloc.gateway import LlmGateway, LlmRequest
from halloc.parsing import parse_fact_description_list
from halloc.prompts import render

VERDICTS = ("already_annotated", "new_valid", "invalid", "undecidable")


@dataclass(frozen=True)
class CandidateError:
    candidate_id: str
    example_id: str
    fact: str
    description: str

    def __post_init__(self) -> None:
        if not self.fact.strip() or not self.description.strip():
            raise DataValidationError(
                f"candidate {self.candidate_id}: fact and description must be non-empty"
            )


@dataclass(frozen=True)
class ReviewDecision:
    candidate_id: str
    annotator_id: str
    verdict: str
    note: str | None = None
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if self.verdict not in VERDICTS:
            raise DataValidationError(
                f"verdict must be one of {VERDICTS}, got {self.verdict!r}"
            )


def generate_candidates(
    example: LabeledExample,
    model_id: str,
    gateway: LlmGateway,
    temperature: float = 0.0,
    max_tokens: int = 2048,
    mode: str | None = None,
) -> list[CandidateError]:
    """High-recall candidate generation for one example. Raises ParseError when
    the answer has no recognizable structure; callers flag such examples."""
    prompt = render(
        "curation.high_recall", {"Text": example.document, "Summary": example.summary}
    )
    req = LlmRequest(
        model_id=model_id,
        user_prompt=prompt,
        temperature=temperature,
        max_tokens=max_tokens,
    )
    response = gateway.complete(req, mode=mode)
    parsed = parse_fact_description_list(response.text)
    return [
        CandidateError(
            candidate_id=f"{example.id}:{item.letter}",
            example_id=example.id,
            fact=item.fact,
            description=item.description,
        )
        for item in parsed
    ]


def resolve_decisions(decisions: Iterable[ReviewDecision]) -> dict[str, ReviewDecision]:
    """Last decision per (candidate, annotator) wins; across annotators the
    latest submission is the effective verdict for the candidate."""
    per_pair: dict[tuple[str, str], ReviewDecision] = {}
    order: dict[tuple[str, str], int] = {}
    for i, decision in enumerate(decisions):
        key = (decision.candidate_id, decision.annotator_id)
        per_pair[key] = decision
        order[key] = i
    final: dict[str, ReviewDecision] = {}
    final_order: dict[str, int] = {}
    for key, decision in per_pair.items():
        cid = decision.candidate_id
        if cid not in final or order[key] >= final_order[cid]:
            final[cid] = decision
            final_order[cid] = order[key]
    return final


def _normalize_text(text: str) -> str:
    return " ".join(text.split()).lower()


def apply_decisions(
    candidates: Sequence[CandidateError],
    decisions: Iterable[ReviewDecision],
    dataset: Dataset,
) -> tuple[Dataset, list[str]]:
    """Fold reviewed candidates into the dataset.

    new_valid appends the candidate's description to its example (relabeling a
    consistent example as inconsistent); an undecidable candidate removes the
    whole example; invalid and already_annotated change nothing. Descriptions
    already present (same text up to whitespace/case) are not appended again,
    which keeps the operation idempotent. Returns the enriched dataset and the
    removed example ids.
    """
    by_id = dataset.by_id()
    resolved = resolve_decisions(decisions)
    undecided = [c.candidate_id for c in candidates if c.candidate_id not in resolved]
    if undecided:
        raise CurationError(f"undecided candidates: {undecided}")
    unknown = sorted({c.example_id for c in candidates} - set(by_id))
    if unknown:
        raise DataValidationError(f"candidates reference unknown example ids: {unknown}")

    removed: set[str] = set()
    additions: dict[str, list[str]] = {}
    for candidate in candidates:
        verdict = resolved[candidate.candidate_id].verdict
        if verdict == "undecidable":
            removed.add(candidate.example_id)
        elif verdict == "new_valid":
            additions.setdefault(candidate.example_id, []).append(candidate.description)

    examples: list[LabeledExample] = []
    for example in dataset.examples:
        if example.id in removed:
            continue
        new_texts = additions.get(example.id, [])
        if not new_texts:
            examples.append(example)
            continue
        existing = [d.text for d in example.gold_descriptions]
        seen = {_normalize_text(t) for t in existing}
        merged = list(existing)
        for text in new_texts:
            key = _normalize_text(text)
            if key not in seen:
                merged.append(text)
                seen.add(key)
        descriptions = tuple(
            InconsistencyDescription(id=letter_id(i), text=t) for i, t in enumerate(merged)
        )
        examples.append(
            LabeledExample(
                id=example.id,
                document=example.document,
                summary=example.summary,
                gold_label="inconsistent" if descriptions else example.gold_label,
                gold_descriptions=descriptions,
                split=example.split,
                provenance=example.provenance,
            )
        )
    enriched = Dataset(examples=tuple(examples), name=dataset.name, version=dataset.version)
    return enriched, sorted(removed)


def compute_agreement(
    decisions_a: Sequence[ReviewDecision], decisions_b: Sequence[ReviewDecision]
) -> tuple[float, float]:
    """Raw agreement and Cohen's kappa over shared candidates.

    Verdicts map to a binary judgment (already_annotated/new_valid -> True,
    invalid -> False); candidates either side marked undecidable are excluded
    before mapping.
    """
    a_by_cand = {d.candidate_id: d.verdict for d in decisions_a}
    b_by_cand = {d.candidate_id: d.verdict for d in decisions_b}
    if set(a_by_cand) != set(b_by_cand):
        raise CurationError("annotators decided different candidate sets")
    pairs = [
        (a_by_cand[cid] != "invalid", b_by_cand[cid] != "invalid")
        for cid in a_by_cand
        if a_by_cand[cid] != "undecidable" and b_by_cand[cid] != "undecidable"
    ]
    if not pairs:
        raise CurationError("no comparable candidates after excluding undecidable")
    n = len(pairs)
    p_o = sum(1 for a, b in pairs if a == b) / n
    pa_true = sum(1 for a, _ in pairs if a) / n
    pb_true = sum(1 for _, b in pairs if b) / n
    p_e = pa_true * pb_true + (1 - pa_true) * (1 - pb_true)
    kappa = 1.0 if p_e == 1.0 else (p_o - p_e) / (1 - p_e)
    return p_o, kappa


# -- file formats -------------------------------------------------------


def candidate_to_record(c: CandidateError) -> dict:
    return {
        "candidate_id": c.candidate_id,
        "example_id": c.example_id,
        "fact": c.fact,
        "description": c.description,
    }


def record_to_candidate(record: dict) -> CandidateError:
    try:
        return CandidateError(
            candidate_id=record["candidate_id"],
            example_id=record["example_id"],
            fact=record["fact"],
            description=record["description"],
        )
    except KeyError as exc:
        raise DataValidationError(f"candidate record missing field {exc}") from exc


def decision_to_record(d: ReviewDecision) -> dict:
    return {
        "candidate_id": d.candidate_id,
        "annotator_id": d.annotator_id,
        "verdict": d.verdict,
        "note": d.note,
        "timestamp": d.timestamp,
    }


def record_to_decision(record: dict) -> ReviewDecision:
    try:
        return ReviewDecision(
            candidate_id=record["candidate_id"],
            annotator_id=record["annotator_id"],
            verdict=record["verdict"],
            note=record.get("note"),
            timestamp=record.get("timestamp", 0.0),
        )
    except KeyError as exc:
        raise DataValidationError(f"decision record missing field {exc}") from exc


def load_jsonl(path: str | Path) -> list[dict]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataValidationError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    return records


def save_jsonl(records: Iterable[dict], path: str | Path) -> None:
    Path(path).write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records),
        encoding="utf-8",
    )


def make_decision(
    candidate_id: str, annotator_id: str, verdict: str, note: str | None = None
) -> ReviewDecision:
    return ReviewDecision(
        candidate_id=candidate_id,
        annotator_id=annotator_id,
        verdict=verdict,
        note=note,
        timestamp=time.time(),
    )
