"""LLM-as-judge matching: align predicted error descriptions with gold ones."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from halloc.data import Dataset, InconsistencyDescription
from halloc.errors import DataValidationError, JudgeMatchError, ParseError
from halloc.gateway import LlmGateway, LlmRequest, cache_key
from halloc.metrics import ExampleMetrics, MetricsReport, aggregate, score_example
from halloc.parsing import parse_match_json
from halloc.prompts import render

RETRY_SUFFIX = "\n\nReturn only the JSON object."


@dataclass(frozen=True)
class MatchAssignment:
    example_id: str
    assignment: dict[str, str | None] = field(hash=False)
    judge_model_id: str = ""
    transcript_ref: str | None = None


def format_description_block(descriptions: Sequence[InconsistencyDescription]) -> str:
    """Lettered block as presented to the judge: one `A. text` line per item."""
    return "\n".join(f"{d.id}. {d.text}" for d in descriptions)


def judge_match(
    summary: str,
    predicted: Sequence[InconsistencyDescription],
    gold: Sequence[InconsistencyDescription],
    judge_model_id: str,
    gateway: LlmGateway | None = None,
    example_id: str = "",
    temperature: float = 0.0,
    max_tokens: int = 2048,
    mode: str | None = None,
) -> MatchAssignment:
    """Run the matching protocol for one example.

    Empty predictions short-circuit to an empty assignment; an empty gold list
    maps every prediction to none. Both skip the model call entirely. A
    malformed judge response is retried once with an explicit JSON reminder;
    a second failure raises JudgeMatchError.
    """
    if not predicted:
        return MatchAssignment(
            example_id=example_id, assignment={}, judge_model_id=judge_model_id
        )
    if not gold:
        return MatchAssignment(
            example_id=example_id,
            assignment={p.id: None for p in predicted},
            judge_model_id=judge_model_id,
        )
    if gateway is None:
        raise JudgeMatchError("a gateway is required when both lists are non-empty")
    prompt = render(
        "judge.match",
        {
            "Summary": summary,
            "Gold Label": format_description_block(gold),
            "Predicted Output": format_description_block(predicted),
        },
    )
    predicted_ids = {p.id for p in predicted}
    gold_ids = {g.id for g in gold}
    last_error: ParseError | None = None
    for attempt_prompt in (prompt, prompt + RETRY_SUFFIX):
        req = LlmRequest(
            model_id=judge_model_id,
            user_prompt=attempt_prompt,
            temperature=temperature,
            max_tokens=max_tokens,
        )
        response = gateway.complete(req, mode=mode)
        try:
            mapping = parse_match_json(response.text, predicted_ids, gold_ids)
        except ParseError as exc:
            last_error = exc
            continue
        return MatchAssignment(
            example_id=example_id,
            assignment=mapping,
            judge_model_id=judge_model_id,
            transcript_ref=cache_key(req),
        )
    raise JudgeMatchError(
        f"example {example_id or '?'}: judge output unparseable after retry: {last_error}"
    )


def judge_results(
    dataset: Dataset,
    results: Iterable,
    judge_model_id: str,
    gateway: LlmGateway | None,
    mode: str | None = None,
) -> tuple[list[MatchAssignment], list[str]]:
    """Judge a batch of DetectionResults. Returns (assignments, flagged ids);
    flagged examples had unrecoverable judge failures and carry no assignment."""
    by_id = dataset.by_id()
    assignments: list[MatchAssignment] = []
    flagged: list[str] = []
    for result in results:
        example = by_id.get(result.example_id)
        if example is None:
            raise DataValidationError(f"prediction for unknown example {result.example_id!r}")
        try:
            assignments.append(
                judge_match(
                    summary=example.summary,
                    predicted=result.predictions,
                    gold=example.gold_descriptions,
                    judge_model_id=judge_model_id,
                    gateway=gateway,
                    example_id=example.id,
                    mode=mode,
                )
            )
        except JudgeMatchError:
            flagged.append(example.id)
    return assignments, flagged


def score_run(
    dataset: Dataset,
    results: Iterable,
    assignments: Iterable[MatchAssignment],
    aggregation: str = "micro",
    flagged: Sequence[str] = (),
) -> MetricsReport:
    """Score judged assignments against gold counts. Judge-flagged examples are
    excluded (and listed in flags); detector parse failures arrive here as
    zero-prediction results and are scored normally."""
    by_id = dataset.by_id()
    n_pred_by_id = {r.example_id: len(r.predictions) for r in results}
    per_example: list[ExampleMetrics] = []
    for assignment in assignments:
        example = by_id.get(assignment.example_id)
        if example is None:
            raise DataValidationError(
                f"assignment for unknown example {assignment.example_id!r}"
            )
        if assignment.example_id not in n_pred_by_id:
            raise DataValidationError(
                f"assignment without matching prediction: {assignment.example_id!r}"
            )
        per_example.append(
            score_example(
                assignment,
                n_gold=len(example.gold_descriptions),
                n_pred=n_pred_by_id[assignment.example_id],
            )
        )
    return aggregate(per_example, mode=aggregation, flags=tuple(flagged))


def validate_judge(
    judge_assignments: Sequence[MatchAssignment],
    human_assignments: Sequence[MatchAssignment],
) -> tuple[float, float]:
    """Agreement of judge matches with human matches over the same examples.

    Each non-none (example, predicted, gold) pair is one claim; precision is
    the fraction of judge claims the humans also made, recall the fraction of
    human claims the judge recovered.
    """
    judge_examples = {a.example_id for a in judge_assignments}
    human_examples = {a.example_id for a in human_assignments}
    if judge_examples != human_examples:
        raise DataValidationError(
            "judge and human assignments cover different example sets"
        )

    def pairs(assignments: Sequence[MatchAssignment]) -> set[tuple[str, str, str]]:
        return {
            (a.example_id, pred, gold)
            for a in assignments
            for pred, gold in a.assignment.items()
            if gold is not None
        }

    judge_pairs = pairs(judge_assignments)
    human_pairs = pairs(human_assignments)
    both = judge_pairs & human_pairs
    precision = len(both) / len(judge_pairs) if judge_pairs else 1.0
    recall = len(both) / len(human_pairs) if human_pairs else 1.0
    return precision, recall


def assignment_to_record(assignment: MatchAssignment) -> dict:
    return {
        "example_id": assignment.example_id,
        "assignment": dict(assignment.assignment),
        "judge_model_id": assignment.judge_model_id,
        "transcript_ref": assignment.transcript_ref,
    }


def record_to_assignment(record: dict) -> MatchAssignment:
    try:
        return MatchAssignment(
            example_id=record["example_id"],
            assignment={
                k: (v if v is None else str(v)) for k, v in record["assignment"].items()
            },
            judge_model_id=record.get("judge_model_id", ""),
            transcript_ref=record.get("transcript_ref"),
        )
    except (KeyError, AttributeError, TypeError) as exc:
        raise DataValidationError(f"malformed assignment record: {exc}") from exc


def serialize_assignments(assignments: Iterable[MatchAssignment]) -> str:
    return "".join(
        json.dumps(assignment_to_record(a), ensure_ascii=False) + "\n"
        for a in assignments
    )
