"""Detection architectures: end-to-end, decompose-verify-merge pipeline, and
two-step classifier gating, plus binarization and configuration selection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from halloc.data import (
    InconsistencyDescription,
    LabeledExample,
    letter_id,
)
from halloc.errors import DataValidationError, ParseError
from halloc.gateway import LlmGateway, LlmRequest, cache_key
from halloc.metrics import MetricsReport, f1_score
from halloc.parsing import (
    parse_atomic_fact_verdict,
    parse_binary_verdict,
    parse_description_list,
)
from halloc.prompts import render

E2E_STYLES = ("zero_shot", "few_shot", "cot", "cot_hint")
CLASSIFIER_SOURCES = ("self_cot", "external_score", "oracle")


@dataclass(frozen=True)
class DetectionResult:
    example_id: str
    strategy_id: str
    predictions: tuple[InconsistencyDescription, ...]
    transcript_refs: tuple[str, ...] = ()
    flags: tuple[str, ...] = ()

    @property
    def derived_binary(self) -> str:
        return "inconsistent" if self.predictions else "consistent"


@dataclass(frozen=True)
class ClassifierVerdict:
    example_id: str
    source: str
    label: str
    score: float | None = None
    transcript_ref: str | None = None
    flagged: bool = False

    def __post_init__(self) -> None:
        if self.source not in CLASSIFIER_SOURCES:
            raise DataValidationError(f"unknown classifier source {self.source!r}")
        if self.source == "external_score" and self.score is None:
            raise DataValidationError("external_score verdicts require a score")


def _letter_predictions(texts: Sequence[str]) -> tuple[InconsistencyDescription, ...]:
    return tuple(
        InconsistencyDescription(id=letter_id(i), text=t) for i, t in enumerate(texts)
    )


def detect_e2e(
    example: LabeledExample,
    style: str,
    model_id: str,
    gateway: LlmGateway,
    variant: str = "v1",
    temperature: float = 0.0,
    max_tokens: int = 2048,
    mode: str | None = None,
    strategy_id: str | None = None,
) -> DetectionResult:
    """Single-call detection. zero/few-shot answers are lettered lists; the
    chain-of-thought styles append a Final Output: section. A transcript that
    fails to parse records zero predictions and a parse_failure flag."""
    if style not in E2E_STYLES:
        raise DataValidationError(f"style must be one of {E2E_STYLES}, got {style!r}")
    template_id = f"e2e.{style}.{variant}"
    prompt = render(template_id, {"Text": example.document, "Summary": example.summary})
    req = LlmRequest(
        model_id=model_id,
        user_prompt=prompt,
        temperature=temperature,
        max_tokens=max_tokens,
    )
    response = gateway.complete(req, mode=mode)
    layout = "lettered" if style in ("zero_shot", "few_shot") else "final_output_section"
    flags: tuple[str, ...] = ()
    try:
        parsed = parse_description_list(response.text, layout)
        texts = parsed.texts
    except ParseError:
        texts = []
        flags = ("parse_failure",)
    return DetectionResult(
        example_id=example.id,
        strategy_id=strategy_id or f"e2e.{style}",
        predictions=_letter_predictions(texts),
        transcript_refs=(cache_key(req),),
        flags=flags,
    )


def detect_pipeline(
    example: LabeledExample,
    model_id: str,
    gateway: LlmGateway,
    decompose_template_id: str = "pipeline.decompose",
    temperature: float = 0.0,
    max_tokens: int = 2048,
    mode: str | None = None,
) -> DetectionResult:
    """Decompose the summary into atomic facts, verify each against the text,
    then merge duplicate descriptions. Call count: 1 + |facts| + (1 when any
    fact was flagged). An all-consistent fact set skips the merge call."""

    def ask(prompt: str) -> tuple[str, str]:
        req = LlmRequest(
            model_id=model_id,
            user_prompt=prompt,
            temperature=temperature,
            max_tokens=max_tokens,
        )
        return gateway.complete(req, mode=mode).text, cache_key(req)

    refs: list[str] = []
    flags: list[str] = []

    text, ref = ask(render(decompose_template_id, {"Summary": example.summary}))
    refs.append(ref)
    try:
        facts = parse_description_list(text, "bulleted").texts
    except ParseError:
        return DetectionResult(
            example_id=example.id,
            strategy_id="pipeline.factscore",
            predictions=(),
            transcript_refs=tuple(refs),
            flags=("decompose_parse_failure",),
        )

    collected: list[str] = []
    for i, fact in enumerate(facts):
        text, ref = ask(
            render("pipeline.detect", {"Text": example.document, "Atomic Fact": fact})
        )
        refs.append(ref)
        try:
            verdict, bullets = parse_atomic_fact_verdict(text)
        except ParseError:
            flags.append(f"fact_{i}_parse_failure")
            continue
        if verdict == "no":
            collected.extend(bullets)

    if not collected:
        return DetectionResult(
            example_id=example.id,
            strategy_id="pipeline.factscore",
            predictions=(),
            transcript_refs=tuple(refs),
            flags=tuple(flags),
        )

    block = "\n".join(f"{letter_id(i)}. {d}" for i, d in enumerate(collected))
    text, ref = ask(
        render("pipeline.dedup", {"Summary": example.summary, "Descriptions": block})
    )
    refs.append(ref)
    try:
        final = parse_description_list(text, "lettered").texts
    except ParseError:
        flags.append("dedup_parse_failure")
        final = collected
    return DetectionResult(
        example_id=example.id,
        strategy_id="pipeline.factscore",
        predictions=_letter_predictions(final),
        transcript_refs=tuple(refs),
        flags=tuple(flags),
    )


def classify(
    example: LabeledExample,
    source: str,
    model_id: str | None = None,
    gateway: LlmGateway | None = None,
    score: float | None = None,
    threshold: float | None = None,
    temperature: float = 0.0,
    max_tokens: int = 2048,
    mode: str | None = None,
) -> ClassifierVerdict:
    """Binary consistency gate. self_cot asks the model; external_score applies
    a threshold to a supplied inconsistency score (high = inconsistent);
    oracle copies the gold label. An unparseable self verdict defaults to
    inconsistent (flagged) so localization still runs."""
    if source == "oracle":
        return ClassifierVerdict(example_id=example.id, source=source, label=example.gold_label)
    if source == "external_score":
        if score is None:
            raise DataValidationError(f"example {example.id}: missing external score")
        if threshold is None:
            raise DataValidationError("external_score classification requires a threshold")
        label = "inconsistent" if score >= threshold else "consistent"
        return ClassifierVerdict(
            example_id=example.id, source=source, label=label, score=score
        )
    if source == "self_cot":
        if model_id is None or gateway is None:
            raise DataValidationError("self_cot classification requires model_id and gateway")
        prompt = render(
            "binary.cot", {"Text": example.document, "Summary": example.summary}
        )
        req = LlmRequest(
            model_id=model_id,
            user_prompt=prompt,
            temperature=temperature,
            max_tokens=max_tokens,
        )
        response = gateway.complete(req, mode=mode)
        try:
            label = parse_binary_verdict(response.text)
            flagged = False
        except ParseError:
            label = "inconsistent"
            flagged = True
        return ClassifierVerdict(
            example_id=example.id,
            source=source,
            label=label,
            transcript_ref=cache_key(req),
            flagged=flagged,
        )
    raise DataValidationError(f"unknown classifier source {source!r}")


_SOURCE_SHORT = {"self_cot": "self", "external_score": "external", "oracle": "oracle"}


def detect_two_step(
    example: LabeledExample,
    classifier_source: str,
    second_stage: str,
    model_id: str,
    gateway: LlmGateway,
    variant: str = "v1",
    score: float | None = None,
    threshold: float | None = None,
    temperature: float = 0.0,
    max_tokens: int = 2048,
    mode: str | None = None,
) -> DetectionResult:
    """Classifier gate, then fine-grained localization only on examples the
    gate labels inconsistent."""
    if second_stage not in ("cot", "cot_hint"):
        raise DataValidationError(
            f"second stage must be cot or cot_hint, got {second_stage!r}"
        )
    strategy_id = f"twostep.{_SOURCE_SHORT[classifier_source]}.{second_stage}"
    verdict = classify(
        example,
        classifier_source,
        model_id=model_id,
        gateway=gateway,
        score=score,
        threshold=threshold,
        temperature=temperature,
        max_tokens=max_tokens,
        mode=mode,
    )
    gate_refs = (verdict.transcript_ref,) if verdict.transcript_ref else ()
    gate_flags = ("classifier_parse_failure",) if verdict.flagged else ()
    if verdict.label == "consistent":
        return DetectionResult(
            example_id=example.id,
            strategy_id=strategy_id,
            predictions=(),
            transcript_refs=gate_refs,
            flags=gate_flags,
        )
    second = detect_e2e(
        example,
        second_stage,
        model_id,
        gateway,
        variant=variant,
        temperature=temperature,
        max_tokens=max_tokens,
        mode=mode,
        strategy_id=strategy_id,
    )
    return DetectionResult(
        example_id=example.id,
        strategy_id=strategy_id,
        predictions=second.predictions,
        transcript_refs=gate_refs + second.transcript_refs,
        flags=gate_flags + second.flags,
    )


def binarize(result: DetectionResult) -> str:
    """A summary is inconsistent iff at least one error was predicted."""
    return result.derived_binary


def select_threshold(scores: Sequence[float], labels: Sequence[str]) -> float:
    """Threshold maximizing F1 of the inconsistent class; candidates are the
    midpoints between adjacent distinct scores plus the two infinities; the
    lowest maximizer wins."""
    if len(scores) != len(labels):
        raise DataValidationError("scores and labels differ in length")
    if not scores:
        raise DataValidationError("cannot select a threshold from empty input")
    if "inconsistent" not in labels:
        raise DataValidationError("threshold selection needs at least one inconsistent label")
    distinct = sorted(set(scores))
    candidates = [-math.inf]
    candidates += [(a + b) / 2 for a, b in zip(distinct, distinct[1:])]
    candidates.append(math.inf)
    best_t = None
    best_f1 = -1.0
    for t in candidates:
        predicted = ["inconsistent" if s >= t else "consistent" for s in scores]
        tp = sum(1 for p, g in zip(predicted, labels) if p == g == "inconsistent")
        fp = sum(1 for p, g in zip(predicted, labels) if p == "inconsistent" != g)
        fn = sum(1 for p, g in zip(predicted, labels) if g == "inconsistent" != p)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = f1_score(precision, recall)
        if f1 > best_f1:
            best_f1, best_t = f1, t
    assert best_t is not None
    return best_t


def select_prompt_variant(dev_reports: dict[str, MetricsReport]) -> str:
    """Variant with the highest dev-set F1; ties go to the smaller id."""
    if not dev_reports:
        raise DataValidationError("no variant reports given")
    return min(dev_reports, key=lambda vid: (-dev_reports[vid].f1, vid))


_TWOSTEP_SOURCES = {"self": "self_cot", "external": "external_score", "oracle": "oracle"}


def run_strategy(
    example: LabeledExample,
    strategy_id: str,
    model_id: str,
    gateway: LlmGateway,
    variant: str = "v1",
    scores: dict[str, float] | None = None,
    threshold: float | None = None,
    decompose_template_id: str = "pipeline.decompose",
    temperature: float = 0.0,
    max_tokens: int = 2048,
    mode: str | None = None,
) -> DetectionResult:
    """Dispatch a strategy id (e2e.<style>, pipeline.factscore,
    twostep.<gate>.<style>) to the matching detector."""
    parts = strategy_id.split(".")
    if parts[0] == "e2e" and len(parts) == 2 and parts[1] in E2E_STYLES:
        return detect_e2e(
            example, parts[1], model_id, gateway,
            variant=variant, temperature=temperature, max_tokens=max_tokens, mode=mode,
        )
    if strategy_id in ("pipeline.factscore", "pipeline"):
        return detect_pipeline(
            example, model_id, gateway,
            decompose_template_id=decompose_template_id,
            temperature=temperature, max_tokens=max_tokens, mode=mode,
        )
    if parts[0] == "twostep" and len(parts) == 3 and parts[1] in _TWOSTEP_SOURCES:
        source = _TWOSTEP_SOURCES[parts[1]]
        score = None
        if source == "external_score":
            if scores is None or example.id not in scores:
                raise DataValidationError(
                    f"example {example.id}: external classifier needs a score"
                )
            score = scores[example.id]
        return detect_two_step(
            example, source, parts[2], model_id, gateway,
            variant=variant, score=score, threshold=threshold,
            temperature=temperature, max_tokens=max_tokens, mode=mode,
        )
    raise DataValidationError(f"unknown strategy id {strategy_id!r}")


def result_to_record(r: DetectionResult) -> dict:
    return {
        "example_id": r.example_id,
        "strategy_id": r.strategy_id,
        "predictions": [{"id": d.id, "text": d.text} for d in r.predictions],
        "transcript_refs": list(r.transcript_refs),
        "flags": list(r.flags),
        "derived_binary": r.derived_binary,
    }


def record_to_result(record: dict) -> DetectionResult:
    try:
        return DetectionResult(
            example_id=record["example_id"],
            strategy_id=record["strategy_id"],
            predictions=tuple(
                InconsistencyDescription(id=p["id"], text=p["text"])
                for p in record["predictions"]
            ),
            transcript_refs=tuple(record.get("transcript_refs", ())),
            flags=tuple(record.get("flags", ())),
        )
    except (KeyError, TypeError) as exc:
        raise DataValidationError(f"malformed prediction record: {exc}") from exc
