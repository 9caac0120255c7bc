"""Error-analysis instruments: answer-correctness probing with option-swap
bias elimination, counterfactual detection rate, category tallies, and
kernel-density CSV export."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from halloc.errors import DataValidationError, ParseError
from halloc.gateway import LlmGateway, LlmRequest
from halloc.parsing import parse_ptrue_letter
from halloc.prompts import get_template, render

FN_CATEGORIES = (
    "extrinsic_correct",
    "extrinsic_wrong",
    "intrinsic_alteration",
    "intrinsic_composition",
)
FP_CATEGORIES = (
    "overlooked_info",
    "missed_deduction",
    "omission",
    "overly_literal",
    "invented",
)
CATEGORY_SETS = {"false_negative": FN_CATEGORIES, "false_positive": FP_CATEGORIES}


@dataclass(frozen=True)
class PTrueProbe:
    probe_id: str
    question: str
    answer: str
    n_samples_per_config: int = 10
    temperature: float = 1.0
    estimate: float | None = None
    per_config_counts: tuple[int, int] | None = None
    per_config_parseable: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if not self.question.strip() or not self.answer.strip():
            raise DataValidationError(f"probe {self.probe_id}: empty question or answer")
        if self.n_samples_per_config < 1:
            raise DataValidationError("n_samples_per_config must be >= 1")


# (template id, letter that means "the answer is correct")
_PTRUE_CONFIGS = (("ptrue.classify", "A"), ("ptrue.classify.swapped", "B"))


def estimate_p_true(
    probe: PTrueProbe,
    model_id: str,
    gateway: LlmGateway,
    max_tokens: int = 16,
    mode: str | None = None,
) -> PTrueProbe:
    """Sample both option orders n times each and average the per-config
    frequencies of the correct letter, cancelling position bias. Unparseable
    samples are dropped from that config's denominator."""
    counts: list[int] = []
    parseable: list[int] = []
    for template_id, correct_letter in _PTRUE_CONFIGS:
        prompt = render(
            template_id, {"question": probe.question, "answer": probe.answer}
        )
        req = LlmRequest(
            model_id=model_id,
            user_prompt=prompt,
            system_prompt=get_template(template_id).system_text,
            temperature=probe.temperature,
            max_tokens=max_tokens,
        )
        responses = gateway.sample_many(req, probe.n_samples_per_config, mode=mode)
        ok = 0
        correct = 0
        for response in responses:
            try:
                letter = parse_ptrue_letter(response.text)
            except ParseError:
                continue
            ok += 1
            if letter == correct_letter:
                correct += 1
        if ok == 0:
            raise ParseError(
                f"probe {probe.probe_id}: all samples unparseable for {template_id}"
            )
        counts.append(correct)
        parseable.append(ok)
    estimate = (counts[0] / parseable[0] + counts[1] / parseable[1]) / 2
    return replace(
        probe,
        estimate=estimate,
        per_config_counts=(counts[0], counts[1]),
        per_config_parseable=(parseable[0], parseable[1]),
    )


@dataclass(frozen=True)
class CounterfactualCase:
    example_id: str
    original_summary: str
    edited_summary: str
    edited_description: str
    detected: bool

    def __post_init__(self) -> None:
        if self.edited_summary == self.original_summary:
            raise DataValidationError(
                f"case {self.example_id}: edited summary equals the original"
            )


def counterfactual_rate(cases: Sequence[CounterfactualCase]) -> float:
    if not cases:
        raise DataValidationError("no counterfactual cases given")
    return sum(1 for c in cases if c.detected) / len(cases)


@dataclass(frozen=True)
class CategoryLabel:
    item_id: str
    kind: str
    category: str
    labeler_id: str = ""

    def __post_init__(self) -> None:
        if self.kind not in CATEGORY_SETS:
            raise DataValidationError(f"unknown label kind {self.kind!r}")
        if self.category not in CATEGORY_SETS[self.kind]:
            raise DataValidationError(
                f"category {self.category!r} is not valid for kind {self.kind!r}"
            )


@dataclass(frozen=True)
class CategoryTable:
    kind: str
    counts: dict[str, int]
    percentages: dict[str, float]
    total: int


def tabulate_categories(labels: Sequence[CategoryLabel]) -> CategoryTable:
    """Per-category counts and percentages for one label kind."""
    if not labels:
        raise DataValidationError("no category labels given")
    kinds = {label.kind for label in labels}
    if len(kinds) > 1:
        raise DataValidationError(f"mixed label kinds: {sorted(kinds)}")
    kind = labels[0].kind
    counts = {category: 0 for category in CATEGORY_SETS[kind]}
    for label in labels:
        counts[label.category] += 1
    total = len(labels)
    percentages = {cat: 100.0 * n / total for cat, n in counts.items()}
    return CategoryTable(kind=kind, counts=counts, percentages=percentages, total=total)


def silverman_bandwidth(values: Sequence[float], floor: float = 0.05) -> float:
    """Silverman's rule of thumb with a floor for (near-)degenerate samples."""
    arr = np.asarray(values, dtype=float)
    n = arr.size
    std = float(arr.std(ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(arr, [75, 25])
    iqr = float(q75 - q25)
    spread_candidates = [s for s in (std, iqr / 1.34) if s > 0]
    spread = min(spread_candidates) if spread_candidates else 0.0
    return max(0.9 * spread * n ** (-1 / 5), floor)


def density_grid(
    values: Sequence[float], grid_points: int = 201, bandwidth: float | None = None
) -> tuple[np.ndarray, np.ndarray, float]:
    """Gaussian kernel density on [0, 1] with boundary reflection, so the
    trapezoid integral over the unit interval stays at 1."""
    if len(values) == 0:
        raise DataValidationError("no values to estimate a density from")
    arr = np.asarray(values, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1):
        raise DataValidationError("density values must lie within [0, 1]")
    if grid_points < 2:
        raise DataValidationError("grid needs at least 2 points")
    h = bandwidth if bandwidth is not None else silverman_bandwidth(arr)
    if h <= 0:
        raise DataValidationError("bandwidth must be positive")
    x = np.linspace(0.0, 1.0, grid_points)
    centers = np.concatenate([arr, -arr, 2.0 - arr])  # data + reflections at 0 and 1
    z = (x[:, None] - centers[None, :]) / h
    y = np.exp(-0.5 * z**2).sum(axis=1) / (len(arr) * h * math.sqrt(2 * math.pi))
    return x, y, h


def export_density_csv(
    values: Sequence[float], grid_points: int = 201, bandwidth: float | None = None
) -> str:
    x, y, h = density_grid(values, grid_points=grid_points, bandwidth=bandwidth)
    lines = [
        "# kernel=gaussian boundary=reflect",
        f"# bandwidth={h:.6g}",
        f"# grid_points={grid_points} n={len(values)}",
        "x,y",
    ]
    lines += [f"{xi:.6f},{yi:.6f}" for xi, yi in zip(x, y)]
    return "\n".join(lines) + "\n"


def ptrue_results_csv(probes: Sequence[PTrueProbe]) -> str:
    """Results table: probe_id, estimate, per-config correct counts, n."""
    lines = ["probe_id,estimate,count_normal,count_swapped,n"]
    for probe in probes:
        if probe.estimate is None or probe.per_config_counts is None:
            raise DataValidationError(f"probe {probe.probe_id} has no estimate yet")
        lines.append(
            f"{probe.probe_id},{probe.estimate:.6f},"
            f"{probe.per_config_counts[0]},{probe.per_config_counts[1]},"
            f"{probe.n_samples_per_config}"
        )
    return "\n".join(lines) + "\n"
