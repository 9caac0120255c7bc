"""Duplicate-penalized localization metrics and binary-task scoring."""

from __future__ import annotations

from dataclasses import dataclass

from halloc.errors import DataValidationError


@dataclass(frozen=True)
class ExampleMetrics:
    example_id: str
    n_gold: int
    n_pred: int
    tp: int

    def __post_init__(self) -> None:
        if self.tp > min(self.n_gold, self.n_pred):
            raise DataValidationError(
                f"{self.example_id}: tp={self.tp} exceeds min(n_gold={self.n_gold}, "
                f"n_pred={self.n_pred})"
            )
        if min(self.n_gold, self.n_pred, self.tp) < 0:
            raise DataValidationError(f"{self.example_id}: negative count")

    @property
    def precision(self) -> float:
        return self.tp / self.n_pred if self.n_pred else 0.0

    @property
    def recall(self) -> float:
        return self.tp / self.n_gold if self.n_gold else 0.0


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    aggregation: str
    per_example: tuple[ExampleMetrics, ...]
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class BinaryReport:
    precision: float
    recall: float
    f1: float


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def score_example(assignment, n_gold: int, n_pred: int) -> ExampleMetrics:
    """tp counts DISTINCT matched gold ids, so repeated detections of one gold
    error inflate n_pred without adding true positives."""
    mapping = assignment.assignment if hasattr(assignment, "assignment") else assignment
    example_id = getattr(assignment, "example_id", "")
    if len(mapping) != n_pred:
        raise DataValidationError(
            f"{example_id or 'example'}: assignment has {len(mapping)} keys, n_pred={n_pred}"
        )
    tp = len({gold for gold in mapping.values() if gold is not None})
    return ExampleMetrics(example_id=example_id, n_gold=n_gold, n_pred=n_pred, tp=tp)


def aggregate(
    per_example: list[ExampleMetrics],
    mode: str = "micro",
    flags: tuple[str, ...] | list[str] = (),
) -> MetricsReport:
    """micro: corpus-level sums (default). macro: unweighted example means;
    examples without predictions are skipped in macro precision and examples
    without gold errors are skipped in macro recall."""
    if not per_example:
        raise DataValidationError("cannot aggregate an empty metrics list")
    if mode == "micro":
        n_pred = sum(m.n_pred for m in per_example)
        n_gold = sum(m.n_gold for m in per_example)
        tp = sum(m.tp for m in per_example)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_gold if n_gold else 0.0
    elif mode == "macro":
        with_preds = [m for m in per_example if m.n_pred]
        with_gold = [m for m in per_example if m.n_gold]
        precision = (
            sum(m.precision for m in with_preds) / len(with_preds) if with_preds else 0.0
        )
        recall = sum(m.recall for m in with_gold) / len(with_gold) if with_gold else 0.0
    else:
        raise DataValidationError(f"aggregation must be micro or macro, got {mode!r}")
    return MetricsReport(
        precision=precision,
        recall=recall,
        f1=f1_score(precision, recall),
        aggregation=mode,
        per_example=tuple(per_example),
        flags=tuple(flags),
    )


def score_binary(predicted_labels: list[str], gold_labels: list[str]) -> BinaryReport:
    """Precision/recall/F1 with the inconsistent class as positive."""
    if len(predicted_labels) != len(gold_labels):
        raise DataValidationError(
            f"label lists differ in length: {len(predicted_labels)} vs {len(gold_labels)}"
        )
    if not predicted_labels:
        raise DataValidationError("cannot score empty label lists")
    for label in (*predicted_labels, *gold_labels):
        if label not in ("consistent", "inconsistent"):
            raise DataValidationError(f"unknown binary label {label!r}")
    tp = fp = fn = 0
    for pred, gold in zip(predicted_labels, gold_labels):
        if pred == "inconsistent" and gold == "inconsistent":
            tp += 1
        elif pred == "inconsistent":
            fp += 1
        elif gold == "inconsistent":
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return BinaryReport(precision=precision, recall=recall, f1=f1_score(precision, recall))
