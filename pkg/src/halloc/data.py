"""Domain types, dataset ingestion/validation, splits, and descriptive statistics."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal

from halloc.errors import DataValidationError

GoldLabel = Literal["consistent", "inconsistent"]
Split = Literal["dev", "test"]

GOLD_LABELS = ("consistent", "inconsistent")
SPLITS = ("dev", "test")


def letter_id(index: int) -> str:
    """0-based index -> letter label: 0=A, 25=Z, 26=AA, 27=AB, ..."""
    if index < 0:
        raise ValueError(f"letter index must be non-negative, got {index}")
    letters = ""
    n = index + 1
    while n > 0:
        n, rem = divmod(n - 1, 26)
        letters = chr(ord("A") + rem) + letters
    return letters


def letter_index(label: str) -> int:
    """Inverse of letter_id: A=0, Z=25, AA=26, ..."""
    if not label or not all("A" <= c <= "Z" for c in label):
        raise ValueError(f"not a letter label: {label!r}")
    n = 0
    for c in label:
        n = n * 26 + (ord(c) - ord("A") + 1)
    return n - 1


@dataclass(frozen=True)
class InconsistencyDescription:
    """One free-form natural-language description of a factual inconsistency."""

    id: str
    text: str

    def __post_init__(self) -> None:
        if not self.id or not all("A" <= c <= "Z" for c in self.id):
            raise DataValidationError(
                f"description id must be an uppercase letter label, got {self.id!r}"
            )
        if not self.text.strip():
            raise DataValidationError(f"description {self.id} has empty text")


@dataclass(frozen=True)
class LabeledExample:
    id: str
    document: str
    summary: str
    gold_label: GoldLabel
    gold_descriptions: tuple[InconsistencyDescription, ...]
    split: Split
    provenance: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self) -> None:
        if not self.id:
            raise DataValidationError("example id must be non-empty")
        if not self.document.strip():
            raise DataValidationError(f"example {self.id}: document is empty")
        if not self.summary.strip():
            raise DataValidationError(f"example {self.id}: summary is empty")
        if self.gold_label not in GOLD_LABELS:
            raise DataValidationError(
                f"example {self.id}: gold_label must be one of {GOLD_LABELS}, "
                f"got {self.gold_label!r}"
            )
        if self.split not in SPLITS:
            raise DataValidationError(
                f"example {self.id}: split must be one of {SPLITS}, got {self.split!r}"
            )
        if self.gold_label == "consistent" and self.gold_descriptions:
            raise DataValidationError(
                f"example {self.id}: consistent label with non-empty descriptions"
            )
        if self.gold_label == "inconsistent" and not self.gold_descriptions:
            raise DataValidationError(
                f"example {self.id}: inconsistent label with no descriptions"
            )
        check_sequential_ids(
            [d.id for d in self.gold_descriptions], context=f"example {self.id}"
        )


@dataclass(frozen=True)
class Dataset:
    examples: tuple[LabeledExample, ...]
    name: str = "dataset"
    version: str = "1"

    def __post_init__(self):
        seen = set()
        for ex in self.examples:
            if ex.id in seen:
                raise DataValidationError(f"duplicate example id {ex.id!r}")
            seen.add(ex.id)

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    def by_id(self) -> dict[str, LabeledExample]:
        return {ex.id: ex for ex in self.examples}


@dataclass(frozen=True)
class DatasetStats:
    n_total: int
    n_inconsistent: int
    n_consistent: int
    n_errors_total: int
    errors_per_summary: dict[int, int]
    per_split: dict[str, int]


def check_sequential_ids(ids: list[str], context: str = "") -> None:
    """Ids must be unique and sequential letters starting at A."""
    prefix = f"{context}: " if context else ""
    expected = [letter_id(i) for i in range(len(ids))]
    if ids != expected:
        raise DataValidationError(
            f"{prefix}description ids must be sequential letters starting at A; "
            f"got {ids}, expected {expected}"
        )


def _parse_record(record: dict, lineno: int) -> LabeledExample:
    required = {
        "id",
        "document",
        "summary",
        "gold_label",
        "gold_descriptions",
        "split",
    }
    missing = required - record.keys()
    if missing:
        raise DataValidationError(f"line {lineno}: missing fields {sorted(missing)}")
    raw_descs = record["gold_descriptions"]
    if not isinstance(raw_descs, list):
        raise DataValidationError(f"line {lineno}: gold_descriptions must be a list")
    descs = []
    for d in raw_descs:
        if not isinstance(d, dict) or "id" not in d or "text" not in d:
            raise DataValidationError(
                f"line {lineno}: each description needs 'id' and 'text'"
            )
        descs.append(InconsistencyDescription(id=d["id"], text=d["text"]))
    provenance = record.get("provenance", {})
    if not isinstance(provenance, dict):
        raise DataValidationError(f"line {lineno}: provenance must be an object")
    try:
        return LabeledExample(
            id=record["id"],
            document=record["document"],
            summary=record["summary"],
            gold_label=record["gold_label"],
            gold_descriptions=tuple(descs),
            split=record["split"],
            provenance=provenance,
        )
    except DataValidationError as exc:
        raise DataValidationError(f"line {lineno}: {exc}") from exc


def load_dataset(path: str | Path, schema_version: str = "1") -> Dataset:
    """Load and validate a JSONL dataset. Raises DataValidationError with line numbers."""
    path = Path(path)
    examples: list[LabeledExample] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataValidationError(f"line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise DataValidationError(f"line {lineno}: record must be an object")
            example = _parse_record(record, lineno)
            if example.id in seen_ids:
                raise DataValidationError(
                    f"line {lineno}: duplicate example id {example.id!r}"
                )
            seen_ids.add(example.id)
            examples.append(example)
    return Dataset(examples=tuple(examples), name=path.stem, version=schema_version)


def example_to_record(ex: LabeledExample) -> dict:
    return {
        "id": ex.id,
        "document": ex.document,
        "summary": ex.summary,
        "gold_label": ex.gold_label,
        "gold_descriptions": [{"id": d.id, "text": d.text} for d in ex.gold_descriptions],
        "split": ex.split,
        "provenance": ex.provenance,
    }


def serialize_dataset(d: Dataset) -> str:
    """Render a dataset back to JSONL, one record per line."""
    return "".join(
        json.dumps(example_to_record(ex), ensure_ascii=False) + "\n" for ex in d.examples
    )


def save_dataset(d: Dataset, path: str | Path) -> None:
    Path(path).write_text(serialize_dataset(d), encoding="utf-8")


def dataset_stats(d: Dataset) -> DatasetStats:
    n_inconsistent = sum(1 for ex in d.examples if ex.gold_label == "inconsistent")
    n_consistent = len(d.examples) - n_inconsistent
    histogram = Counter(len(ex.gold_descriptions) for ex in d.examples)
    per_split = Counter(ex.split for ex in d.examples)
    return DatasetStats(
        n_total=len(d.examples),
        n_inconsistent=n_inconsistent,
        n_consistent=n_consistent,
        n_errors_total=sum(len(ex.gold_descriptions) for ex in d.examples),
        errors_per_summary=dict(sorted(histogram.items())),
        per_split={split: per_split.get(split, 0) for split in SPLITS},
    )


def filter_split(d: Dataset, split: str) -> Dataset:
    if split not in SPLITS:
        raise DataValidationError(f"split must be one of {SPLITS}, got {split!r}")
    return Dataset(
        examples=tuple(ex for ex in d.examples if ex.split == split),
        name=d.name,
        version=d.version,
    )


def make_descriptions(texts: Iterable[str]) -> tuple[InconsistencyDescription, ...]:
    """Build a lettered description list from bare texts."""
    return tuple(
        InconsistencyDescription(id=letter_id(i), text=t) for i, t in enumerate(texts)
    )
