"""Shared fixtures: a synthetic dataset and a deterministic scripted provider.

The scripted provider answers every prompt family the strategies emit, as a
pure function of the prompt text. Summaries plant recognizable error markers
("alpha-error", "beta-error", "gamma-error"); the provider flags exactly the
planted markers, so expected detector/judge/score outputs can be computed by
hand.
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from halloc.data import Dataset, LabeledExample, letter_id, make_descriptions
from halloc.gateway import CallableProvider, LlmGateway, LlmRequest

MARKERS = ("alpha-error", "beta-error", "gamma-error")


def marker_description(marker: str) -> str:
    return f"The summary mentions {marker} which the text does not support."


def make_example(
    i: int,
    n_errors: int,
    split: str = "test",
) -> LabeledExample:
    """Synthetic example i with n_errors planted marker errors (0 = consistent)."""
    markers = MARKERS[:n_errors]
    clauses = ["The quarterly report was published on schedule"]
    clauses += [f"The report cites {m} in section {j + 1}" for j, m in enumerate(markers)]
    summary = ". ".join(clauses) + "."
    return LabeledExample(
        id=f"syn-{i:03d}",
        document=(
            f"Document {i}. The quarterly report was published on schedule. "
            "It contains only verified figures and no disputed claims."
        ),
        summary=summary,
        gold_label="inconsistent" if markers else "consistent",
        gold_descriptions=make_descriptions(
            [marker_description(m) for m in markers]
        ),
        split=split,
    )


# 20 examples: ids syn-000..syn-019.
# dev: 4 (2 consistent, 2 inconsistent). test: 16 (5 consistent, 11 inconsistent).
# error histogram: 7 summaries with 0, 6 with 1, 5 with 2, 2 with 3 -> 22 errors.
_SPEC = [
    # (n_errors, split)
    (0, "dev"), (1, "dev"), (0, "dev"), (2, "dev"),
    (0, "test"), (1, "test"), (2, "test"), (3, "test"),
    (0, "test"), (1, "test"), (2, "test"), (3, "test"),
    (0, "test"), (1, "test"), (2, "test"), (0, "test"),
    (1, "test"), (2, "test"), (0, "test"), (1, "test"),
]

SYNTHETIC_COUNTS = {
    "n_total": 20,
    "n_inconsistent": 13,
    "n_consistent": 7,
    "n_errors_total": 22,
    "dev": 4,
    "test": 16,
}


def build_synthetic_dataset() -> Dataset:
    examples = tuple(
        make_example(i, n_errors, split) for i, (n_errors, split) in enumerate(_SPEC)
    )
    return Dataset(name="synthetic", version="1", examples=examples)


@pytest.fixture(autouse=True)
def _isolated_template_registrations():
    """Runtime template registrations must not leak between tests."""
    import halloc.prompts as prompts

    before = dict(prompts._extra)
    yield
    prompts._extra.clear()
    prompts._extra.update(before)


@pytest.fixture(scope="session")
def synthetic_dataset() -> Dataset:
    return build_synthetic_dataset()


@pytest.fixture()
def synthetic_dataset_path(tmp_path, synthetic_dataset) -> Path:
    from halloc.data import save_dataset

    path = tmp_path / "synthetic.jsonl"
    save_dataset(synthetic_dataset, path)
    return path


# -- scripted provider -----------------------------------------------------


def _markers_in(text: str) -> list[str]:
    return [m for m in MARKERS if m in text]


def _lettered(texts: list[str]) -> str:
    return "\n".join(f"{letter_id(i)}. {t}" for i, t in enumerate(texts))


def _lettered_lines(block: str) -> list[tuple[str, str]]:
    items = []
    for line in block.strip().splitlines():
        letter, sep, text = line.partition(". ")
        if sep and letter.isalpha() and letter.isupper() and len(letter) <= 2:
            items.append((letter, text))
        else:
            break  # instruction text after the inserted list
    return items


def _judge_reply(prompt: str) -> str:
    pred_block = prompt.split("Predicted Output: ")[-1]
    gold_block = prompt.split("Gold Label: ")[-1].split("Predicted Output:")[0]
    gold_by_marker = {}
    for letter, text in _lettered_lines(gold_block):
        for m in _markers_in(text):
            gold_by_marker[m] = letter
    mapping = {}
    for letter, text in _lettered_lines(pred_block):
        hit = next(
            (gold_by_marker[m] for m in _markers_in(text) if m in gold_by_marker),
            None,
        )
        mapping[letter] = hit
    return json.dumps(mapping)


def scripted_reply(req: LlmRequest) -> str:
    prompt = req.user_prompt
    if "Break down the following summary" in prompt:
        summary = prompt.split("Summary: ")[-1]
        sentences = [s.strip() for s in summary.split(".") if s.strip()]
        return "\n".join(f"- {s}." for s in sentences)
    if "Atomic fact:" in prompt:
        fact = prompt.split("Atomic fact: ")[-1]
        found = _markers_in(fact)
        if not found:
            return "yes"
        return "no\n" + "\n".join(f"- {marker_description(m)}" for m in found)
    if "Enumerate the final list" in prompt:
        block = prompt.split("Descriptions:\n")[-1]
        seen: list[str] = []
        for line in block.splitlines():
            _, _, text = line.partition(". ")
            if text and text not in seen:
                seen.append(text)
        return _lettered(seen)
    if "Predicted Output:" in prompt:
        return _judge_reply(prompt)
    if "final answer: yes or no only" in prompt:
        summary = prompt.split("Summary: ")[-1]
        verdict = "no" if _markers_in(summary) else "yes"
        return f"The summary was checked against the text.\nfinal answer: {verdict}"
    # e2e prompt: summary is the text after the last "Summary:" marker
    summary = prompt.split("Summary:")[-1]
    found = _markers_in(summary)
    listing = _lettered([marker_description(m) for m in found]) if found else "None"
    if "Final Output:" in prompt or "final output" in prompt.lower():
        return f"Checking each sentence of the summary for support.\nFinal Output:\n{listing}"
    return listing


@pytest.fixture()
def scripted_gateway(tmp_path) -> LlmGateway:
    return LlmGateway(
        provider=CallableProvider(scripted_reply),
        cache_dir=tmp_path / "cache",
        mode="live_with_cache",
    )


def gateway_from(fn, tmp_path, mode="live_with_cache", **kw) -> LlmGateway:
    return LlmGateway(
        provider=CallableProvider(fn), cache_dir=tmp_path / "cache", mode=mode, **kw
    )
