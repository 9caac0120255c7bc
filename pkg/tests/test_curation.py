"""High-recall candidate generation, review decisions, agreement."""

import pytest

from halloc.curation import (
    CandidateError,
    ReviewDecision,
    apply_decisions,
    candidate_to_record,
    compute_agreement,
    decision_to_record,
    generate_candidates,
    load_jsonl,
    make_decision,
    record_to_candidate,
    record_to_decision,
    resolve_decisions,
    save_jsonl,
)
from halloc.data import Dataset
from halloc.errors import CurationError, DataValidationError, ParseError

from conftest import build_synthetic_dataset, gateway_from, make_example


def high_recall_reply(r):
    return (
        "A.\nFact: The report cites alpha-error in section 1.\n"
        "Description: The text does not support alpha-error.\n"
        "B.\nFact: The report was published on schedule.\n"
        "Description: Publication timing is not stated in the text."
    )


def test_generate_candidates(tmp_path):
    ex = make_example(1, 1)
    gw = gateway_from(high_recall_reply, tmp_path)
    candidates = generate_candidates(ex, "m", gw)
    assert [c.candidate_id for c in candidates] == [f"{ex.id}:A", f"{ex.id}:B"]
    assert candidates[0].example_id == ex.id
    assert "alpha-error" in candidates[0].fact


def test_generate_candidates_none_reply(tmp_path):
    ex = make_example(2, 0)
    gw = gateway_from(lambda r: "None", tmp_path)
    assert generate_candidates(ex, "m", gw) == []


def test_generate_candidates_parse_error_propagates(tmp_path):
    ex = make_example(3, 0)
    gw = gateway_from(lambda r: "no structured list here", tmp_path)
    with pytest.raises(ParseError):
        generate_candidates(ex, "m", gw)


def make_candidates(ex_id="syn-001"):
    return [
        CandidateError(candidate_id=f"{ex_id}:A", example_id=ex_id,
                       fact="planted marker", description="The summary mentions "
                       "alpha-error which the text does not support."),
        CandidateError(candidate_id=f"{ex_id}:B", example_id=ex_id,
                       fact="new finding",
                       description="A brand-new unsupported claim."),
    ]


def test_resolve_decisions_last_write_wins():
    d1 = ReviewDecision(candidate_id="c:A", annotator_id="ann1",
                        verdict="invalid", note=None, timestamp=1.0)
    d2 = ReviewDecision(candidate_id="c:A", annotator_id="ann1",
                        verdict="new_valid", note=None, timestamp=2.0)
    resolved = resolve_decisions([d1, d2])
    assert resolved["c:A"].verdict == "new_valid"


def test_apply_decisions_new_valid_appends_and_reletters():
    dataset = build_synthetic_dataset()
    candidates = make_candidates()
    decisions = [
        make_decision(candidates[0].candidate_id, "ann1", "already_annotated"),
        make_decision(candidates[1].candidate_id, "ann1", "new_valid"),
    ]
    enriched, removed = apply_decisions(candidates, decisions, dataset)
    assert removed == []
    ex = enriched.by_id()["syn-001"]
    texts = [d.text for d in ex.gold_descriptions]
    assert "A brand-new unsupported claim." in texts
    assert [d.id for d in ex.gold_descriptions] == ["A", "B"]
    # untouched examples preserved
    assert len(enriched) == len(dataset)


def test_apply_decisions_invalid_is_noop():
    dataset = build_synthetic_dataset()
    candidates = make_candidates()
    decisions = [
        make_decision(candidates[0].candidate_id, "ann1", "invalid"),
        make_decision(candidates[1].candidate_id, "ann1", "invalid"),
    ]
    enriched, removed = apply_decisions(candidates, decisions, dataset)
    assert enriched.by_id()["syn-001"] == dataset.by_id()["syn-001"]
    assert removed == []


def test_apply_decisions_undecidable_removes_example():
    dataset = build_synthetic_dataset()
    candidates = make_candidates()
    decisions = [
        make_decision(candidates[0].candidate_id, "ann1", "undecidable",
                      note="summary is garbled"),
        make_decision(candidates[1].candidate_id, "ann1", "invalid"),
    ]
    enriched, removed = apply_decisions(candidates, decisions, dataset)
    assert removed == ["syn-001"]
    assert "syn-001" not in enriched.by_id()
    assert len(enriched) == len(dataset) - 1


def test_apply_decisions_undecided_candidate_is_error():
    dataset = build_synthetic_dataset()
    candidates = make_candidates()
    decisions = [make_decision(candidates[0].candidate_id, "ann1", "invalid")]
    with pytest.raises(CurationError):
        apply_decisions(candidates, decisions, dataset)


def test_apply_decisions_relabels_consistent_examples():
    dataset = build_synthetic_dataset()
    candidates = [CandidateError(
        candidate_id="syn-000:A", example_id="syn-000",
        fact="unsupported claim", description="Claim not present in the text.",
    )]
    decisions = [make_decision("syn-000:A", "ann1", "new_valid")]
    enriched, _ = apply_decisions(candidates, decisions, dataset)
    ex = enriched.by_id()["syn-000"]
    assert ex.gold_label == "inconsistent"
    assert [d.id for d in ex.gold_descriptions] == ["A"]


def test_apply_decisions_idempotent_on_duplicate_text():
    dataset = build_synthetic_dataset()
    ex = dataset.by_id()["syn-001"]
    existing = ex.gold_descriptions[0].text
    candidates = [CandidateError(
        candidate_id="syn-001:A", example_id="syn-001",
        fact="f", description=f"  {existing.upper()}  ",
    )]
    decisions = [make_decision("syn-001:A", "ann1", "new_valid")]
    enriched, _ = apply_decisions(candidates, decisions, dataset)
    after = enriched.by_id()["syn-001"]
    assert len(after.gold_descriptions) == len(ex.gold_descriptions)


def test_apply_decisions_unknown_example():
    dataset = build_synthetic_dataset()
    candidates = [CandidateError(candidate_id="ghost:A", example_id="ghost",
                                 fact="f", description="d")]
    decisions = [make_decision("ghost:A", "ann1", "invalid")]
    with pytest.raises(DataValidationError):
        apply_decisions(candidates, decisions, dataset)


def test_decision_verdict_enum():
    with pytest.raises(DataValidationError):
        make_decision("c:A", "ann1", "dunno")


# -- agreement ----------------------------------------------------------------

def decisions_from(verdicts, annotator):
    return [
        make_decision(f"c:{i}", annotator, verdict)
        for i, verdict in enumerate(verdicts)
    ]


def test_agreement_hand_case_half_raw():
    # binarized: already_annotated/new_valid -> True, invalid -> False.
    # 2x2 balanced disagreement: p_o=0.5, p_e=0.5 -> kappa 0
    a = decisions_from(["new_valid", "new_valid", "invalid", "invalid"], "a")
    b = decisions_from(["new_valid", "invalid", "new_valid", "invalid"], "b")
    p_o, kappa = compute_agreement(a, b)
    assert p_o == pytest.approx(0.5)
    assert kappa == pytest.approx(0.0)


def test_agreement_hand_case_three_quarters():
    # p_o = 0.75 with p_e = 0.5 -> kappa 0.5
    a = decisions_from(
        ["new_valid", "new_valid", "invalid", "invalid"] * 2, "a")
    b = decisions_from(
        ["new_valid", "invalid", "invalid", "new_valid",
         "new_valid", "new_valid", "invalid", "invalid"], "b")
    p_o, kappa = compute_agreement(a, b)
    assert p_o == pytest.approx(0.75)
    assert kappa == pytest.approx(0.5)


def test_agreement_perfect_uniform_labels():
    # all True on both sides: p_o = 1, p_e = 1 -> kappa defined as 1
    a = decisions_from(["new_valid", "already_annotated"], "a")
    b = decisions_from(["already_annotated", "new_valid"], "b")
    p_o, kappa = compute_agreement(a, b)
    assert p_o == 1.0
    assert kappa == 1.0


def test_agreement_excludes_undecidable_pairs():
    a = decisions_from(["new_valid", "undecidable", "invalid"], "a")
    b = decisions_from(["new_valid", "invalid", "invalid"], "b")
    # the middle pair is excluded; remaining two agree perfectly
    p_o, kappa = compute_agreement(a, b)
    assert p_o == 1.0


def test_agreement_requires_matching_candidates():
    a = [make_decision("c:0", "a", "invalid")]
    b = [make_decision("c:1", "b", "invalid")]
    with pytest.raises(CurationError):
        compute_agreement(a, b)


def test_agreement_no_comparable_pairs():
    a = [make_decision("c:0", "a", "undecidable", note="n")]
    b = [make_decision("c:0", "b", "invalid")]
    with pytest.raises(CurationError):
        compute_agreement(a, b)


# -- serialization --------------------------------------------------------------

def test_candidate_and_decision_round_trip(tmp_path):
    candidate = make_candidates()[0]
    assert record_to_candidate(candidate_to_record(candidate)) == candidate
    decision = make_decision("c:A", "ann1", "undecidable", note="why")
    assert record_to_decision(decision_to_record(decision)) == decision

    path = tmp_path / "cands.jsonl"
    save_jsonl([candidate_to_record(candidate)], path)
    assert [record_to_candidate(r) for r in load_jsonl(path)] == [candidate]


def test_load_jsonl_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"ok": 1}\nnot json\n', encoding="utf-8")
    with pytest.raises(DataValidationError, match=":2:"):
        load_jsonl(path)
