"""Judge-based matching: prompting, retry, flagging, and serialization."""

import json

import pytest

from halloc.data import make_descriptions
from halloc.errors import DataValidationError, JudgeMatchError
from halloc.judge import (
    MatchAssignment,
    assignment_to_record,
    format_description_block,
    judge_match,
    judge_results,
    record_to_assignment,
    score_run,
    serialize_assignments,
    validate_judge,
)
from halloc.detectors import detect_e2e

from conftest import build_synthetic_dataset, gateway_from, scripted_reply


def test_format_description_block():
    descs = make_descriptions(["first", "second"])
    assert format_description_block(descs) == "A. first\nB. second"


def test_empty_predictions_short_circuit(tmp_path):
    calls = []
    gw = gateway_from(lambda r: calls.append(r) or "{}", tmp_path)
    out = judge_match("sum", [], make_descriptions(["g"]), "judge", gateway=gw)
    assert out.assignment == {}
    assert calls == []
    assert out.transcript_ref is None


def test_empty_gold_short_circuit(tmp_path):
    calls = []
    gw = gateway_from(lambda r: calls.append(r) or "{}", tmp_path)
    out = judge_match("sum", make_descriptions(["p1", "p2"]), [], "judge", gateway=gw)
    assert out.assignment == {"A": None, "B": None}
    assert calls == []


def test_judge_match_parses_reply(tmp_path):
    gw = gateway_from(lambda r: '{"A": "B", "B": null}', tmp_path)
    out = judge_match("sum", make_descriptions(["p1", "p2"]),
                      make_descriptions(["g1", "g2"]), "judge", gateway=gw,
                      example_id="e1")
    assert out.assignment == {"A": "B", "B": None}
    assert out.example_id == "e1"
    assert out.judge_model_id == "judge"
    assert out.transcript_ref


def test_judge_match_retries_once_on_malformed(tmp_path):
    replies = iter(["not json at all", '{"A": "A"}'])
    prompts = []

    def fn(r):
        prompts.append(r.user_prompt)
        return next(replies)

    gw = gateway_from(fn, tmp_path)
    out = judge_match("sum", make_descriptions(["p"]), make_descriptions(["g"]),
                      "judge", gateway=gw)
    assert out.assignment == {"A": "A"}
    assert len(prompts) == 2
    assert prompts[1].endswith("Return only the JSON object.")


def test_judge_match_fails_after_two_malformed(tmp_path):
    gw = gateway_from(lambda r: "still not json", tmp_path)
    with pytest.raises(JudgeMatchError):
        judge_match("sum", make_descriptions(["p"]), make_descriptions(["g"]),
                    "judge", gateway=gw)


def test_judge_results_full_run_scores_perfectly(tmp_path):
    dataset = build_synthetic_dataset()
    gw = gateway_from(scripted_reply, tmp_path)
    results = [detect_e2e(ex, "zero_shot", "m", gw) for ex in dataset]
    assignments, flagged = judge_results(dataset, results, "judge", gw)
    assert flagged == []
    assert {a.example_id for a in assignments} == {ex.id for ex in dataset}
    report = score_run(dataset, results, assignments, flagged=flagged)
    # scripted world: detector finds exactly the planted errors
    assert report.precision == pytest.approx(1.0)
    assert report.recall == pytest.approx(1.0)


def test_judge_results_flagging_on_persistent_garbage(tmp_path):
    dataset = build_synthetic_dataset()
    gw = gateway_from(scripted_reply, tmp_path)
    results = [detect_e2e(ex, "zero_shot", "m", gw) for ex in dataset]

    def judge_fn(r):
        # first inconsistent example gets garbage judge output, others fine
        if "syn-001" in r.user_prompt or "section 1" in r.user_prompt.split("Summary:")[-1]:
            return "garbage every time"
        return scripted_reply(r)

    gw_bad = gateway_from(judge_fn, tmp_path / "bad")
    assignments, flagged = judge_results(dataset, results, "judge", gw_bad)
    inconsistent_ids = {ex.id for ex in dataset if ex.gold_label == "inconsistent"}
    assert set(flagged) <= inconsistent_ids
    assert flagged  # at least one example failed
    judged_ids = {a.example_id for a in assignments}
    assert judged_ids.isdisjoint(flagged)
    report = score_run(dataset, results, assignments, flagged=flagged)
    assert set(report.flags) == set(flagged)
    scored_ids = {m.example_id for m in report.per_example}
    assert scored_ids.isdisjoint(flagged)


def test_score_run_rejects_unknown_assignment(tmp_path):
    dataset = build_synthetic_dataset()
    gw = gateway_from(scripted_reply, tmp_path)
    results = [detect_e2e(dataset.examples[1], "zero_shot", "m", gw)]
    rogue = MatchAssignment(example_id="ghost", assignment={},
                            judge_model_id="j", transcript_ref=None)
    with pytest.raises(DataValidationError):
        score_run(dataset, results, [rogue])


def test_validate_judge_hand_case():
    def asg(example_id, mapping):
        return MatchAssignment(example_id=example_id, assignment=mapping,
                               judge_model_id="j", transcript_ref=None)

    judge = [asg("e1", {"A": "A", "B": "B", "C": None})]
    human = [asg("e1", {"A": "A", "B": None, "C": "C"})]
    precision, recall = validate_judge(judge, human)
    # judge pairs {(A,A),(B,B)}, human pairs {(A,A),(C,C)} -> overlap 1
    assert precision == pytest.approx(0.5)
    assert recall == pytest.approx(0.5)


def test_validate_judge_empty_sets_score_one():
    a = MatchAssignment(example_id="e", assignment={"A": None},
                        judge_model_id="j", transcript_ref=None)
    b = MatchAssignment(example_id="e", assignment={"A": None},
                        judge_model_id="h", transcript_ref=None)
    assert validate_judge([a], [b]) == (1.0, 1.0)


def test_validate_judge_requires_same_examples():
    a = MatchAssignment(example_id="e1", assignment={}, judge_model_id="j",
                        transcript_ref=None)
    b = MatchAssignment(example_id="e2", assignment={}, judge_model_id="h",
                        transcript_ref=None)
    with pytest.raises(DataValidationError):
        validate_judge([a], [b])


def test_assignment_record_round_trip():
    a = MatchAssignment(example_id="e1", assignment={"A": "C", "B": None},
                        judge_model_id="gpt-x", transcript_ref="abc123")
    record = assignment_to_record(a)
    assert list(record) == ["example_id", "assignment", "judge_model_id",
                            "transcript_ref"]
    assert record_to_assignment(record) == a
    line = serialize_assignments([a])
    assert json.loads(line) == record
    assert line.endswith("\n")
