"""Command-line entry point wiring all modules into runnable workflows."""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from halloc import analysis as analysis_mod
from halloc import curation as curation_mod
from halloc.data import dataset_stats, filter_split, load_dataset, save_dataset
from halloc.detectors import (
    record_to_result,
    result_to_record,
    run_strategy,
    select_prompt_variant,
    select_threshold,
)
from halloc.errors import (
    CurationError,
    DataValidationError,
    GatewayError,
    ParseError,
    TemplateError,
)
from halloc.gateway import HttpChatProvider, LlmGateway
from halloc.judge import (
    judge_results,
    record_to_assignment,
    score_run,
    serialize_assignments,
)
from halloc.metrics import MetricsReport, score_binary

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_PROVIDER = 3
EXIT_FLAGGED = 4


class UsageError(Exception):
    pass


class FlaggedThresholdExceeded(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: A003 - argparse API
        raise UsageError(message)


def _add_cache_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cache-mode", default="replay",
                   choices=["live", "replay", "live_with_cache"])
    p.add_argument("--cache-dir", default=None,
                   help="cache directory (default: HALLOC_CACHE_DIR)")
    p.add_argument("--provider-base-url", default=None)
    p.add_argument("--provider-key-env", default=None)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--max-tokens", type=int, default=2048)


def _gateway(args: argparse.Namespace) -> LlmGateway:
    provider = None
    if args.provider_base_url:
        provider = HttpChatProvider(
            base_url=args.provider_base_url,
            api_key_env=args.provider_key_env or "HALLOC_API_KEY",
        )
    return LlmGateway(provider=provider, cache_dir=args.cache_dir, mode=args.cache_mode)


def _load_split(args: argparse.Namespace):
    dataset = load_dataset(args.dataset)
    if getattr(args, "split", None):
        dataset = filter_split(dataset, args.split)
    return dataset


def _digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, payload: dict) -> None:
    (out_dir / "manifest.json").write_text(
        json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )


def _check_flag_budget(flagged_count: int, max_flagged: int | None) -> None:
    if max_flagged is not None and flagged_count > max_flagged:
        raise FlaggedThresholdExceeded(
            f"{flagged_count} flagged examples exceed the budget of {max_flagged}"
        )


def _load_scores(path: str | None) -> dict[str, float] | None:
    if path is None:
        return None
    raw = Path(path).read_text(encoding="utf-8")
    data = json.loads(raw)
    if isinstance(data, dict):
        return {str(k): float(v) for k, v in data.items()}
    raise DataValidationError("score file must be a JSON object of id -> score")


# -- subcommands ---------------------------------------------------------


def _cmd_detect(args) -> int:
    dataset = _load_split(args)
    gateway = _gateway(args)
    scores = _load_scores(args.score_file)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = [
        run_strategy(
            example,
            args.strategy,
            args.model,
            gateway,
            variant=args.variant,
            scores=scores,
            threshold=args.threshold,
            decompose_template_id=args.decompose_template,
            temperature=args.temperature,
            max_tokens=args.max_tokens,
        )
        for example in dataset
    ]
    with (out_dir / "predictions.jsonl").open("w", encoding="utf-8") as fh:
        for result in results:
            fh.write(json.dumps(result_to_record(result), ensure_ascii=False) + "\n")
    flagged = [r.example_id for r in results if r.flags]
    _write_manifest(out_dir, {
        "stage": "detect",
        "strategy_id": args.strategy,
        "model_id": args.model,
        "variant": args.variant,
        "temperature": args.temperature,
        "max_tokens": args.max_tokens,
        "threshold": args.threshold,
        "cache_mode": args.cache_mode,
        "dataset": {"path": str(args.dataset), "name": dataset.name,
                    "version": dataset.version, "sha256": _digest(args.dataset)},
        "n_examples": len(dataset),
        "flagged_example_ids": flagged,
    })
    print(f"detect: {len(dataset)} examples, {len(flagged)} flagged -> {out_dir}")
    _check_flag_budget(len(flagged), args.max_flagged)
    return EXIT_OK


def _cmd_judge(args) -> int:
    dataset = load_dataset(args.dataset)
    results = [record_to_result(r) for r in curation_mod.load_jsonl(args.predictions)]
    gateway = _gateway(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    assignments, flagged = judge_results(
        dataset, results, args.judge_model, gateway
    )
    (out_dir / "assignments.jsonl").write_text(
        serialize_assignments(assignments), encoding="utf-8"
    )
    _write_manifest(out_dir, {
        "stage": "judge",
        "judge_model_id": args.judge_model,
        "cache_mode": args.cache_mode,
        "dataset": {"path": str(args.dataset), "sha256": _digest(args.dataset)},
        "predictions": {"path": str(args.predictions), "sha256": _digest(args.predictions)},
        "flagged_example_ids": flagged,
    })
    print(f"judge: {len(assignments)} assignments, {len(flagged)} flagged -> {out_dir}")
    _check_flag_budget(len(flagged), args.max_flagged)
    return EXIT_OK


def _report_to_dict(report: MetricsReport) -> dict:
    return {
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "aggregation": report.aggregation,
        "n_examples": len(report.per_example),
        "flags": list(report.flags),
        "per_example": [
            {"example_id": m.example_id, "n_gold": m.n_gold, "n_pred": m.n_pred, "tp": m.tp}
            for m in report.per_example
        ],
    }


def _cmd_score(args) -> int:
    dataset = load_dataset(args.dataset)
    results = [record_to_result(r) for r in curation_mod.load_jsonl(args.predictions)]
    if args.binary:
        by_id = dataset.by_id()
        pred_labels, gold_labels = [], []
        for result in results:
            example = by_id.get(result.example_id)
            if example is None:
                raise DataValidationError(
                    f"prediction for unknown example {result.example_id!r}"
                )
            pred_labels.append(result.derived_binary)
            gold_labels.append(example.gold_label)
        binary = score_binary(pred_labels, gold_labels)
        payload = {"precision": binary.precision, "recall": binary.recall,
                   "f1": binary.f1, "mode": "binary", "n_examples": len(results)}
    else:
        if not args.assignments:
            raise UsageError("score requires --assignments (or --binary)")
        assignments = [
            record_to_assignment(r) for r in curation_mod.load_jsonl(args.assignments)
        ]
        judged_ids = {a.example_id for a in assignments}
        flagged = [r.example_id for r in results if r.example_id not in judged_ids]
        report = score_run(dataset, results, assignments,
                           aggregation=args.aggregation, flagged=flagged)
        payload = _report_to_dict(report)
    text = json.dumps(payload, indent=2, ensure_ascii=False) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_select_variant(args) -> int:
    reports = {}
    for spec in args.report:
        if "=" not in spec:
            raise UsageError(f"--report expects name=path, got {spec!r}")
        name, path = spec.split("=", 1)
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        reports[name] = MetricsReport(
            precision=payload["precision"], recall=payload["recall"],
            f1=payload["f1"], aggregation=payload.get("aggregation", "micro"),
            per_example=(),
        )
    print(select_prompt_variant(reports))
    return EXIT_OK


def _cmd_select_threshold(args) -> int:
    scores_by_id = _load_scores(args.scores)
    assert scores_by_id is not None
    if args.labels:
        labels_by_id = json.loads(Path(args.labels).read_text(encoding="utf-8"))
    else:
        if not args.dataset:
            raise UsageError("select-threshold needs --labels or --dataset")
        labels_by_id = {ex.id: ex.gold_label for ex in load_dataset(args.dataset)}
    missing = sorted(set(scores_by_id) - set(labels_by_id))
    if missing:
        raise DataValidationError(f"no labels for scored ids: {missing}")
    ids = sorted(scores_by_id)
    threshold = select_threshold(
        [scores_by_id[i] for i in ids], [labels_by_id[i] for i in ids]
    )
    print(threshold)
    return EXIT_OK


def _cmd_curate_generate(args) -> int:
    dataset = _load_split(args)
    gateway = _gateway(args)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    flagged = []
    candidates = []
    for example in dataset:
        if example.gold_label != "inconsistent" and args.inconsistent_only:
            continue
        try:
            candidates.extend(
                curation_mod.generate_candidates(
                    example, args.model, gateway,
                    temperature=args.temperature, max_tokens=args.max_tokens,
                )
            )
        except ParseError:
            flagged.append(example.id)
    curation_mod.save_jsonl(
        (curation_mod.candidate_to_record(c) for c in candidates), out_path
    )
    if args.flagged_out:
        Path(args.flagged_out).write_text(
            json.dumps(flagged, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    print(f"curate generate: {len(candidates)} candidates, {len(flagged)} flagged")
    _check_flag_budget(len(flagged), args.max_flagged)
    return EXIT_OK


def _cmd_curate_export(args) -> int:
    dataset = load_dataset(args.dataset)
    candidates = [
        curation_mod.record_to_candidate(r) for r in curation_mod.load_jsonl(args.candidates)
    ]
    decisions = [
        curation_mod.record_to_decision(r) for r in curation_mod.load_jsonl(args.decisions)
    ]
    enriched, filtered = curation_mod.apply_decisions(candidates, decisions, dataset)
    save_dataset(enriched, args.out)
    if args.filtered_out:
        Path(args.filtered_out).write_text(
            json.dumps(filtered, ensure_ascii=False) + "\n", encoding="utf-8"
        )
    print(f"curate export: {len(enriched)} examples kept, {len(filtered)} removed")
    return EXIT_OK


def _cmd_analyze_ptrue(args) -> int:
    gateway = _gateway(args)
    probes = []
    for record in curation_mod.load_jsonl(args.probes):
        probe = analysis_mod.PTrueProbe(
            probe_id=record["probe_id"],
            question=record["question"],
            answer=record["answer"],
            n_samples_per_config=args.n,
            temperature=args.temperature,
        )
        probes.append(analysis_mod.estimate_p_true(probe, args.model, gateway))
    csv_text = analysis_mod.ptrue_results_csv(probes)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    sys.stdout.write(csv_text)
    return EXIT_OK


def _cmd_analyze_categories(args) -> int:
    labels = [
        analysis_mod.CategoryLabel(
            item_id=r["item_id"], kind=r["kind"], category=r["category"],
            labeler_id=r.get("labeler_id", ""),
        )
        for r in curation_mod.load_jsonl(args.labels)
    ]
    table = analysis_mod.tabulate_categories(labels)
    lines = ["category,count,percent"]
    lines += [
        f"{category},{table.counts[category]},{table.percentages[category]:.1f}"
        for category in table.counts
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _load_values(path: str) -> list[float]:
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("["):
        return [float(v) for v in json.loads(text)]
    if stripped.startswith("probe_id,"):
        values = []
        for line in text.splitlines()[1:]:
            if line.strip():
                values.append(float(line.split(",")[1]))
        return values
    return [float(line) for line in text.split() if line.strip()]


def _cmd_analyze_density(args) -> int:
    values = _load_values(args.values)
    csv_text = analysis_mod.export_density_csv(
        values, grid_points=args.grid_points, bandwidth=args.bandwidth
    )
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
    else:
        sys.stdout.write(csv_text)
    print(f"density: {len(values)} values -> {args.out or 'stdout'}", file=sys.stderr)
    return EXIT_OK


def _cmd_analyze_counterfactual(args) -> int:
    cases = [
        analysis_mod.CounterfactualCase(
            example_id=r["example_id"],
            original_summary=r["original_summary"],
            edited_summary=r["edited_summary"],
            edited_description=r["edited_description"],
            detected=bool(r["detected"]),
        )
        for r in curation_mod.load_jsonl(args.cases)
    ]
    rate = analysis_mod.counterfactual_rate(cases)
    print(f"{rate:.4f}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from halloc.service import serve

    serve(args.data_dir, host=args.host, port=args.port, ui_dir=args.ui_dir)
    return EXIT_OK


def _cmd_stats(args) -> int:
    stats = dataset_stats(_load_split(args))
    payload = {
        "n_total": stats.n_total,
        "n_inconsistent": stats.n_inconsistent,
        "n_consistent": stats.n_consistent,
        "n_errors_total": stats.n_errors_total,
        "per_split": stats.per_split,
        "errors_per_summary": {str(k): v for k, v in stats.errors_per_summary.items()},
    }
    sys.stdout.write(json.dumps(payload, indent=2, ensure_ascii=False) + "\n")
    return EXIT_OK


def _cmd_eval(args) -> int:
    code = _cmd_detect(args)
    if code != EXIT_OK:
        return code
    args.predictions = str(Path(args.out_dir) / "predictions.jsonl")
    code = _cmd_judge(args)
    if code != EXIT_OK:
        return code
    args.assignments = str(Path(args.out_dir) / "assignments.jsonl")
    args.out = str(Path(args.out_dir) / "report.json")
    args.binary = False
    return _cmd_score(args)


# -- parser --------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="halloc",
                     description="Localize and score factual inconsistencies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="run a detection strategy over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--variant", default="v1")
    p.add_argument("--split", default=None, choices=["dev", "test"])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--score-file", default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--decompose-template", default="pipeline.decompose")
    p.add_argument("--max-flagged", type=int, default=None)
    _add_cache_args(p)
    p.set_defaults(fn=_cmd_detect)

    p = sub.add_parser("judge", help="match predictions against gold descriptions")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--judge-model", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-flagged", type=int, default=None)
    _add_cache_args(p)
    p.set_defaults(fn=_cmd_judge)

    p = sub.add_parser("score", help="compute metrics from judged assignments")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--assignments", default=None)
    p.add_argument("--aggregation", default="micro", choices=["micro", "macro"])
    p.add_argument("--binary", action="store_true",
                   help="score example-level labels instead of localizations")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_score)

    p = sub.add_parser("select-variant", help="pick the best prompt variant by dev F1")
    p.add_argument("--report", action="append", required=True,
                   metavar="NAME=PATH")
    p.set_defaults(fn=_cmd_select_variant)

    p = sub.add_parser("select-threshold",
                       help="pick the classifier threshold maximizing dev F1")
    p.add_argument("--scores", required=True)
    p.add_argument("--dataset", default=None)
    p.add_argument("--labels", default=None)
    p.set_defaults(fn=_cmd_select_threshold)

    p = sub.add_parser("curate", help="candidate generation and dataset export")
    curate_sub = p.add_subparsers(dest="curate_command", required=True)
    g = curate_sub.add_parser("generate")
    g.add_argument("--dataset", required=True)
    g.add_argument("--model", required=True)
    g.add_argument("--split", default=None, choices=["dev", "test"])
    g.add_argument("--out", required=True)
    g.add_argument("--flagged-out", default=None)
    g.add_argument("--inconsistent-only", action="store_true")
    g.add_argument("--max-flagged", type=int, default=None)
    _add_cache_args(g)
    g.set_defaults(fn=_cmd_curate_generate)
    e = curate_sub.add_parser("export")
    e.add_argument("--dataset", required=True)
    e.add_argument("--candidates", required=True)
    e.add_argument("--decisions", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--filtered-out", default=None)
    e.set_defaults(fn=_cmd_curate_export)

    p = sub.add_parser("analyze", help="error-analysis instruments")
    analyze_sub = p.add_subparsers(dest="analyze_command", required=True)
    a = analyze_sub.add_parser("ptrue")
    a.add_argument("--probes", required=True)
    a.add_argument("--model", required=True)
    a.add_argument("--n", type=int, default=10)
    a.add_argument("--out", default=None)
    _add_cache_args(a)
    a.set_defaults(fn=_cmd_analyze_ptrue, temperature=1.0)
    a = analyze_sub.add_parser("categories")
    a.add_argument("--labels", required=True)
    a.add_argument("--out", default=None)
    a.set_defaults(fn=_cmd_analyze_categories)
    a = analyze_sub.add_parser("density")
    a.add_argument("--values", required=True)
    a.add_argument("--grid-points", type=int, default=201)
    a.add_argument("--bandwidth", type=float, default=None)
    a.add_argument("--out", default=None)
    a.set_defaults(fn=_cmd_analyze_density)
    a = analyze_sub.add_parser("counterfactual")
    a.add_argument("--cases", required=True)
    a.set_defaults(fn=_cmd_analyze_counterfactual)

    p = sub.add_parser("serve", help="run the review service")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8700)
    p.add_argument("--ui-dir", default=None)
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("stats", help="dataset descriptive statistics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", default=None, choices=["dev", "test"])
    p.set_defaults(fn=_cmd_stats)

    p = sub.add_parser("eval", help="detect, judge, and score in one run")
    p.add_argument("--dataset", required=True)
    p.add_argument("--strategy", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--judge-model", required=True)
    p.add_argument("--variant", default="v1")
    p.add_argument("--split", default=None, choices=["dev", "test"])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--score-file", default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--decompose-template", default="pipeline.decompose")
    p.add_argument("--aggregation", default="micro", choices=["micro", "macro"])
    p.add_argument("--max-flagged", type=int, default=None)
    _add_cache_args(p)
    p.set_defaults(fn=_cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataValidationError, CurationError, TemplateError, ParseError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except GatewayError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except FlaggedThresholdExceeded as exc:
        print(f"flag budget exceeded: {exc}", file=sys.stderr)
        return EXIT_FLAGGED
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
