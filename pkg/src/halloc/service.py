"""HTTP facade for human review sessions: candidate review, match auditing,
category labeling, and probe authoring. File-backed and append-only."""

from __future__ import annotations

import json
import os
import threading
import uuid
from pathlib import Path

from fastapi import Body, FastAPI, Header, HTTPException, Query
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles

from halloc.analysis import CategoryLabel
from halloc.curation import VERDICTS, load_jsonl, record_to_candidate
from halloc.data import load_dataset
from halloc.errors import DataValidationError, HallocError
from halloc.judge import MatchAssignment, assignment_to_record
from halloc.prompts import get_template

SESSION_KINDS = ("candidate_review", "match_audit", "category_labeling", "probe_authoring")

# key field identifying one reviewable item, per session kind
_ITEM_KEYS = {
    "candidate_review": "candidate_id",
    "match_audit": "example_id",
    "category_labeling": "item_id",
    "probe_authoring": "probe_id",
}


class SessionStore:
    """One directory per session: meta.json, items.jsonl, decisions.jsonl.
    Decision writes are serialized per session and fsynced before returning."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _dir(self, session_id: str) -> Path:
        return self.root / session_id

    def create(self, kind: str, dataset_path: str | None, items_path: str) -> dict:
        if kind not in SESSION_KINDS:
            raise DataValidationError(f"kind must be one of {SESSION_KINDS}, got {kind!r}")
        items = load_jsonl(items_path)
        key_field = _ITEM_KEYS[kind]
        context: dict[str, dict] = {}
        if kind == "candidate_review":
            if not dataset_path:
                raise DataValidationError("candidate_review sessions need a dataset_path")
            dataset = load_dataset(dataset_path)
            by_id = dataset.by_id()
            for record in items:
                candidate = record_to_candidate(record)
                example = by_id.get(candidate.example_id)
                if example is None:
                    raise DataValidationError(
                        f"candidate {candidate.candidate_id} references unknown "
                        f"example {candidate.example_id!r}"
                    )
                context[candidate.candidate_id] = {
                    "document": example.document,
                    "summary": example.summary,
                }
        for record in items:
            if key_field not in record:
                raise DataValidationError(f"item record lacks {key_field!r}: {record}")
        session_id = uuid.uuid4().hex[:12]
        sdir = self._dir(session_id)
        sdir.mkdir(parents=True)
        meta = {
            "session_id": session_id,
            "kind": kind,
            "dataset_path": dataset_path,
            "items_path": str(items_path),
        }
        (sdir / "meta.json").write_text(json.dumps(meta, ensure_ascii=False), "utf-8")
        with (sdir / "items.jsonl").open("w", encoding="utf-8") as fh:
            for record in items:
                if kind == "candidate_review":
                    record = {**record, **context[record["candidate_id"]]}
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        (sdir / "decisions.jsonl").touch()
        return self.descriptor(session_id)

    def _meta(self, session_id: str) -> dict:
        path = self._dir(session_id) / "meta.json"
        if not path.exists():
            raise KeyError(session_id)
        return json.loads(path.read_text("utf-8"))

    def items(self, session_id: str) -> list[dict]:
        return load_jsonl(self._dir(session_id) / "items.jsonl")

    def decisions(self, session_id: str) -> list[dict]:
        return load_jsonl(self._dir(session_id) / "decisions.jsonl")

    def list_ids(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if (p / "meta.json").exists()
        )

    def descriptor(self, session_id: str) -> dict:
        meta = self._meta(session_id)
        items = self.items(session_id)
        decisions = self.decisions(session_id)
        key_field = _ITEM_KEYS[meta["kind"]]
        decided_keys = {d[key_field] for d in decisions}
        return {
            "session_id": session_id,
            "kind": meta["kind"],
            "dataset_path": meta.get("dataset_path"),
            "progress": {
                "decided": sum(1 for i in items if i[key_field] in decided_keys),
                "total": len(items),
            },
        }

    def next_item(self, session_id: str, annotator: str) -> dict | None:
        meta = self._meta(session_id)
        key_field = _ITEM_KEYS[meta["kind"]]
        done_by_annotator = {
            d[key_field] for d in self.decisions(session_id)
            if d.get("annotator_id") == annotator
        }
        for item in self.items(session_id):
            if item[key_field] not in done_by_annotator:
                return item
        return None

    def append_decision(self, session_id: str, record: dict) -> None:
        path = self._dir(session_id) / "decisions.jsonl"
        with self._lock(session_id):
            with path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, ensure_ascii=False) + "\n")
                fh.flush()
                os.fsync(fh.fileno())

    # -- decision validation per kind ------------------------------------

    def validate_decision(self, session_id: str, body: dict, annotator: str) -> dict:
        meta = self._meta(session_id)
        kind = meta["kind"]
        key_field = _ITEM_KEYS[kind]
        key = body.get(key_field)
        items_by_key = {i[key_field]: i for i in self.items(session_id)}
        if key not in items_by_key:
            raise DataValidationError(f"unknown {key_field}: {key!r}")
        item = items_by_key[key]
        if kind == "candidate_review":
            verdict = body.get("verdict")
            if verdict not in VERDICTS:
                raise DataValidationError(f"verdict must be one of {VERDICTS}")
            note = body.get("note")
            if verdict == "undecidable" and not (note and note.strip()):
                raise DataValidationError("undecidable verdicts require a note")
            return {
                "candidate_id": key,
                "annotator_id": annotator,
                "verdict": verdict,
                "note": note,
                "timestamp": body.get("timestamp", 0.0),
            }
        if kind == "match_audit":
            assignment = body.get("assignment")
            if not isinstance(assignment, dict):
                raise DataValidationError("match decisions need an assignment object")
            predicted_ids = {p["id"] for p in item["predicted"]}
            gold_ids = {g["id"] for g in item["gold"]}
            if set(assignment) != predicted_ids:
                raise DataValidationError(
                    f"assignment keys {sorted(assignment)} must equal predicted ids "
                    f"{sorted(predicted_ids)}"
                )
            for pred, gold in assignment.items():
                if gold is not None and gold not in gold_ids:
                    raise DataValidationError(f"{pred!r} maps to unknown gold id {gold!r}")
            return {
                "example_id": key,
                "annotator_id": annotator,
                "assignment": assignment,
            }
        if kind == "category_labeling":
            label = CategoryLabel(
                item_id=key,
                kind=body.get("kind", item.get("kind", "")),
                category=body.get("category", ""),
                labeler_id=annotator,
            )
            return {
                "item_id": label.item_id,
                "kind": label.kind,
                "category": label.category,
                "annotator_id": annotator,
            }
        if kind == "probe_authoring":
            question = (body.get("question") or "").strip()
            answer = (body.get("answer") or "").strip()
            if not question or not answer:
                raise DataValidationError("probes need a non-empty question and answer")
            return {
                "probe_id": key,
                "question": question,
                "answer": answer,
                "annotator_id": annotator,
            }
        raise DataValidationError(f"unsupported session kind {kind!r}")

    # -- export -----------------------------------------------------------

    def export(self, session_id: str) -> str:
        meta = self._meta(session_id)
        kind = meta["kind"]
        key_field = _ITEM_KEYS[kind]
        decisions = self.decisions(session_id)
        # last decision per (item, annotator) wins
        resolved: dict[tuple[str, str], dict] = {}
        for record in decisions:
            resolved[(record[key_field], record.get("annotator_id", ""))] = record
        if kind == "candidate_review":
            undecided = {
                i[key_field] for i in self.items(session_id)
            } - {k for k, _ in resolved}
            if undecided:
                raise DataValidationError(
                    f"export blocked: undecided candidates remain ({len(undecided)})"
                )
        lines = []
        for (_, annotator), record in sorted(resolved.items()):
            if kind == "match_audit":
                assignment = MatchAssignment(
                    example_id=record["example_id"],
                    assignment={
                        k: (v if v is None else str(v))
                        for k, v in record["assignment"].items()
                    },
                    judge_model_id=f"human:{annotator}",
                    transcript_ref=None,
                )
                lines.append(json.dumps(assignment_to_record(assignment), ensure_ascii=False))
            else:
                lines.append(json.dumps(record, ensure_ascii=False))
        return "\n".join(lines) + ("\n" if lines else "")


def _annotator_or_400(header: str | None, query: str | None) -> str:
    annotator = header or query
    if not annotator:
        raise HTTPException(
            status_code=400,
            detail="annotator required (X-Annotator-Id header or ?annotator=)",
        )
    return annotator


def create_app(data_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="halloc review service")
    store = SessionStore(Path(data_dir) / "sessions")

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.get("/api/templates/{template_id}")
    def template_text(template_id: str) -> dict:
        """Prompt text for review clients (e.g. the matching instructions
        shown verbatim to human auditors)."""
        try:
            template = get_template(template_id)
        except HallocError:
            raise HTTPException(status_code=404, detail="no such template") from None
        return {
            "template_id": template.template_id,
            "body": template.body,
            "system_text": template.system_text,
        }

    @app.post("/api/sessions")
    def create_session(body: dict = Body(...)) -> dict:
        kind = body.get("kind")
        items_path = body.get("items_path")
        if not items_path:
            raise HTTPException(status_code=400, detail="items_path is required")
        try:
            return store.create(kind, body.get("dataset_path"), items_path)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=400, detail=f"unreadable path: {exc}") from exc
        except HallocError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    @app.get("/api/sessions")
    def list_sessions() -> list[dict]:
        return [store.descriptor(sid) for sid in store.list_ids()]

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        try:
            return store.descriptor(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="no such session") from None

    @app.get("/api/sessions/{session_id}/next")
    def next_item(
        session_id: str,
        annotator: str | None = Query(default=None),
        x_annotator_id: str | None = Header(default=None),
    ) -> dict:
        who = _annotator_or_400(x_annotator_id, annotator)
        try:
            item = store.next_item(session_id, who)
        except KeyError:
            raise HTTPException(status_code=404, detail="no such session") from None
        descriptor = store.descriptor(session_id)
        return {"done": item is None, "item": item, "progress": descriptor["progress"]}

    @app.post("/api/sessions/{session_id}/decisions")
    def post_decision(
        session_id: str,
        body: dict = Body(...),
        annotator: str | None = Query(default=None),
        x_annotator_id: str | None = Header(default=None),
    ) -> dict:
        who = _annotator_or_400(x_annotator_id, annotator)
        try:
            record = store.validate_decision(session_id, body, who)
        except KeyError:
            raise HTTPException(status_code=404, detail="no such session") from None
        except HallocError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        store.append_decision(session_id, record)
        return {"status": "ok", "progress": store.descriptor(session_id)["progress"]}

    @app.get("/api/sessions/{session_id}/export")
    def export(session_id: str) -> PlainTextResponse:
        try:
            content = store.export(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="no such session") from None
        except HallocError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return PlainTextResponse(content, media_type="application/x-ndjson")

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(
    data_dir: str | Path,
    host: str = "127.0.0.1",
    port: int = 8700,
    ui_dir: str | Path | None = None,
) -> None:
    import uvicorn

    uvicorn.run(create_app(data_dir, ui_dir=ui_dir), host=host, port=port)
