"""HTTP review API.

A small FastAPI app over a Store. Runs execute synchronously inside
POST /api/runs; every error body is {error, message}.
"""

from __future__ import annotations

import logging
from pathlib import Path

from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from .backends import make_backend
from .codebook import resolve_code
from .coder import SessionPolicy, policy_to_dict
from .errors import BackendError, StoreError, UnknownLabelError, WorkbenchError
from .evaluation import evaluate_run, report_to_dict
from .prompting import compile_instructions
from .store import RunState, Store

log = logging.getLogger(__name__)


class ApiError(Exception):
    def __init__(self, status: int, error: str, message: str):
        super().__init__(message)
        self.status = status
        self.error = error
        self.message = message


class RunRequest(BaseModel):
    lesson_id: str
    config_hash: str
    backend: str = "mock-keyword"
    batch_size: int = 20
    reset_between_batches: bool = True
    verify_rules_first: bool = False


class AdjudicationRequest(BaseModel):
    turn_id: int
    codes: list[str]
    note: str = ""


def _error_body(error: str, message: str) -> dict:
    return {"error": error, "message": message}


def create_app(store: Store, static_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="classcoder review API", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=_error_body(exc.error, exc.message))

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422, content=_error_body("validation", str(exc)))

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request: Request, exc: StarletteHTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content=_error_body("http_error", str(exc.detail)),
        )

    @app.exception_handler(WorkbenchError)
    async def _workbench_error(request: Request, exc: WorkbenchError):
        log.exception("unhandled store failure")
        return JSONResponse(status_code=500, content=_error_body("internal", str(exc)))

    def load_state(run_id: str) -> RunState:
        if not store.run_dir(run_id).exists():
            raise ApiError(404, "unknown_run", f"no run {run_id!r}")
        return store.replay_run(run_id)

    def load_gold_or_none(lesson_id: str, codebook):
        if not store.has_gold(lesson_id):
            return None
        return store.load_gold(lesson_id, codebook)

    @app.get("/api/lessons")
    def list_lessons():
        rows = []
        for lesson_id in store.list_lessons():
            lesson = store.load_lesson(lesson_id)
            rows.append(
                {
                    "lesson_id": lesson.lesson_id,
                    "subject": lesson.subject,
                    "turn_count": len(lesson.turns),
                    "has_gold": store.has_gold(lesson_id),
                }
            )
        return rows

    @app.get("/api/lessons/{lesson_id}/turns")
    def lesson_turns(
        lesson_id: str,
        from_: int | None = Query(default=None, alias="from"),
        to: int | None = None,
    ):
        if not store.lesson_path(lesson_id).exists():
            raise ApiError(404, "unknown_lesson", f"no lesson {lesson_id!r}")
        lesson = store.load_lesson(lesson_id)
        return [
            {"turn_id": t.turn_id, "speaker": t.speaker, "text": t.text}
            for t in lesson.turns
            if (from_ is None or t.turn_id >= from_) and (to is None or t.turn_id <= to)
        ]

    @app.get("/api/configs")
    def list_configs():
        return store.list_configs()

    @app.get("/api/runs")
    def list_runs():
        rows = []
        for run_id in store.list_runs():
            state = store.replay_run(run_id)
            rows.append(
                {
                    "run_id": run_id,
                    "lesson_id": state.run.lesson_id,
                    "status": state.run.status,
                    "turn_count": len(state.run.codings),
                }
            )
        return rows

    @app.post("/api/runs")
    def create_run(body: RunRequest):
        if not store.lesson_path(body.lesson_id).exists():
            raise ApiError(404, "unknown_lesson", f"no lesson {body.lesson_id!r}")
        if not store.config_path(body.config_hash).exists():
            raise ApiError(404, "unknown_config", f"no config {body.config_hash!r}")
        lesson = store.load_lesson(body.lesson_id)
        config = store.load_config(body.config_hash)
        try:
            backend = make_backend(body.backend)
            policy = SessionPolicy(
                batch_size=body.batch_size,
                reset_between_batches=body.reset_between_batches,
                verify_rules_first=body.verify_rules_first,
            )
        except (BackendError, ValueError) as exc:
            raise ApiError(422, "validation", str(exc))
        document = compile_instructions(config)
        run = store.execute_run(lesson, document, backend, policy, config=config)
        return {"run_id": run.run_id, "status": run.status}

    @app.get("/api/runs/{run_id}")
    def run_detail(run_id: str):
        state = load_state(run_id)
        run = state.run
        parsed = sum(1 for e in run.event_log if "codings" in e)
        return {
            "run_id": run.run_id,
            "lesson_id": run.lesson_id,
            "config_hash": run.config_hash,
            "current_config_hash": state.current_config_hash,
            "backend_id": run.backend_id,
            "status": run.status,
            "policy": policy_to_dict(run.policy),
            "batches_sent": len(run.event_log),
            "batches_parsed": parsed,
            "turns_coded": len(run.codings),
            "failure": run.failure,
            "failed_batch": run.failed_batch,
            "pending_adjudications": len(state.pending),
            "lineage": state.lineage,
        }

    @app.get("/api/runs/{run_id}/results")
    def run_results(run_id: str):
        state = load_state(run_id)
        run = state.run
        lesson = store.load_lesson(run.lesson_id)
        codebook = store.load_config(run.config_hash).codebook
        gold = load_gold_or_none(run.lesson_id, codebook)
        rows = []
        for coding in run.codings:
            turn = lesson.turn(coding.turn_id)
            adjudicated = state.adjudications.get(coding.turn_id)
            rows.append(
                {
                    "turn_id": coding.turn_id,
                    "speaker": turn.speaker,
                    "text": turn.text,
                    "predicted_codes": sorted(coding.predicted),
                    "justification": coding.justification,
                    "gold_codes": sorted(gold.labels[coding.turn_id]) if gold else None,
                    "adjudicated_codes": sorted(adjudicated) if adjudicated else None,
                }
            )
        return rows

    @app.post("/api/runs/{run_id}/adjudications")
    def adjudicate(run_id: str, body: AdjudicationRequest):
        state = load_state(run_id)
        run = state.run
        if run.status != "complete":
            raise ApiError(409, "run_not_complete", f"run {run_id} is {run.status}")
        predicted = {c.turn_id: c.predicted for c in run.codings}
        if body.turn_id not in predicted:
            raise ApiError(404, "unknown_turn", f"run has no coding for turn {body.turn_id}")
        codebook = store.load_config(run.config_hash).codebook
        labels = [label for label in body.codes if label.strip()]
        if not labels:
            raise ApiError(422, "validation", "empty code list")
        try:
            codes = sorted({resolve_code(codebook, label).id for label in labels})
        except UnknownLabelError as exc:
            raise ApiError(422, "validation", str(exc))
        if "UC" in codes and len(codes) > 1:
            raise ApiError(422, "validation", "UC cannot be combined with other codes")
        payload = {
            "turn_id": body.turn_id,
            "codes": codes,
            "note": body.note,
            "agent_codes": sorted(predicted[body.turn_id]),
        }
        store.append_event(run_id, "adjudication", payload)
        return payload

    @app.post("/api/runs/{run_id}/feedback/compile")
    def compile_feedback(run_id: str):
        state = load_state(run_id)
        if state.run.status != "complete":
            raise ApiError(409, "run_not_complete", f"run {run_id} is {state.run.status}")
        if not state.pending:
            raise ApiError(422, "no_pending_adjudications", "no adjudications to compile")
        try:
            new_hash = store.compile_feedback(run_id)
        except WorkbenchError as exc:
            raise ApiError(422, "feedback_rejected", str(exc))
        return {"new_config_hash": new_hash}

    @app.get("/api/runs/{run_id}/metrics")
    def run_metrics(run_id: str, mode: str = "exact"):
        if mode not in ("exact", "overlap"):
            raise ApiError(422, "validation", f"unknown match mode {mode!r}")
        state = load_state(run_id)
        run = state.run
        if run.status != "complete":
            raise ApiError(409, "run_not_complete", f"run {run_id} is {run.status}")
        codebook = store.load_config(run.config_hash).codebook
        gold = load_gold_or_none(run.lesson_id, codebook)
        if gold is None:
            raise ApiError(422, "no_gold", f"lesson {run.lesson_id!r} has no gold labels")
        report = evaluate_run(gold, run, mode=mode, codebook=codebook)
        return report_to_dict(report)

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
