"""JSON-over-HTTP facade for sessions, solving, training, and scheduling.

Every endpoint delegates 1:1 to an engine operation. Mutations require the
caller's expected revision in the X-Expected-Revision header and either fully
apply (revision + 1) or leave the session untouched; stale revisions get 409
with the current revision. Solves that exceed the latency budget return 202
with a poll token instead of blocking the client.
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path

from fastapi import Body, FastAPI, Request, Response
from fastapi.responses import JSONResponse

from . import board as board_ops
from .board import BoardState, SessionManager
from .errors import DomainError, MatchboardError
from .model import MODE_PREFERENCE
from .scheduling import Meeting, ScheduleConfig, build_schedule
from .scoring import ScoreWeights, TrainedModel, build_score_matrix, train_employment_model
from .storage import (
    export_assignment,
    instance_from_doc,
    load_history,
    load_instance,
    load_meetings,
    load_model_file,
)

DEFAULT_LATENCY_BUDGET = 2.0

HTTP_STATUS_BY_CODE = {
    "SESSION_NOT_FOUND": 404,
    "JOB_NOT_FOUND": 404,
    "CONFLICT": 409,
}


class JobNotFoundError(MatchboardError):
    code = "JOB_NOT_FOUND"


def error_response(exc: MatchboardError) -> JSONResponse:
    status = HTTP_STATUS_BY_CODE.get(exc.code, 422)
    return JSONResponse(status_code=status, content={"error": exc.to_payload()})


class _Job:
    def __init__(self):
        self.token = uuid.uuid4().hex
        self.done = threading.Event()
        self.result: BoardState | None = None
        self.error: MatchboardError | None = None

    def run(self, fn) -> None:
        def target():
            try:
                self.result = fn()
            except MatchboardError as exc:
                self.error = exc
            except Exception as exc:  # pragma: no cover - defensive
                self.error = MatchboardError(f"internal error: {exc}")
            finally:
                self.done.set()

        threading.Thread(target=target, daemon=True).start()


def board_doc(state: BoardState) -> dict:
    placed_c: dict[str, int] = {}
    placed_r: dict[str, int] = {}
    members = {c.id: c.member_count for c in state.instance.cases}
    for cid, lid in state.placement.items():
        if lid is not None:
            placed_c[lid] = placed_c.get(lid, 0) + 1
            placed_r[lid] = placed_r.get(lid, 0) + members[cid]
    return {
        "session_id": state.session_id,
        "revision": state.revision,
        "total_score": state.total_score,
        "cross_ref_bonus": state.cross_ref_bonus,
        "allow_unassigned": state.allow_unassigned,
        "mode": state.instance.mode,
        "placement": dict(sorted(state.placement.items())),
        "locks": dict(sorted(state.locks.items())),
        "violations": sorted((v.to_doc() for v in state.violations),
                             key=lambda d: (d["kind"], d["location"], d.get("case", ""),
                                            d.get("dimension", ""))),
        "cases": [{
            "id": c.id,
            "name": c.display_name,
            "member_count": c.member_count,
            "employable_count": c.employable_count,
            "location": state.placement.get(c.id),
            "score": state.matrix.score_of(c.id, state.placement.get(c.id)),
            "compatible": state.matrix.compatible_pair(c.id, state.placement.get(c.id)),
            "locked": c.id in state.locks,
            "has_cross_refs": bool(c.cross_refs),
            "levels": list(c.attributes.levels),
        } for c in state.instance.cases],
        "locations": [{
            "id": l.id,
            "name": l.display_name,
            "case_capacity": state.effective_capacity(l.id)[0],
            "member_capacity": state.effective_capacity(l.id)[1],
            "placed_cases": placed_c.get(l.id, 0),
            "placed_members": placed_r.get(l.id, 0),
            "desired_levels": list(l.desired_levels),
        } for l in state.instance.locations],
    }


def _require(payload: dict, key: str):
    if key not in payload:
        raise DomainError(f"request body is missing {key!r}")
    return payload[key]


def create_app(data_dir=None, latency_budget: float = DEFAULT_LATENCY_BUDGET,
               ui_dir=None) -> FastAPI:
    app = FastAPI(title="matchboard", version="0.1.0")
    manager = SessionManager()
    jobs: dict[str, _Job] = {}
    data_root = Path(data_dir) if data_dir else None

    app.state.manager = manager

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    @app.exception_handler(MatchboardError)
    async def handle_engine_error(request: Request, exc: MatchboardError):
        return error_response(exc)

    def data_path(relative: str) -> Path:
        if data_root is None:
            raise DomainError("service started without a data directory")
        resolved = (data_root / relative).resolve()
        if not str(resolved).startswith(str(data_root.resolve())):
            raise DomainError(f"path {relative!r} escapes the data directory")
        return resolved

    def expected_revision(request: Request) -> int:
        raw = request.headers.get("X-Expected-Revision")
        if raw is None:
            raise DomainError("mutation requires the X-Expected-Revision header")
        try:
            return int(raw)
        except ValueError:
            raise DomainError(f"X-Expected-Revision must be an integer, got {raw!r}") from None

    def finish_or_poll(job: _Job):
        job.done.wait(timeout=latency_budget)
        if not job.done.is_set():
            jobs[job.token] = job
            return JSONResponse(status_code=202, content={
                "status": "pending", "token": job.token, "poll": f"/jobs/{job.token}"})
        if job.error is not None:
            raise job.error
        return {"session": board_doc(job.result)}

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(payload: dict = Body(...)):
        if "manifest" in payload:
            instance = load_instance(data_path(payload["manifest"]))
        else:
            instance = instance_from_doc(_require(payload, "instance"))
        if instance.mode == MODE_PREFERENCE:
            backend = ScoreWeights(alpha=float(payload.get("alpha", 0.5)))
        elif isinstance(payload.get("model"), dict):
            backend = TrainedModel.from_json(json.dumps(payload["model"]))
        elif "model" in payload:
            backend = load_model_file(data_path(payload["model"]))
        else:
            raise DomainError("outcome_predicted sessions need a 'model' (path or document)")

        def open_it() -> BoardState:
            matrix = build_score_matrix(instance, backend)
            state = board_ops.open_session(
                instance, matrix,
                cross_ref_bonus=float(payload.get("cross_ref_bonus", 0.0)),
                allow_unassigned=bool(payload.get("allow_unassigned", True)),
                session_id=payload.get("session_id"),
                actor=payload.get("actor", "api"))
            return manager.register(state)

        job = _Job()
        job.run(open_it)
        return finish_or_poll(job)

    @app.get("/jobs/{token}")
    def poll_job(token: str):
        job = jobs.get(token)
        if job is None:
            raise JobNotFoundError(f"no job {token!r}", token=token)
        if not job.done.is_set():
            return JSONResponse(status_code=202, content={
                "status": "pending", "token": token, "poll": f"/jobs/{token}"})
        del jobs[token]
        if job.error is not None:
            raise job.error
        return {"session": board_doc(job.result)}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return {"session": board_doc(manager.get(session_id))}

    @app.post("/sessions/{session_id}/move")
    def move(session_id: str, request: Request, payload: dict = Body(...)):
        revision = expected_revision(request)
        case = _require(payload, "case")
        target = payload.get("target")
        state = manager.mutate(session_id, revision,
                               lambda s: board_ops.apply_move(
                                   s, case, target, payload.get("actor", "api")))
        return {"session": board_doc(state)}

    @app.post("/sessions/{session_id}/lock")
    def lock(session_id: str, request: Request, payload: dict = Body(...)):
        revision = expected_revision(request)
        case = _require(payload, "case")
        state = manager.mutate(session_id, revision,
                               lambda s: board_ops.toggle_lock(
                                   s, case, payload.get("actor", "api")))
        return {"session": board_doc(state)}

    @app.post("/sessions/{session_id}/capacity")
    def capacity(session_id: str, request: Request, payload: dict = Body(...)):
        revision = expected_revision(request)
        state = manager.mutate(
            session_id, revision,
            lambda s: board_ops.adjust_capacity(
                s, _require(payload, "location"), _require(payload, "dimension"),
                int(_require(payload, "delta")), payload.get("actor", "api")))
        return {"session": board_doc(state)}

    @app.post("/sessions/{session_id}/reoptimize")
    def reoptimize_session(session_id: str, request: Request,
                           payload: dict = Body(default={})):
        revision = expected_revision(request)
        job = _Job()
        job.run(lambda: manager.mutate(
            session_id, revision,
            lambda s: board_ops.reoptimize(s, payload.get("actor", "api"))))
        return finish_or_poll(job)

    @app.get("/sessions/{session_id}/whatif")
    def whatif(session_id: str, case: str, target: str | None = None):
        state = manager.get(session_id)
        if target in (None, "", "UNASSIGNED"):
            target = None
        result = board_ops.whatif_score(state, case, target)
        return {
            "case": case,
            "target": target,
            "pair_score": result.pair_score,
            "projected_total": result.projected_total,
            "compatible": result.compatible,
            "reasons": list(result.reasons),
            "would_violate_capacity": result.would_violate_capacity,
        }

    @app.get("/sessions/{session_id}/crossrefs/{case}")
    def crossrefs(session_id: str, case: str):
        view = board_ops.cross_reference_view(manager.get(session_id), case)
        return {
            "case": view.case_id,
            "linked_cases": [{"id": l.target_id, "co_placed": l.co_placed}
                             for l in view.linked_cases],
            "linked_locations": [{"id": l.target_id, "co_placed": l.co_placed}
                                 for l in view.linked_locations],
        }

    @app.get("/sessions/{session_id}/export")
    def export(session_id: str, format: str = "csv"):
        state = manager.get(session_id)
        data = export_assignment(state, format)
        media = "text/csv" if format == "csv" else "application/json"
        return Response(content=data, media_type=media)

    @app.post("/train")
    def train(payload: dict = Body(...)):
        if "history_path" in payload:
            records = load_history(data_path(payload["history_path"]))
        else:
            rows = _require(payload, "history")
            try:
                from .scoring import HistoryRecord
                records = [HistoryRecord(
                    member_count=int(r["member_count"]),
                    large_family=bool(r["large_family"]),
                    single_parent=bool(r["single_parent"]),
                    language_match=bool(r["language_match"]),
                    location_id=str(r["location_id"]),
                    employed=int(r["employed"]),
                ) for r in rows]
            except (KeyError, TypeError, ValueError) as exc:
                raise DomainError(f"malformed history rows: {exc}") from exc
        model = train_employment_model(
            records,
            l2_strength=float(payload.get("l2_strength", 1e-4)),
            max_iter=int(payload.get("max_iter", 5000)),
            tolerance=float(payload.get("tolerance", 1e-6)))
        doc = json.loads(model.to_json())
        doc["meta"].pop("loss_trace", None)
        return {"model": doc}

    @app.post("/schedule")
    def schedule(payload: dict = Body(...)):
        if "meetings_path" in payload:
            meetings = load_meetings(data_path(payload["meetings_path"]))
        else:
            rows = _require(payload, "meetings")
            try:
                meetings = [Meeting(
                    client_id=str(r["client_id"]),
                    latitude=float(r["lat"]),
                    longitude=float(r["lon"]),
                    duration_minutes=int(r["duration_minutes"]),
                    selected=bool(r.get("selected", True)),
                ) for r in rows]
            except (KeyError, TypeError, ValueError) as exc:
                raise DomainError(f"malformed meeting rows: {exc}") from exc
        config = ScheduleConfig(
            days=int(_require(payload, "days")),
            min_per_day=int(payload.get("min_per_day", 0)),
            max_per_day=int(_require(payload, "max_per_day")),
            max_minutes_per_day=int(_require(payload, "max_minutes_per_day")))
        result = build_schedule(meetings, config, seed=int(payload.get("seed", 42)))
        return {
            "day_groups": [list(g) for g in result.day_groups],
            "cost": result.cost,
            "feasible": result.feasible,
        }

    return app


def serve(bind_address: str, data_dir=None, *, latency_budget: float = DEFAULT_LATENCY_BUDGET,
          ui_dir=None, log_level: str = "info") -> None:
    """Run the service with uvicorn; SIGINT/SIGTERM drain in-flight requests."""
    import uvicorn

    host, _, port = bind_address.rpartition(":")
    if not host:
        raise DomainError(f"bind address must be host:port, got {bind_address!r}")
    app = create_app(data_dir=data_dir, latency_budget=latency_budget, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=int(port), log_level=log_level)
