"""HTTP API over the attendance core, plus the live event stream.

Every endpoint delegates 1:1 to the core modules and inherits their
contracts; domain errors map onto statuses: validation 400, forbidden 403,
not found 404, conflicts (tag already bound, session already open/closed)
409. The event stream is server-sent events with per-session sequence
numbers: a snapshot first, then the tail after the client's last-seen
sequence number.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import logging
import time
from pathlib import Path
from typing import Any, Callable, Optional

from fastapi import Depends, FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, RedirectResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from ..attendance import (
    AttendanceService,
    NoPendingRecord,
    SessionAlreadyOpen,
    SessionClosed,
    StudentFields,
)
from ..protocol import TagId
from ..reporting import export_report_csv
from ..simulator import ReaderConfig
from ..store import (
    Actor,
    CorruptStore,
    Forbidden,
    NotFound,
    RegistryStore,
    Role,
    StoreError,
    TagAlreadyBound,
    ValidationError,
)
from .bridge import ReaderBridge
from .config import GatewayConfig
from .events import EventHub, sse_format
from .wire import record_json, session_json, student_json

log = logging.getLogger(__name__)

HEARTBEAT_S = 15.0

_STATUS_BY_ERROR: list[tuple[type, int]] = [
    (ValidationError, 400),
    (Forbidden, 403),
    (NotFound, 404),
    (TagAlreadyBound, 409),
    (SessionAlreadyOpen, 409),
    (SessionClosed, 409),
    (NoPendingRecord, 409),
    (CorruptStore, 500),
]


class SessionCreate(BaseModel):
    course: str
    stream: str = ""
    trimester: str = ""


class StudentCreate(BaseModel):
    name: str
    course: str = ""
    stream: str = ""
    trimester: str = ""
    tag_id: str
    photo_ref: Optional[str] = None


class StudentPatch(BaseModel):
    name: Optional[str] = None
    course: Optional[str] = None
    stream: Optional[str] = None
    trimester: Optional[str] = None
    tag_id: Optional[str] = None
    photo_ref: Optional[str] = None
    active: Optional[bool] = None


def _parse_tag(text: str) -> TagId:
    try:
        return TagId.parse(text)
    except ValueError as exc:
        raise ValidationError(str(exc)) from None


def build_app(
    config: GatewayConfig,
    *,
    store: Optional[RegistryStore] = None,
    clock: Callable[[], float] = time.time,
) -> FastAPI:
    """Assemble the gateway; pass ``store`` / ``clock`` to control them in tests."""

    owns_store = store is None

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        nonlocal store
        if store is None:
            store = RegistryStore(config.store_dir)
        app.state.store = store
        app.state.service = AttendanceService(store, debounce_s=config.debounce_s)
        app.state.hub = EventHub()
        app.state.clock = clock
        bridge_task = None
        if config.reader is not None:
            app.state.bridge = ReaderBridge(
                app.state.service,
                app.state.hub,
                config.reader,
                reader_cfg=ReaderConfig(
                    per_read_seconds=config.per_read_seconds,
                    anti_collision=config.anti_collision,
                    beacon_interval_s=config.beacon_interval_s,
                ),
                clock=clock,
                sim_speed=config.sim_speed,
            )
            bridge_task = asyncio.create_task(app.state.bridge.run())
        try:
            yield
        finally:
            if bridge_task is not None:
                bridge_task.cancel()
                with contextlib.suppress(asyncio.CancelledError):
                    await bridge_task
            if owns_store:
                store.close()

    app = FastAPI(title="tagroll", lifespan=lifespan)

    # -- errors ---------------------------------------------------------------

    @app.exception_handler(StoreError)
    async def _store_error(request: Request, exc: StoreError) -> JSONResponse:
        for klass, status in _STATUS_BY_ERROR:
            if isinstance(exc, klass):
                return JSONResponse(
                    {"error": exc.__class__.__name__, "detail": str(exc)},
                    status_code=status,
                )
        return JSONResponse(
            {"error": exc.__class__.__name__, "detail": str(exc)}, status_code=500
        )

    @app.exception_handler(RequestValidationError)
    async def _request_invalid(request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            {"error": "ValidationError", "detail": exc.errors()}, status_code=400
        )

    # -- auth -------------------------------------------------------------------

    def current_actor(request: Request) -> Actor:
        if not config.tokens:
            return Actor("operator", Role.OPERATOR)
        token = None
        auth = request.headers.get("authorization", "")
        if auth.lower().startswith("bearer "):
            token = auth[7:].strip()
        if token is None:
            token = request.query_params.get("token")
        for role, expected in config.tokens.items():
            if token == expected:
                return Actor(role, Role(role))
        return None  # handled by require_actor

    def require_actor(request: Request) -> Actor:
        actor = current_actor(request)
        if actor is None:
            raise _Unauthorized()
        return actor

    class _Unauthorized(Exception):
        pass

    @app.exception_handler(_Unauthorized)
    async def _unauthorized(request: Request, exc: _Unauthorized) -> JSONResponse:
        return JSONResponse(
            {"error": "Unauthorized", "detail": "missing or invalid token"},
            status_code=401,
        )

    # -- helpers ------------------------------------------------------------------

    def svc() -> AttendanceService:
        return app.state.service

    def hub() -> EventHub:
        return app.state.hub

    def session_payload(session_id: str) -> dict[str, Any]:
        session = app.state.store.get_session(session_id)
        records = app.state.store.records_for_session(session_id)
        return {
            "session": session_json(session),
            "records": [record_json(r, app.state.store) for r in records],
            "corrupt_frames": svc().corrupt_count(session_id),
        }

    # -- routes ---------------------------------------------------------------------

    @app.get("/healthz")
    async def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    async def open_session(
        body: SessionCreate, actor: Actor = Depends(require_actor)
    ) -> dict[str, Any]:
        now = app.state.clock()
        try:
            session = svc().open_session(
                body.course, body.stream, body.trimester, now, actor=actor
            )
        except SessionAlreadyOpen as exc:
            # surface the existing session so a console can attach to it
            existing = next(
                (s for s in app.state.store.open_sessions() if s.course == body.course),
                None,
            )
            return JSONResponse(
                {
                    "error": "SessionAlreadyOpen",
                    "detail": str(exc),
                    "session": session_json(existing) if existing else None,
                },
                status_code=409,
            )
        hub().publish(session.id, "session_open", at_s=now, session_info=session_json(session))
        return session_json(session)

    @app.post("/sessions/{session_id}/close")
    async def close_session(
        session_id: str, actor: Actor = Depends(require_actor)
    ) -> dict[str, Any]:
        now = app.state.clock()
        session = svc().close_session(session_id, now, actor=actor)
        hub().publish(session_id, "session_closed", at_s=now, session_info=session_json(session))
        return session_json(session)

    @app.get("/sessions/{session_id}")
    async def get_session(
        session_id: str, actor: Actor = Depends(require_actor)
    ) -> dict[str, Any]:
        return session_payload(session_id)

    @app.get("/sessions/{session_id}/report.csv")
    async def report_csv(session_id: str, actor: Actor = Depends(require_actor)) -> Response:
        data = export_report_csv(app.state.store, session_id, app.state.clock())
        return Response(
            content=data,
            media_type="text/csv; charset=utf-8",
            headers={
                "Content-Disposition": f'attachment; filename="{session_id}.csv"'
            },
        )

    @app.post("/students", status_code=201)
    async def create_student(
        body: StudentCreate, actor: Actor = Depends(require_actor)
    ) -> dict[str, Any]:
        now = app.state.clock()
        tag_id = _parse_tag(body.tag_id)
        fields = StudentFields(
            name=body.name,
            course=body.course,
            stream=body.stream,
            trimester=body.trimester,
            photo_ref=body.photo_ref,
        )
        # registration completes the newest pending attendance for this tag
        for session in reversed(app.state.store.open_sessions()):
            record = app.state.store.get_record(session.id, tag_id)
            if record is not None and record.student_ref is None:
                updated = svc().complete_registration(
                    session.id, tag_id, fields, now, actor=actor
                )
                student = app.state.store.lookup_by_tag(tag_id)
                hub().publish(
                    session.id,
                    "registered",
                    at_s=now,
                    tag_id=tag_id.canonical,
                    student=student_json(student),
                    record=record_json(updated, app.state.store),
                )
                return {
                    "student": student_json(student),
                    "record": record_json(updated, app.state.store),
                }
        student = app.state.store.put_student(
            actor,
            name=fields.name,
            course=fields.course,
            stream=fields.stream,
            trimester=fields.trimester,
            tag_id=tag_id,
            now=now,
            photo_ref=fields.photo_ref,
        )
        return {"student": student_json(student), "record": None}

    @app.patch("/students/{student_id}")
    async def patch_student(
        student_id: str, body: StudentPatch, actor: Actor = Depends(require_actor)
    ) -> dict[str, Any]:
        changes = body.model_dump(exclude_unset=True)
        if "tag_id" in changes:
            changes["tag_id"] = _parse_tag(changes["tag_id"])
        student = app.state.store.update_student(
            actor, student_id, changes, app.state.clock()
        )
        return student_json(student)

    @app.get("/events")
    async def events(
        request: Request, session: str, actor: Actor = Depends(require_actor)
    ) -> StreamingResponse:
        app.state.store.get_session(session)  # 404 before the stream starts
        after = 0
        last_event_id = request.headers.get("last-event-id")
        if last_event_id and last_event_id.isdigit():
            after = int(last_event_id)
        elif request.query_params.get("after", "").isdigit():
            after = int(request.query_params["after"])

        async def stream():
            queue = hub().subscribe(session)
            try:
                # snapshot and journal copy are atomic: no awaits in between
                journal = hub().journal(session)
                last_sent = min(after, len(journal))
                snapshot = {
                    "v": 1,
                    "kind": "snapshot",
                    **session_payload(session),
                    "last_seq": len(journal),
                }
                yield sse_format(json.dumps(snapshot), event="snapshot")
                for event in journal[last_sent:]:
                    yield sse_format(
                        json.dumps(event), event=event["kind"], event_id=event["seq"]
                    )
                    last_sent = event["seq"]
                while True:
                    try:
                        event = await asyncio.wait_for(queue.get(), timeout=HEARTBEAT_S)
                    except asyncio.TimeoutError:
                        yield ": keep-alive\n\n"
                        continue
                    if event["seq"] <= last_sent:
                        continue
                    yield sse_format(
                        json.dumps(event), event=event["kind"], event_id=event["seq"]
                    )
                    last_sent = event["seq"]
            finally:
                hub().unsubscribe(session, queue)

        return StreamingResponse(
            stream(),
            media_type="text/event-stream",
            headers={"Cache-Control": "no-cache", "X-Accel-Buffering": "no"},
        )

    # -- operator console (static assets, optional) ---------------------------------

    static_dir = _find_static_dir(config)
    if static_dir is not None:
        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="console")

        @app.get("/", include_in_schema=False)
        async def index() -> RedirectResponse:
            return RedirectResponse("/ui/")

        log.info("operator console served from %s", static_dir)
    else:

        @app.get("/", include_in_schema=False)
        async def index_json() -> dict[str, str]:
            return {"service": "tagroll", "console": "not built"}

    return app


def _find_static_dir(config: GatewayConfig) -> Optional[str]:
    if config.static_dir:
        path = Path(config.static_dir)
        if not path.is_dir():
            raise FileNotFoundError(f"static dir {path} does not exist")
        return str(path)
    repo_dist = Path(__file__).resolve().parents[3] / "frontend" / "dist"
    if repo_dist.is_dir():
        return str(repo_dist)
    return None
