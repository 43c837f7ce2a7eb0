"""HTTP facade over the tracing service.

All bodies are JSON with epoch-millisecond timestamps.  Ingestion
endpoints are open (collectors run unauthenticated inside forum pages);
query, analysis, export, and admin endpoints require a bearer token that
maps to an instructor or student principal.
"""

from __future__ import annotations

from typing import Mapping

from fastapi import Body, Depends, FastAPI, Header, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware

from .analysis import Window, reading_to_dict, summary_to_dict, timeline_to_dict
from .errors import (
    ActivityInUseError,
    DocumentParseError,
    ForumTraceError,
    InvalidWindowError,
    NonPositiveScaleError,
    ReadingOutsideWindowError,
    StructuringFailedError,
    UnauthorizedError,
    UnknownSessionError,
    UnsupportedFormatError,
    UseModelError,
)
from .exporters import parse_export_format, trace_to_dict
from .model import use_model_to_doc
from .repository import Principal, QueryFilter
from .service import TracingService, ack_to_dict

_MEDIA_TYPES = {
    "xml": "application/xml",
    "json": "application/json",
    "txt": "text/plain; charset=utf-8",
}


def _http_error(exc: ForumTraceError) -> HTTPException:
    if isinstance(exc, UnauthorizedError):
        return HTTPException(status_code=403, detail=str(exc))
    if isinstance(exc, UnknownSessionError):
        return HTTPException(status_code=404, detail=str(exc))
    if isinstance(exc, (StructuringFailedError, ActivityInUseError, UseModelError)):
        return HTTPException(status_code=422, detail=str(exc))
    if isinstance(
        exc,
        (
            InvalidWindowError,
            NonPositiveScaleError,
            ReadingOutsideWindowError,
            UnsupportedFormatError,
            DocumentParseError,
        ),
    ):
        return HTTPException(status_code=400, detail=str(exc))
    return HTTPException(status_code=400, detail=str(exc))


def build_app(service: TracingService) -> FastAPI:
    app = FastAPI(title="forumtrace ingest service", version="0.1.0")
    # collectors and the dashboard are served from forum origins, not ours
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def principal(authorization: str | None = Header(default=None)) -> Principal:
        if authorization is None or not authorization.startswith("Bearer "):
            raise HTTPException(status_code=401, detail="bearer token required")
        entry = service.config.principal_for(authorization.removeprefix("Bearer "))
        if entry is None:
            raise HTTPException(status_code=401, detail="unknown token")
        return entry

    def window(from_ms: int, to_ms: int) -> Window:
        try:
            return Window(from_ms=from_ms, to_ms=to_ms)
        except InvalidWindowError as exc:
            raise _http_error(exc) from exc

    # --- ingestion -------------------------------------------------------------

    @app.post("/api/v1/events/batch")
    def post_batch(doc: Mapping = Body(...)) -> dict:
        return ack_to_dict(service.handle_client_batch(doc))

    @app.post("/api/v1/events/server")
    def post_server_event(doc: Mapping = Body(...)) -> dict:
        return ack_to_dict(service.handle_server_event(doc))

    @app.post("/api/v1/sessions/{session_id}/finalize")
    def finalize(session_id: str) -> dict:
        try:
            return {"trace_id": service.finalize_session(session_id)}
        except ForumTraceError as exc:
            raise _http_error(exc) from exc

    # --- queries ---------------------------------------------------------------

    @app.get("/api/v1/traces")
    def get_traces(
        caller: Principal = Depends(principal),
        actor: str | None = None,
        activity: str | None = None,
        message_id: str | None = None,
        from_ms: int | None = None,
        to_ms: int | None = None,
    ) -> list[dict]:
        filter = QueryFilter(
            actor_id=actor,
            activity=activity,
            object_attr=("message_id", message_id) if message_id is not None else None,
            from_ms=from_ms,
            to_ms=to_ms,
        )
        try:
            stored = service.query_traces(filter, caller)
        except ForumTraceError as exc:
            raise _http_error(exc) from exc
        return [trace_to_dict(s.trace, s.quarantined) for s in stored]

    @app.get("/api/v1/analysis/readings")
    def get_readings(
        from_ms: int,
        to_ms: int,
        caller: Principal = Depends(principal),
        message_id: str | None = None,
    ) -> list[dict]:
        try:
            records = service.readings(window(from_ms, to_ms), caller, message_id)
        except ForumTraceError as exc:
            raise _http_error(exc) from exc
        return [reading_to_dict(r) for r in records]

    @app.get("/api/v1/analysis/lurkers")
    def get_lurkers(
        from_ms: int,
        to_ms: int,
        caller: Principal = Depends(principal),
    ) -> list[str]:
        try:
            return service.lurkers(window(from_ms, to_ms), caller)
        except ForumTraceError as exc:
            raise _http_error(exc) from exc

    @app.get("/api/v1/analysis/participation")
    def get_participation(
        from_ms: int,
        to_ms: int,
        caller: Principal = Depends(principal),
    ) -> list[dict]:
        try:
            summaries = service.participation(window(from_ms, to_ms), caller)
        except ForumTraceError as exc:
            raise _http_error(exc) from exc
        return [summary_to_dict(s) for s in summaries]

    @app.get("/api/v1/viz/spheres")
    def get_spheres(
        from_ms: int,
        to_ms: int,
        caller: Principal = Depends(principal),
        message_id: str | None = None,
        scale_k: float | None = None,
        scale_t: float | None = None,
    ) -> dict:
        try:
            timeline = service.sphere_timeline(
                window(from_ms, to_ms),
                caller,
                message_id=message_id,
                scale_k=scale_k,
                scale_t=scale_t,
            )
        except ForumTraceError as exc:
            raise _http_error(exc) from exc
        return timeline_to_dict(timeline)

    @app.get("/api/v1/export")
    def get_export(
        format: str,
        caller: Principal = Depends(principal),
        actor: str | None = None,
        activity: str | None = None,
        message_id: str | None = None,
        from_ms: int | None = None,
        to_ms: int | None = None,
    ) -> Response:
        filter = QueryFilter(
            actor_id=actor,
            activity=activity,
            object_attr=("message_id", message_id) if message_id is not None else None,
            from_ms=from_ms,
            to_ms=to_ms,
        )
        try:
            fmt = parse_export_format(format)
            data = service.export(filter, fmt, caller)
        except ForumTraceError as exc:
            raise _http_error(exc) from exc
        return Response(content=data, media_type=_MEDIA_TYPES[fmt.value])

    # --- admin -----------------------------------------------------------------

    @app.get("/api/v1/admin/activities")
    def get_model(caller: Principal = Depends(principal)) -> dict:
        try:
            if caller.role.value != "instructor":
                raise UnauthorizedError("model administration requires the instructor role")
            version = service.repository.current_model_version()
            doc = use_model_to_doc(service.repository.model_at(version).model)
        except ForumTraceError as exc:
            raise _http_error(exc) from exc
        return {"version": version, "model": doc}

    @app.post("/api/v1/admin/activities")
    def add_activity(
        doc: Mapping = Body(...), caller: Principal = Depends(principal)
    ) -> dict:
        from .model import use_model_from_doc

        try:
            parsed = use_model_from_doc(
                {"activities": [doc], "rules": [], "initial": []}
            )
            service.repository.admin_add_activity_type(
                caller, parsed.activities[0].name, parsed.activities[0].observables
            )
        except ForumTraceError as exc:
            raise _http_error(exc) from exc
        return {"version": service.repository.current_model_version()}

    @app.delete("/api/v1/admin/activities/{name}")
    def remove_activity(name: str, caller: Principal = Depends(principal)) -> dict:
        try:
            service.repository.admin_remove_activity_type(caller, name)
        except ForumTraceError as exc:
            raise _http_error(exc) from exc
        return {"version": service.repository.current_model_version()}

    @app.get("/api/v1/auth/whoami")
    def whoami(caller: Principal = Depends(principal)) -> dict:
        return {"role": caller.role.value, "actor_id": caller.actor_id}

    return app
