"""Ingest service core: batch/event intake, finalization, and the
role-gated query surface used by the HTTP layer and the CLI.

Sessions are ingested concurrently but each session's intake and
finalization are serialized behind a per-session lock; batch dedup is an
atomic ledger-plus-insert transaction, so at-least-once delivery from
clients is always safe.
"""

from __future__ import annotations

import hashlib
import threading
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Sequence

from .analysis import (
    ParticipationSummary,
    ReadingRecord,
    SphereTimeline,
    Window,
    build_sphere_timeline,
    detect_lurkers,
    extract_readings,
    participation_summary,
)
from .config import ServiceConfig
from .errors import (
    DuplicateEventError,
    InvalidEventError,
    SkewTooLargeError,
    StructuringError,
    StructuringFailedError,
    UnauthorizedError,
    UnknownSessionError,
)
from .exporters import ExportFormat
from .model import EventKind, EventSource, RawEvent, Side, parse_event_kind
from .repository import (
    Principal,
    QueryFilter,
    Role,
    StoredTrace,
    TraceRepository,
)
from .structuring import structure_trace
from .sync import (
    ClientBatch,
    Registration,
    adjust_clock,
    client_batch_from_doc,
    merge_streams,
)


class AckStatus(str, Enum):
    ACCEPTED = "accepted"
    DUPLICATE = "duplicate"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Ack:
    """Ingestion outcome; accepted_count is non-zero only on acceptance."""

    status: AckStatus
    accepted_count: int = 0
    message: str | None = None

    def __post_init__(self) -> None:
        if self.status is not AckStatus.ACCEPTED and self.accepted_count != 0:
            raise ValueError("only accepted acks may carry a count")


def ack_to_dict(ack: Ack) -> dict:
    return {
        "status": ack.status.value,
        "accepted_count": ack.accepted_count,
        "message": ack.message,
    }


def server_event_from_doc(doc: Mapping) -> RawEvent:
    """Parse the single-event wire document used by the server collector."""
    try:
        return RawEvent(
            event_id=doc["event_id"],
            session_id=doc["session_id"],
            actor_id=doc["actor_id"],
            source=EventSource(
                side=Side.SERVER, collector_id=doc.get("collector_id", "server")
            ),
            seq=int(doc.get("seq", 0)),
            timestamp_ms=int(doc["timestamp_ms"]),
            object_id=doc["object_id"],
            kind=parse_event_kind(doc["kind"]),
            activity_hint=doc.get("activity_hint"),
            attributes=dict(doc.get("attributes", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidEventError(f"malformed server event: {exc}") from exc


def _now_ms() -> int:
    return int(time.time() * 1000)


class TracingService:
    """Everything behind the HTTP facade, usable directly as a library."""

    def __init__(
        self, repository: TraceRepository, config: ServiceConfig | None = None
    ) -> None:
        self.repository = repository
        self.config = config if config is not None else ServiceConfig()
        self._locks: dict[str, threading.RLock] = {}
        self._locks_guard = threading.Lock()

    def _session_lock(self, session_id: str) -> threading.RLock:
        with self._locks_guard:
            lock = self._locks.get(session_id)
            if lock is None:
                lock = threading.RLock()
                self._locks[session_id] = lock
            return lock

    # --- intake ----------------------------------------------------------------

    def handle_client_batch(
        self,
        batch: ClientBatch | Mapping,
        received_at_ms: int | None = None,
    ) -> Ack:
        """Ingest one client buffer flush; retries with the same batch_id
        are acknowledged as duplicates without changing the store."""
        if not isinstance(batch, ClientBatch):
            try:
                batch = client_batch_from_doc(batch)
            except InvalidEventError as exc:
                return Ack(AckStatus.REJECTED, message=str(exc))
        known_actor = self.repository.session_actor(batch.session_id)
        if known_actor is not None and known_actor != batch.actor_id:
            return Ack(
                AckStatus.REJECTED,
                message=(
                    f"session {batch.session_id!r} belongs to actor "
                    f"{known_actor!r}, not {batch.actor_id!r}"
                ),
            )
        received = received_at_ms if received_at_ms is not None else _now_ms()
        try:
            adjusted = adjust_clock(batch, received, self.config.max_clock_skew_ms)
        except SkewTooLargeError as exc:
            return Ack(AckStatus.REJECTED, message=str(exc))
        with self._session_lock(batch.session_id):
            try:
                outcome = self.repository.ingest_client_batch(batch.batch_id, adjusted)
            except DuplicateEventError as exc:
                return Ack(AckStatus.REJECTED, message=str(exc))
            if outcome is Registration.DUPLICATE:
                return Ack(AckStatus.DUPLICATE)
            message = self._maybe_finalize_on_end(batch.session_id, adjusted)
        return Ack(AckStatus.ACCEPTED, accepted_count=len(adjusted), message=message)

    def handle_server_event(self, event: RawEvent | Mapping) -> Ack:
        """Persist one server-side event immediately; server events are
        authoritative and must carry an activity hint."""
        if not isinstance(event, RawEvent):
            try:
                event = server_event_from_doc(event)
            except InvalidEventError as exc:
                return Ack(AckStatus.REJECTED, message=str(exc))
        if event.source.side is not Side.SERVER:
            return Ack(AckStatus.REJECTED, message="server endpoint requires side=server")
        if event.activity_hint is None:
            return Ack(
                AckStatus.REJECTED,
                message=f"server event {event.event_id!r} lacks an activity_hint",
            )
        known_actor = self.repository.session_actor(event.session_id)
        if known_actor is not None and known_actor != event.actor_id:
            return Ack(
                AckStatus.REJECTED,
                message=(
                    f"session {event.session_id!r} belongs to actor "
                    f"{known_actor!r}, not {event.actor_id!r}"
                ),
            )
        with self._session_lock(event.session_id):
            if not self.repository.insert_server_event(event):
                return Ack(AckStatus.DUPLICATE)
            message = self._maybe_finalize_on_end(event.session_id, [event])
        return Ack(AckStatus.ACCEPTED, accepted_count=1, message=message)

    def _maybe_finalize_on_end(
        self, session_id: str, new_events: Sequence[RawEvent]
    ) -> str | None:
        if not any(e.kind is EventKind.SESSION_END for e in new_events):
            return None
        try:
            self._finalize_locked(session_id)
        except (StructuringFailedError, UnknownSessionError) as exc:
            return f"finalization deferred: {exc}"
        return None

    # --- finalization ------------------------------------------------------------

    def finalize_session(self, session_id: str) -> str:
        """Merge, structure, and store one session's trace.

        Idempotent: an unchanged session returns the same trace id without
        touching the store; new events cause a restructure under the model
        version the trace was first structured with.
        """
        with self._session_lock(session_id):
            return self._finalize_locked(session_id)

    def _finalize_locked(self, session_id: str) -> str:
        events = self.repository.events_for_session(session_id)
        if not events:
            raise UnknownSessionError(f"no events recorded for session {session_id!r}")
        fingerprint = hashlib.sha256(
            "\n".join(sorted(e.event_id for e in events)).encode("utf-8")
        ).hexdigest()
        record = self.repository.finalization(session_id)
        if record is not None and record.fingerprint == fingerprint:
            return record.trace_id
        version = (
            record.model_version
            if record is not None
            else self.repository.current_model_version()
        )
        model = self.repository.model_at(version)
        client = [e for e in events if e.source.side is Side.CLIENT]
        server = [e for e in events if e.source.side is Side.SERVER]
        merged = merge_streams(client, server)
        try:
            structured = structure_trace(
                model, session_id, events[0].actor_id, merged
            )
        except StructuringError as exc:
            raise StructuringFailedError(str(exc)) from exc
        if record is not None:
            self.repository.replace_trace(
                structured.trace, structured.quarantined, version
            )
        else:
            self.repository.store_trace(
                structured.trace, structured.quarantined, model_version=version
            )
        self.repository.record_finalization(
            session_id, structured.trace.trace_id, fingerprint, version
        )
        return structured.trace.trace_id

    def finalize_idle_sessions(self, now_ms: int | None = None) -> dict[str, str]:
        """Close out sessions idle past the configured cutoff."""
        now = now_ms if now_ms is not None else _now_ms()
        finalized: dict[str, str] = {}
        for session_id in self.repository.idle_sessions(now, self.config.idle_cutoff_ms):
            try:
                finalized[session_id] = self.finalize_session(session_id)
            except (StructuringFailedError, UnknownSessionError):
                continue
        return finalized

    # --- role-gated read surface -----------------------------------------------------

    def _scope_filter(self, filter: QueryFilter, principal: Principal) -> QueryFilter:
        if principal.role is Role.INSTRUCTOR:
            return filter
        if principal.actor_id is None:
            raise UnauthorizedError("student token lacks an actor_id")
        if filter.actor_id is not None and filter.actor_id != principal.actor_id:
            raise UnauthorizedError(
                "students may only query their own activity"
            )
        return replace(filter, actor_id=principal.actor_id)

    def query_traces(
        self, filter: QueryFilter, principal: Principal
    ) -> list[StoredTrace]:
        return self.repository.query_stored(self._scope_filter(filter, principal))

    def _window_traces(self, window: Window, principal: Principal) -> list[StoredTrace]:
        filter = QueryFilter(from_ms=window.from_ms, to_ms=window.to_ms)
        return self.query_traces(filter, principal)

    def readings(
        self,
        window: Window,
        principal: Principal,
        message_id: str | None = None,
    ) -> list[ReadingRecord]:
        stored = self._window_traces(window, principal)
        return extract_readings(
            [s.trace for s in stored],
            window,
            message_id=message_id,
            bottom_threshold=self.config.bottom_threshold,
        )

    def lurkers(self, window: Window, principal: Principal) -> list[str]:
        if principal.role is not Role.INSTRUCTOR:
            raise UnauthorizedError("lurker analysis requires the instructor role")
        stored = self._window_traces(window, principal)
        return sorted(detect_lurkers([s.trace for s in stored], window))

    def participation(
        self, window: Window, principal: Principal
    ) -> list[ParticipationSummary]:
        if principal.role is not Role.INSTRUCTOR:
            raise UnauthorizedError("participation analysis requires the instructor role")
        stored = self._window_traces(window, principal)
        return participation_summary([s.trace for s in stored], window)

    def sphere_timeline(
        self,
        window: Window,
        principal: Principal,
        message_id: str | None = None,
        scale_k: float | None = None,
        scale_t: float | None = None,
    ) -> SphereTimeline:
        readings = self.readings(window, principal, message_id=message_id)
        return build_sphere_timeline(
            readings,
            window,
            scale_k=scale_k if scale_k is not None else self.config.scale_k_per_ms,
            scale_t=scale_t if scale_t is not None else self.config.scale_t_per_ms,
            message_id=message_id,
        )

    def export(
        self, filter: QueryFilter, fmt: ExportFormat, principal: Principal
    ) -> bytes:
        if principal.role is not Role.INSTRUCTOR:
            raise UnauthorizedError("export requires the instructor role")
        return self.repository.export_traces(filter, fmt)
