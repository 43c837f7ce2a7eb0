"""Persistent trace repository over an embedded SQLite store.

Traces are stored as canonical JSON documents with secondary index tables
on (actor, activity, state attributes, start time) so queries stay exact
while scanning rows instead of documents.  The same database also holds
raw events awaiting finalization, the batch-idempotency ledger, and the
versioned use-model registry.

All access goes through one connection guarded by a re-entrant lock:
writes are serialized, and readers see committed snapshots.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

from . import exporters
from .errors import (
    ActivityInUseError,
    DuplicateEventError,
    DuplicateTraceIdError,
    InvalidWindowError,
    UnauthorizedError,
    UseModelError,
)
from .model import (
    ActivityType,
    ObservableObject,
    Quarantined,
    RawEvent,
    State,
    Trace,
    UseModel,
    ValidatedUseModel,
    default_forum_use_model,
    load_use_model,
    use_model_to_doc,
    validate_trace,
    validate_use_model,
)
from .sync import Registration, event_order_key

_SCHEMA = """
CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS model_versions (
    version INTEGER PRIMARY KEY,
    doc TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS traces (
    trace_id TEXT PRIMARY KEY,
    session_id TEXT NOT NULL,
    actor_id TEXT NOT NULL,
    first_start_ms INTEGER NOT NULL,
    model_version INTEGER NOT NULL,
    doc TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_traces_actor ON traces (actor_id);
CREATE INDEX IF NOT EXISTS idx_traces_start ON traces (first_start_ms);
CREATE TABLE IF NOT EXISTS state_index (
    trace_id TEXT NOT NULL,
    state_pos INTEGER NOT NULL,
    activity TEXT NOT NULL,
    start_ms INTEGER NOT NULL,
    end_ms INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_state_activity ON state_index (activity, start_ms);
CREATE INDEX IF NOT EXISTS idx_state_trace ON state_index (trace_id);
CREATE TABLE IF NOT EXISTS state_attr_index (
    trace_id TEXT NOT NULL,
    state_pos INTEGER NOT NULL,
    key TEXT NOT NULL,
    value TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_state_attr ON state_attr_index (key, value);
CREATE TABLE IF NOT EXISTS transition_index (
    trace_id TEXT NOT NULL,
    pos INTEGER NOT NULL,
    from_activity TEXT NOT NULL,
    to_activity TEXT NOT NULL,
    at_ms INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_transition_to ON transition_index (to_activity, at_ms);
CREATE TABLE IF NOT EXISTS raw_events (
    event_id TEXT PRIMARY KEY,
    session_id TEXT NOT NULL,
    actor_id TEXT NOT NULL,
    side TEXT NOT NULL,
    collector_id TEXT NOT NULL,
    seq INTEGER NOT NULL,
    timestamp_ms INTEGER NOT NULL,
    activity_hint TEXT,
    object_id TEXT NOT NULL,
    kind TEXT NOT NULL,
    attributes TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_events_session ON raw_events (session_id, timestamp_ms, seq);
CREATE TABLE IF NOT EXISTS batch_ledger (
    batch_id TEXT PRIMARY KEY
);
CREATE TABLE IF NOT EXISTS finalized_sessions (
    session_id TEXT PRIMARY KEY,
    trace_id TEXT NOT NULL,
    fingerprint TEXT NOT NULL,
    model_version INTEGER NOT NULL
);
"""


class Role(str, Enum):
    INSTRUCTOR = "instructor"
    STUDENT = "student"


@dataclass(frozen=True)
class Principal:
    """Authenticated caller: a role plus (for students) their own actor id."""

    role: Role
    actor_id: str | None = None


@dataclass(frozen=True)
class QueryFilter:
    """Conjunctive trace query: a trace matches when one of its states
    satisfies every present field and overlaps the window (inclusive)."""

    actor_id: str | None = None
    activity: str | None = None
    object_attr: tuple[str, str] | None = None
    from_ms: int | None = None
    to_ms: int | None = None

    def validate(self) -> None:
        if (
            self.from_ms is not None
            and self.to_ms is not None
            and self.from_ms > self.to_ms
        ):
            raise InvalidWindowError(
                f"from_ms {self.from_ms} is after to_ms {self.to_ms}"
            )


@dataclass(frozen=True)
class StoredTrace:
    """A trace as persisted: content, quarantine, and model provenance."""

    trace: Trace
    quarantined: tuple[Quarantined, ...]
    model_version: int


@dataclass(frozen=True)
class FinalizationRecord:
    session_id: str
    trace_id: str
    fingerprint: str
    model_version: int


def state_matches(
    state: State,
    activity: str | None,
    object_attr: tuple[str, str] | None,
    from_ms: int | None,
    to_ms: int | None,
) -> bool:
    """The per-state predicate behind query_traces, usable standalone as a
    brute-force oracle."""
    if activity is not None and state.activity != activity:
        return False
    if from_ms is not None and state.ended_at_ms < from_ms:
        return False
    if to_ms is not None and state.started_at_ms > to_ms:
        return False
    if object_attr is not None:
        key, value = object_attr
        if state.attributes.get(key) != value and not any(
            e.attributes.get(key) == value for e in state.events
        ):
            return False
    return True


class _SqliteBatchLedger:
    def __init__(self, repo: TraceRepository) -> None:
        self._repo = repo

    def register(self, batch_id: str) -> bool:
        return self._repo.register_batch_id(batch_id)


class TraceRepository:
    """Embedded trace store; safe for use from several threads."""

    def __init__(self, path: str = ":memory:", model: UseModel | None = None) -> None:
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(path, check_same_thread=False)
        self._conn.isolation_level = None
        self._models: dict[int, ValidatedUseModel] = {}
        with self._lock:
            self._conn.executescript(_SCHEMA)  # autocommits; runs outside _txn
            row = self._conn.execute(
                "SELECT MAX(version) FROM model_versions"
            ).fetchone()
            if row[0] is None:
                initial = model if model is not None else default_forum_use_model()
                validated = validate_use_model(initial)
                with self._txn():
                    self._conn.execute(
                        "INSERT INTO model_versions (version, doc) VALUES (1, ?)",
                        (json.dumps(use_model_to_doc(initial)),),
                    )
                self._models[1] = validated

    def close(self) -> None:
        with self._lock:
            self._conn.close()

    def __enter__(self) -> TraceRepository:
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()

    @contextmanager
    def _txn(self) -> Iterator[sqlite3.Connection]:
        with self._lock:
            self._conn.execute("BEGIN IMMEDIATE")
            try:
                yield self._conn
            except BaseException:
                self._conn.execute("ROLLBACK")
                raise
            else:
                self._conn.execute("COMMIT")

    # --- use-model registry ---------------------------------------------------

    def current_model_version(self) -> int:
        with self._lock:
            row = self._conn.execute(
                "SELECT MAX(version) FROM model_versions"
            ).fetchone()
            return int(row[0])

    def model_at(self, version: int) -> ValidatedUseModel:
        with self._lock:
            cached = self._models.get(version)
            if cached is not None:
                return cached
            row = self._conn.execute(
                "SELECT doc FROM model_versions WHERE version = ?", (version,)
            ).fetchone()
            if row is None:
                raise UseModelError(f"no use model registered at version {version}")
            validated = validate_use_model(load_use_model(row[0]))
            self._models[version] = validated
            return validated

    def current_model(self) -> ValidatedUseModel:
        return self.model_at(self.current_model_version())

    @staticmethod
    def _require_instructor(principal: Principal) -> None:
        if principal.role is not Role.INSTRUCTOR:
            raise UnauthorizedError(
                f"operation requires the instructor role, not {principal.role.value}"
            )

    def admin_add_activity_type(
        self,
        principal: Principal,
        name: str,
        observables: Sequence[ObservableObject],
    ) -> ValidatedUseModel:
        """Register a new activity type; returns the updated, now-current
        model (its version is current_model_version())."""
        self._require_instructor(principal)
        with self._lock:
            current = self.current_model().model
            if any(a.name == name for a in current.activities):
                raise UseModelError(f"activity {name!r} is already declared")
            candidate = UseModel(
                activities=current.activities
                + (ActivityType(name=name, observables=tuple(observables)),),
                rules=current.rules,
                initial_activities=current.initial_activities,
            )
            validated = validate_use_model(candidate)
            self._register_model_version(candidate, validated)
            return validated

    def _register_model_version(
        self, model: UseModel, validated: ValidatedUseModel
    ) -> int:
        version = self.current_model_version() + 1
        with self._txn():
            self._conn.execute(
                "INSERT INTO model_versions (version, doc) VALUES (?, ?)",
                (version, json.dumps(use_model_to_doc(model))),
            )
        self._models[version] = validated
        return version

    def admin_remove_activity_type(
        self, principal: Principal, name: str
    ) -> ValidatedUseModel:
        """Remove an activity type unless rules or stored traces use it;
        returns the updated, now-current model."""
        self._require_instructor(principal)
        with self._lock:
            current = self.current_model().model
            if not any(a.name == name for a in current.activities):
                raise UseModelError(f"activity {name!r} is not declared")
            if any(
                name in (r.from_activity, r.to_activity) for r in current.rules
            ):
                raise ActivityInUseError(
                    f"activity {name!r} is referenced by transition rules"
                )
            used = self._conn.execute(
                "SELECT 1 FROM state_index WHERE activity = ? "
                "UNION SELECT 1 FROM transition_index "
                "WHERE from_activity = ? OR to_activity = ? LIMIT 1",
                (name, name, name),
            ).fetchone()
            if used is not None:
                raise ActivityInUseError(
                    f"activity {name!r} appears in stored traces"
                )
            candidate = UseModel(
                activities=tuple(a for a in current.activities if a.name != name),
                rules=current.rules,
                initial_activities=current.initial_activities - {name},
            )
            validated = validate_use_model(candidate)
            self._register_model_version(candidate, validated)
            return validated

    # --- traces -----------------------------------------------------------------

    def _index_trace(self, conn: sqlite3.Connection, trace: Trace) -> None:
        for pos, element in enumerate(trace.sequence):
            if isinstance(element, State):
                conn.execute(
                    "INSERT INTO state_index VALUES (?, ?, ?, ?, ?)",
                    (
                        trace.trace_id,
                        pos,
                        element.activity,
                        element.started_at_ms,
                        element.ended_at_ms,
                    ),
                )
                pairs: set[tuple[str, str]] = set(element.attributes.items())
                for event in element.events:
                    pairs.update(event.attributes.items())
                conn.executemany(
                    "INSERT INTO state_attr_index VALUES (?, ?, ?, ?)",
                    [(trace.trace_id, pos, key, value) for key, value in sorted(pairs)],
                )
            else:
                conn.execute(
                    "INSERT INTO transition_index VALUES (?, ?, ?, ?, ?)",
                    (
                        trace.trace_id,
                        pos,
                        element.from_activity,
                        element.to_activity,
                        element.occurred_at_ms,
                    ),
                )

    def store_trace(
        self,
        trace: Trace,
        quarantined: Sequence[Quarantined] = (),
        model_version: int | None = None,
    ) -> str:
        """Validate and persist a trace atomically; returns its id."""
        version = (
            model_version if model_version is not None else self.current_model_version()
        )
        validate_trace(trace)
        doc = json.dumps(exporters.trace_to_dict(trace, tuple(quarantined)))
        first_start = trace.sequence[0].started_at_ms  # type: ignore[union-attr]
        try:
            with self._txn() as conn:
                conn.execute(
                    "INSERT INTO traces VALUES (?, ?, ?, ?, ?, ?)",
                    (
                        trace.trace_id,
                        trace.session_id,
                        trace.actor_id,
                        first_start,
                        version,
                        doc,
                    ),
                )
                self._index_trace(conn, trace)
        except sqlite3.IntegrityError:
            raise DuplicateTraceIdError(
                f"trace {trace.trace_id!r} is already stored"
            ) from None
        return trace.trace_id

    def replace_trace(
        self,
        trace: Trace,
        quarantined: Sequence[Quarantined],
        model_version: int,
    ) -> str:
        """Swap the stored content of an existing trace id atomically."""
        validate_trace(trace)
        doc = json.dumps(exporters.trace_to_dict(trace, tuple(quarantined)))
        first_start = trace.sequence[0].started_at_ms  # type: ignore[union-attr]
        with self._txn() as conn:
            conn.execute("DELETE FROM traces WHERE trace_id = ?", (trace.trace_id,))
            conn.execute(
                "DELETE FROM state_index WHERE trace_id = ?", (trace.trace_id,)
            )
            conn.execute(
                "DELETE FROM state_attr_index WHERE trace_id = ?", (trace.trace_id,)
            )
            conn.execute(
                "DELETE FROM transition_index WHERE trace_id = ?", (trace.trace_id,)
            )
            conn.execute(
                "INSERT INTO traces VALUES (?, ?, ?, ?, ?, ?)",
                (
                    trace.trace_id,
                    trace.session_id,
                    trace.actor_id,
                    first_start,
                    model_version,
                    doc,
                ),
            )
            self._index_trace(conn, trace)
        return trace.trace_id

    def _row_to_stored(self, row: tuple) -> StoredTrace:
        doc = json.loads(row[2])
        trace, quarantined = exporters.trace_from_dict(doc)
        return StoredTrace(
            trace=trace, quarantined=quarantined, model_version=int(row[1])
        )

    def get_trace(self, trace_id: str) -> StoredTrace | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT trace_id, model_version, doc FROM traces WHERE trace_id = ?",
                (trace_id,),
            ).fetchone()
        return self._row_to_stored(row) if row is not None else None

    def query_stored(self, filter: QueryFilter) -> list[StoredTrace]:
        filter.validate()
        clauses = ["1=1"]
        params: list[object] = []
        if filter.actor_id is not None:
            clauses.append("t.actor_id = ?")
            params.append(filter.actor_id)
        state_clauses = ["s.trace_id = t.trace_id"]
        if filter.activity is not None:
            state_clauses.append("s.activity = ?")
            params.append(filter.activity)
        if filter.to_ms is not None:
            state_clauses.append("s.start_ms <= ?")
            params.append(filter.to_ms)
        if filter.from_ms is not None:
            state_clauses.append("s.end_ms >= ?")
            params.append(filter.from_ms)
        if filter.object_attr is not None:
            state_clauses.append(
                "EXISTS (SELECT 1 FROM state_attr_index a WHERE "
                "a.trace_id = s.trace_id AND a.state_pos = s.state_pos "
                "AND a.key = ? AND a.value = ?)"
            )
            params.extend(filter.object_attr)
        sql = (
            "SELECT t.trace_id, t.model_version, t.doc FROM traces t "
            f"WHERE {' AND '.join(clauses)} "
            "AND EXISTS (SELECT 1 FROM state_index s WHERE "
            f"{' AND '.join(state_clauses)}) "
            "ORDER BY t.first_start_ms, t.trace_id"
        )
        with self._lock:
            rows = self._conn.execute(sql, params).fetchall()
        return [self._row_to_stored(row) for row in rows]

    def query_traces(self, filter: QueryFilter) -> list[Trace]:
        return [stored.trace for stored in self.query_stored(filter)]

    def trace_count(self) -> int:
        with self._lock:
            return int(self._conn.execute("SELECT COUNT(*) FROM traces").fetchone()[0])

    # --- export / import -----------------------------------------------------------

    def export_traces(
        self, filter: QueryFilter, fmt: exporters.ExportFormat
    ) -> bytes:
        stored = self.query_stored(filter)
        if stored:
            version = max(s.model_version for s in stored)
        else:
            version = self.current_model_version()
        items = [(s.trace, s.quarantined) for s in stored]
        return exporters.export_document(items, version, fmt)

    def import_traces(self, data: bytes, fmt: exporters.ExportFormat) -> int:
        version, items = exporters.import_document(data, fmt)
        for trace, quarantined in items:
            self.store_trace(trace, quarantined, model_version=version)
        return len(items)

    # --- raw events and sessions ------------------------------------------------------

    _EVENT_COLS = (
        "event_id, session_id, actor_id, side, collector_id, seq, "
        "timestamp_ms, activity_hint, object_id, kind, attributes"
    )

    @staticmethod
    def _event_row(event: RawEvent) -> tuple:
        return (
            event.event_id,
            event.session_id,
            event.actor_id,
            event.source.side.value,
            event.source.collector_id,
            event.seq,
            event.timestamp_ms,
            event.activity_hint,
            event.object_id,
            event.kind.value,
            json.dumps(dict(event.attributes)),
        )

    @staticmethod
    def _row_to_event(row: tuple) -> RawEvent:
        return exporters.event_from_dict(
            {
                "event_id": row[0],
                "session_id": row[1],
                "actor_id": row[2],
                "side": row[3],
                "collector_id": row[4],
                "seq": row[5],
                "timestamp_ms": row[6],
                "activity_hint": row[7],
                "object_id": row[8],
                "kind": row[9],
                "attributes": json.loads(row[10]),
            }
        )

    def register_batch_id(self, batch_id: str) -> bool:
        with self._txn() as conn:
            cursor = conn.execute(
                "INSERT OR IGNORE INTO batch_ledger (batch_id) VALUES (?)",
                (batch_id,),
            )
            return cursor.rowcount == 1

    @property
    def batch_ledger(self) -> _SqliteBatchLedger:
        return _SqliteBatchLedger(self)

    def ingest_client_batch(
        self, batch_id: str, events: Sequence[RawEvent]
    ) -> Registration:
        """Ledger registration plus event insertion as one atomic step.

        A repeated batch_id is a no-op returning DUPLICATE; an event-id
        collision inside a fresh batch rejects the whole batch and leaves
        the ledger unchanged.
        """
        with self._txn() as conn:
            cursor = conn.execute(
                "INSERT OR IGNORE INTO batch_ledger (batch_id) VALUES (?)",
                (batch_id,),
            )
            if cursor.rowcount == 0:
                return Registration.DUPLICATE
            try:
                conn.executemany(
                    f"INSERT INTO raw_events ({self._EVENT_COLS}) "
                    "VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                    [self._event_row(e) for e in events],
                )
            except sqlite3.IntegrityError:
                raise DuplicateEventError(
                    f"batch {batch_id!r} collides with an already stored event id"
                ) from None
            return Registration.FRESH

    def insert_server_event(self, event: RawEvent) -> bool:
        """Persist one server-side event; False when the id already exists."""
        try:
            with self._txn() as conn:
                conn.execute(
                    f"INSERT INTO raw_events ({self._EVENT_COLS}) "
                    "VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                    self._event_row(event),
                )
        except sqlite3.IntegrityError:
            return False
        return True

    def event_count(self) -> int:
        with self._lock:
            return int(
                self._conn.execute("SELECT COUNT(*) FROM raw_events").fetchone()[0]
            )

    def events_for_session(self, session_id: str) -> list[RawEvent]:
        with self._lock:
            rows = self._conn.execute(
                f"SELECT {self._EVENT_COLS} FROM raw_events WHERE session_id = ?",
                (session_id,),
            ).fetchall()
        events = [self._row_to_event(row) for row in rows]
        events.sort(key=event_order_key)
        return events

    def session_ids(self) -> list[str]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT DISTINCT session_id FROM raw_events ORDER BY session_id"
            ).fetchall()
        return [row[0] for row in rows]

    def session_actor(self, session_id: str) -> str | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT actor_id FROM raw_events WHERE session_id = ? LIMIT 1",
                (session_id,),
            ).fetchone()
        return row[0] if row is not None else None

    def idle_sessions(self, now_ms: int, idle_cutoff_ms: int) -> list[str]:
        """Unfinalized sessions whose newest event is older than the cutoff."""
        with self._lock:
            rows = self._conn.execute(
                "SELECT session_id, MAX(timestamp_ms) FROM raw_events "
                "GROUP BY session_id HAVING MAX(timestamp_ms) <= ? "
                "ORDER BY session_id",
                (now_ms - idle_cutoff_ms,),
            ).fetchall()
            finalized = {
                row[0]
                for row in self._conn.execute(
                    "SELECT session_id FROM finalized_sessions"
                ).fetchall()
            }
        return [row[0] for row in rows if row[0] not in finalized]

    # --- finalization bookkeeping ----------------------------------------------------

    def finalization(self, session_id: str) -> FinalizationRecord | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT session_id, trace_id, fingerprint, model_version "
                "FROM finalized_sessions WHERE session_id = ?",
                (session_id,),
            ).fetchone()
        if row is None:
            return None
        return FinalizationRecord(
            session_id=row[0],
            trace_id=row[1],
            fingerprint=row[2],
            model_version=int(row[3]),
        )

    def record_finalization(
        self, session_id: str, trace_id: str, fingerprint: str, model_version: int
    ) -> None:
        with self._txn() as conn:
            conn.execute(
                "INSERT OR REPLACE INTO finalized_sessions VALUES (?, ?, ?, ?)",
                (session_id, trace_id, fingerprint, model_version),
            )
