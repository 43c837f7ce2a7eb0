"""Client/server stream synchronization.

Client events arrive in buffered batches stamped with the client's clock;
this module maps them into the server clock frame, merges both sides into
one total order, and keeps re-submitted batches from being counted twice.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Protocol, Sequence

from .errors import InvalidEventError, SkewTooLargeError
from .model import EventSource, RawEvent, Side, parse_event_kind

DEFAULT_MAX_CLOCK_SKEW_MS = 300_000


@dataclass(frozen=True)
class ClientBatch:
    """One flush of the client-side event buffer.

    client_clock_offset_ms is (client_now - server_now) as measured when
    the collector attached; None means the source is already in the server
    clock frame (e.g. replayed files) and must not be re-adjusted.
    """

    batch_id: str
    session_id: str
    actor_id: str
    events: tuple[RawEvent, ...]
    client_clock_offset_ms: int | None = None
    collector_id: str = "web"

    def __post_init__(self) -> None:
        if not self.batch_id:
            raise InvalidEventError("batch_id must be non-empty")
        last_seq: int | None = None
        for event in self.events:
            if event.source.side is not Side.CLIENT:
                raise InvalidEventError(
                    f"batch {self.batch_id!r} contains non-client event "
                    f"{event.event_id!r}"
                )
            if last_seq is not None and event.seq <= last_seq:
                raise InvalidEventError(
                    f"batch {self.batch_id!r} seq must be strictly increasing"
                )
            last_seq = event.seq


def client_batch_from_doc(doc: Mapping) -> ClientBatch:
    """Build a ClientBatch from its wire document.

    Raises InvalidEventError on any missing field or bad token, so a
    malformed submission can be rejected as a unit.
    """
    try:
        session_id = doc["session_id"]
        actor_id = doc["actor_id"]
        batch_id = doc["batch_id"]
        collector_id = doc.get("collector_id", "web")
        offset = doc.get("client_clock_offset_ms")
        events = tuple(
            RawEvent(
                event_id=entry["event_id"],
                session_id=session_id,
                actor_id=actor_id,
                source=EventSource(side=Side.CLIENT, collector_id=collector_id),
                seq=int(entry["seq"]),
                timestamp_ms=int(entry["timestamp_ms"]),
                object_id=entry["object_id"],
                kind=parse_event_kind(entry["kind"]),
                activity_hint=entry.get("activity_hint"),
                attributes=dict(entry.get("attributes", {})),
            )
            for entry in doc["events"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidEventError(f"malformed client batch: {exc}") from exc
    return ClientBatch(
        batch_id=batch_id,
        session_id=session_id,
        actor_id=actor_id,
        events=events,
        client_clock_offset_ms=int(offset) if offset is not None else None,
        collector_id=collector_id,
    )


def adjust_clock(
    batch: ClientBatch,
    received_at_ms: int | None = None,
    max_clock_skew_ms: int = DEFAULT_MAX_CLOCK_SKEW_MS,
) -> list[RawEvent]:
    """Map a batch's event timestamps into the server clock frame.

    Subtracts the measured offset, then clamps each timestamp into
    [received_at_ms - max_clock_skew_ms, received_at_ms] when a receipt
    time is known.  Clamping is monotone, so relative order within the
    batch survives (ties are later resolved by seq).  Batches without an
    offset are trusted as already synchronized and returned unchanged.

    Raises SkewTooLargeError when |offset| exceeds max_clock_skew_ms.
    """
    offset = batch.client_clock_offset_ms
    if offset is None:
        return list(batch.events)
    if abs(offset) > max_clock_skew_ms:
        raise SkewTooLargeError(
            f"batch {batch.batch_id!r} reports offset {offset} ms beyond "
            f"the {max_clock_skew_ms} ms maximum"
        )
    adjusted: list[RawEvent] = []
    for event in batch.events:
        ts = event.timestamp_ms - offset
        if received_at_ms is not None:
            ts = max(ts, received_at_ms - max_clock_skew_ms)
            ts = min(ts, received_at_ms)
        ts = max(ts, 0)
        adjusted.append(replace(event, timestamp_ms=ts))
    return adjusted


def event_order_key(event: RawEvent) -> tuple[int, int, int, str]:
    """Total order over events: timestamp, then server before client,
    then capture seq, then event id."""
    side_rank = 0 if event.source.side is Side.SERVER else 1
    return (event.timestamp_ms, side_rank, event.seq, event.event_id)


def merge_streams(
    client: Sequence[RawEvent], server: Sequence[RawEvent]
) -> list[RawEvent]:
    """Merge two per-side ordered streams into the total event order.

    The output is a permutation of the inputs; ordering is a pure function
    of (timestamp, side, seq, event_id), so arrival interleaving never
    changes the result.
    """
    return sorted(list(client) + list(server), key=event_order_key)


class Registration(Enum):
    FRESH = "fresh"
    DUPLICATE = "duplicate"


class BatchLedger(Protocol):
    """Records which batch ids have been ingested."""

    def register(self, batch_id: str) -> bool:
        """Atomically record an id; True only on first registration."""
        ...


def register_batch(batch_id: str, ledger: BatchLedger) -> Registration:
    """Idempotency gate for at-least-once batch delivery."""
    return Registration.FRESH if ledger.register(batch_id) else Registration.DUPLICATE


class InMemoryBatchLedger:
    """Ledger for tests and ephemeral pipelines; check-and-insert is atomic."""

    def __init__(self, seen: Iterable[str] = ()) -> None:
        self._seen = set(seen)
        self._lock = threading.Lock()

    def register(self, batch_id: str) -> bool:
        with self._lock:
            if batch_id in self._seen:
                return False
            self._seen.add(batch_id)
            return True


__all__ = [
    "DEFAULT_MAX_CLOCK_SKEW_MS",
    "BatchLedger",
    "ClientBatch",
    "InMemoryBatchLedger",
    "Registration",
    "adjust_clock",
    "client_batch_from_doc",
    "event_order_key",
    "merge_streams",
    "register_batch",
]
