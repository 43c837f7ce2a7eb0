"""Deterministic synthetic forum sessions: generation and replay.

The generator emits a line-delimited event file (one JSON header line,
then tab-separated event lines in the flat-log column format) describing
active posters and lurkers reading a set of messages.  Identical specs
produce byte-identical files.  The replayer feeds such a file into a
tracing service, either in-process or over HTTP, optionally duplicating
and reordering deliveries to exercise replay safety.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Protocol, Sequence
from urllib.parse import parse_qsl, urlencode

import httpx

from .analysis import Window
from .errors import (
    ForumTraceError,
    InvalidSpecError,
    ScenarioFileError,
    TargetUnreachableError,
)
from .model import EventKind, EventSource, RawEvent, Side, parse_event_kind
from .service import TracingService, ack_to_dict

SCENARIO_FORMAT = "forumtrace-scenario/1"
FIRST_MESSAGE_ID = 25  # generated message ids count up from the canonical example


class ScenarioKind(str, Enum):
    ACTIVE = "active"
    LURKER = "lurker"
    MIXED = "mixed"


_STYLES = ("full", "partial", "none")
# mixed cohorts cycle deterministically so small cohorts still cover
# every reading style; even actor indexes post, odd ones lurk
_MIXED_STYLE_CYCLE = ("full", "none", "partial")


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind
    actors: int
    messages: int
    seed: int
    window: Window
    read_duration_range_ms: tuple[int, int] = (8_000, 90_000)
    scroll_behavior_mix: Mapping[str, float] = field(
        default_factory=lambda: {"full": 0.4, "partial": 0.3, "none": 0.3}
    )

    def validate(self) -> None:
        if self.actors < 1:
            raise InvalidSpecError("actors must be >= 1")
        if self.messages < 1:
            raise InvalidSpecError("messages must be >= 1")
        lo, hi = self.read_duration_range_ms
        if not 100 <= lo <= hi:
            raise InvalidSpecError(
                f"read_duration_range_ms must be 100 <= lo <= hi, got ({lo}, {hi})"
            )
        weights = [self.scroll_behavior_mix.get(style, 0.0) for style in _STYLES]
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise InvalidSpecError("scroll_behavior_mix must have positive total weight")


def _actor_id(index: int) -> str:
    return f"u{index + 1}"


def _session_id(seed: int, index: int) -> str:
    return f"s{seed}-{index + 1}"


@dataclass
class _Line:
    timestamp_ms: int
    session_id: str
    actor_id: str
    side: Side
    activity: str
    object_id: str
    kind: EventKind
    attributes: dict[str, str]
    order: int  # per-actor emission index, for a total deterministic sort

    def render(self) -> str:
        return "\t".join(
            [
                str(self.timestamp_ms),
                self.session_id,
                self.actor_id,
                self.side.value,
                self.activity,
                self.object_id,
                self.kind.value,
                urlencode(list(self.attributes.items())),
            ]
        )


class _ActorScript:
    """Emits one actor's session, keeping its own monotone clock."""

    def __init__(
        self, spec: ScenarioSpec, rng: random.Random, index: int, style: str
    ) -> None:
        self.spec = spec
        self.rng = rng
        self.session = _session_id(spec.seed, index)
        self.actor = _actor_id(index)
        span = spec.window.to_ms - spec.window.from_ms
        self.t = spec.window.from_ms + (span * index) // (2 * max(spec.actors, 1))
        self.style = style
        self.lines: list[_Line] = []

    def _emit(
        self,
        side: Side,
        object_id: str,
        kind: EventKind,
        activity: str = "",
        attributes: dict[str, str] | None = None,
        at: int | None = None,
    ) -> None:
        ts = self.t if at is None else at
        if ts > self.spec.window.to_ms:
            raise InvalidSpecError(
                f"window too small: actor {self.actor} overruns it at {ts}"
            )
        self.lines.append(
            _Line(
                timestamp_ms=ts,
                session_id=self.session,
                actor_id=self.actor,
                side=side,
                activity=activity,
                object_id=object_id,
                kind=kind,
                attributes=attributes or {},
                order=len(self.lines),
            )
        )

    def _display(self, object_id: str, activity: str, attributes: dict[str, str] | None = None) -> None:
        self._emit(Side.SERVER, object_id, EventKind.DISPLAY, activity, attributes)

    def _advance(self, lo: int, hi: int) -> None:
        self.t += self.rng.randint(lo, hi)

    def _read_message(self, message_id: str) -> None:
        self._display(
            "message_page", "DisplayMessage", {"message_id": message_id, "thread_id": "1"}
        )
        duration = self.rng.randint(*self.spec.read_duration_range_ms)
        if self.style == "full":
            ratios = [round(self.rng.uniform(0.2, 0.6), 3), round(self.rng.uniform(0.98, 1.0), 3)]
        elif self.style == "partial":
            ratios = [round(self.rng.uniform(0.15, 0.9), 3) for _ in range(self.rng.randint(1, 3))]
        else:
            ratios = []
        if ratios:
            offsets = sorted(self.rng.sample(range(1, duration), len(ratios)))
            for offset, ratio in zip(offsets, sorted(ratios)):
                self._emit(
                    Side.CLIENT,
                    "page",
                    EventKind.SCROLL,
                    attributes={"scroll_ratio": f"{ratio}"},
                    at=self.t + offset,
                )
        self.t += duration  # the next display closes the reading state exactly here

    def _compose_and_post(self, index: int) -> None:
        self._display("compose_form", "ComposeMessage", {"thread_id": "1"})
        for _ in range(self.rng.randint(2, 4)):
            self._advance(800, 2_500)
            self._emit(Side.CLIENT, "compose_form", EventKind.EDIT_TEXT)
        self._advance(500, 1_500)
        self._emit(Side.CLIENT, "submit_button", EventKind.CLICK)
        self._advance(300, 900)
        self._display(
            "posted_message_page",
            "DisplayPostedMessage",
            {"message_id": str(1000 + index), "thread_id": "1"},
        )

    def run(self, index: int, poster: bool, message_ids: Sequence[str]) -> list[_Line]:
        self._display("forum_index_page", "DisplayForumIndex")
        self._advance(1_000, 4_000)
        self._display("thread_page", "DisplayThread", {"thread_id": "1"})
        self._advance(1_000, 4_000)
        for message_id in message_ids:
            self._read_message(message_id)
        if poster:
            self._compose_and_post(index)
            self._advance(500, 2_000)
        self._display("forum_index_page", "DisplayForumIndex")
        return self.lines


def _draw_style(rng: random.Random, mix: Mapping[str, float]) -> str:
    weights = [mix.get(style, 0.0) for style in _STYLES]
    return rng.choices(_STYLES, weights=weights, k=1)[0]


def _profiles(spec: ScenarioSpec, rng: random.Random) -> list[tuple[bool, str]]:
    profiles: list[tuple[bool, str]] = []
    for index in range(spec.actors):
        if spec.kind is ScenarioKind.MIXED:
            poster = index % 2 == 0
            style = _MIXED_STYLE_CYCLE[index % len(_MIXED_STYLE_CYCLE)]
        else:
            poster = spec.kind is ScenarioKind.ACTIVE
            style = _draw_style(rng, spec.scroll_behavior_mix)
        profiles.append((poster, style))
    return profiles


def generate(spec: ScenarioSpec) -> str:
    """Render a scenario to its event-file text; identical specs give byte-identical output."""
    spec.validate()
    rng = random.Random(spec.seed)
    message_ids = [str(FIRST_MESSAGE_ID + j) for j in range(spec.messages)]
    profiles = _profiles(spec, rng)
    all_lines: list[_Line] = []
    sessions: dict[str, str] = {}
    lurkers: list[str] = []
    for index, (poster, style) in enumerate(profiles):
        script = _ActorScript(spec, rng, index, style)
        all_lines.extend(script.run(index, poster, message_ids))
        sessions[script.actor] = script.session
        if not poster:
            lurkers.append(script.actor)
    all_lines.sort(key=lambda l: (l.timestamp_ms, l.session_id, l.order))
    header = {
        "format": SCENARIO_FORMAT,
        "kind": spec.kind.value,
        "seed": spec.seed,
        "window": [spec.window.from_ms, spec.window.to_ms],
        "actors": sessions,
        "lurkers": lurkers,
        "message_ids": message_ids,
        "spec": {
            "actors": spec.actors,
            "messages": spec.messages,
            "read_duration_range_ms": list(spec.read_duration_range_ms),
            "scroll_behavior_mix": dict(spec.scroll_behavior_mix),
        },
    }
    return "\n".join([json.dumps(header)] + [line.render() for line in all_lines]) + "\n"


# --- parsing -----------------------------------------------------------------------

@dataclass(frozen=True)
class ParsedScenario:
    header: dict
    events: tuple[RawEvent, ...]


def parse_scenario(text: str) -> ParsedScenario:
    """Rehydrate a scenario file into raw events.

    The line format carries no ids, so event ids and client sequence
    numbers are minted from per-session line order; the file's order is
    deterministic, so replays always mint the same ids.
    """
    lines = text.splitlines()
    if not lines:
        raise ScenarioFileError("scenario file is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(f"bad scenario header: {exc}") from exc
    if header.get("format") != SCENARIO_FORMAT:
        raise ScenarioFileError(f"unknown scenario format {header.get('format')!r}")
    events: list[RawEvent] = []
    event_counter: dict[str, int] = {}
    seq_counter: dict[str, int] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 8:
            raise ScenarioFileError(
                f"line {line_no}: expected 8 tab-separated fields, got {len(fields)}"
            )
        ts, session_id, actor_id, side_token, activity, object_id, kind_token, attrs = fields
        try:
            side = Side(side_token)
            kind = parse_event_kind(kind_token)
            index = event_counter.get(session_id, 0)
            event_counter[session_id] = index + 1
            if side is Side.CLIENT:
                seq = seq_counter.get(session_id, 0)
                seq_counter[session_id] = seq + 1
            else:
                seq = 0
            events.append(
                RawEvent(
                    event_id=f"{session_id}-e{index:05d}",
                    session_id=session_id,
                    actor_id=actor_id,
                    source=EventSource(side=side, collector_id="sim"),
                    seq=seq,
                    timestamp_ms=int(ts),
                    object_id=object_id,
                    kind=kind,
                    activity_hint=activity or None,
                    attributes=dict(parse_qsl(attrs, keep_blank_values=True)),
                )
            )
        except ForumTraceError as exc:
            raise ScenarioFileError(f"line {line_no}: {exc}") from exc
        except ValueError as exc:
            raise ScenarioFileError(f"line {line_no}: {exc}") from exc
    return ParsedScenario(header=header, events=tuple(events))


# --- replay --------------------------------------------------------------------------

class ReplayTarget(Protocol):
    def send_batch(self, doc: dict) -> dict: ...

    def send_server_event(self, doc: dict) -> dict: ...

    def finalize(self, session_id: str) -> str: ...


class DirectTarget:
    """Replay straight into an in-process service."""

    def __init__(self, service: TracingService) -> None:
        self.service = service

    def send_batch(self, doc: dict) -> dict:
        return ack_to_dict(self.service.handle_client_batch(doc))

    def send_server_event(self, doc: dict) -> dict:
        return ack_to_dict(self.service.handle_server_event(doc))

    def finalize(self, session_id: str) -> str:
        return self.service.finalize_session(session_id)


class HttpTarget:
    """Replay against a running ingest service."""

    def __init__(self, base_url: str, client: httpx.Client | None = None) -> None:
        self.base_url = base_url.rstrip("/")
        self.client = client if client is not None else httpx.Client()

    def _post(self, path: str, doc: dict | None = None) -> dict:
        try:
            response = self.client.post(f"{self.base_url}{path}", json=doc)
        except httpx.TransportError as exc:
            raise TargetUnreachableError(f"{self.base_url}: {exc}") from exc
        if response.status_code >= 400:
            raise TargetUnreachableError(
                f"{path} returned {response.status_code}: {response.text}"
            )
        return response.json()

    def send_batch(self, doc: dict) -> dict:
        return self._post("/api/v1/events/batch", doc)

    def send_server_event(self, doc: dict) -> dict:
        return self._post("/api/v1/events/server", doc)

    def finalize(self, session_id: str) -> str:
        return self._post(f"/api/v1/sessions/{session_id}/finalize")["trace_id"]


@dataclass
class ReplayReport:
    total_events: int
    deliveries: int
    acks: dict[str, int]
    accepted_events: int
    finalized: dict[str, str]

    def to_dict(self) -> dict:
        return {
            "total_events": self.total_events,
            "deliveries": self.deliveries,
            "acks": dict(self.acks),
            "accepted_events": self.accepted_events,
            "finalized": dict(self.finalized),
        }


def _event_wire_doc(event: RawEvent) -> dict:
    doc = {
        "event_id": event.event_id,
        "seq": event.seq,
        "timestamp_ms": event.timestamp_ms,
        "object_id": event.object_id,
        "kind": event.kind.value,
        "attributes": dict(event.attributes),
    }
    if event.activity_hint is not None:
        doc["activity_hint"] = event.activity_hint
    return doc


def build_deliveries(
    events: Sequence[RawEvent], batch_size: int = 20
) -> list[tuple[str, dict]]:
    """Group a parsed event stream into the wire deliveries a live page
    would produce: per-session client batches plus individual server posts."""
    deliveries: list[tuple[str, dict]] = []
    buffers: dict[str, list[RawEvent]] = {}
    batch_counts: dict[str, int] = {}

    def flush(session_id: str) -> None:
        buffer = buffers.get(session_id)
        if not buffer:
            return
        count = batch_counts.get(session_id, 0)
        batch_counts[session_id] = count + 1
        deliveries.append(
            (
                "batch",
                {
                    "batch_id": f"{session_id}-b{count:04d}",
                    "session_id": session_id,
                    "actor_id": buffer[0].actor_id,
                    "events": [_event_wire_doc(e) for e in buffer],
                },
            )
        )
        buffers[session_id] = []

    for event in events:
        if event.source.side is Side.SERVER:
            doc = _event_wire_doc(event)
            doc["session_id"] = event.session_id
            doc["actor_id"] = event.actor_id
            deliveries.append(("server", doc))
        else:
            buffers.setdefault(event.session_id, []).append(event)
            if len(buffers[event.session_id]) >= batch_size:
                flush(event.session_id)
    for session_id in sorted(buffers):
        flush(session_id)
    return deliveries


def replay(
    text: str,
    target: ReplayTarget,
    shuffle: bool = False,
    seed: int = 0,
    batch_size: int = 20,
) -> ReplayReport:
    """Deliver a scenario file and finalize its sessions.

    With shuffle on, roughly half the deliveries are duplicated and the
    whole delivery order is permuted (seeded), emulating at-least-once
    transport; an idempotent service must end up in the same state as for
    a clean replay.
    """
    parsed = parse_scenario(text)
    deliveries = build_deliveries(parsed.events, batch_size=batch_size)
    if shuffle:
        rng = random.Random(seed)
        extra = [deliveries[i] for i in rng.sample(range(len(deliveries)), len(deliveries) // 2)] if deliveries else []
        deliveries = deliveries + extra
        rng.shuffle(deliveries)
    acks: dict[str, int] = {}
    accepted_events = 0
    for kind, doc in deliveries:
        ack = target.send_batch(doc) if kind == "batch" else target.send_server_event(doc)
        acks[ack["status"]] = acks.get(ack["status"], 0) + 1
        accepted_events += ack.get("accepted_count", 0)
    finalized: dict[str, str] = {}
    for session_id in sorted({e.session_id for e in parsed.events}):
        finalized[session_id] = target.finalize(session_id)
    return ReplayReport(
        total_events=len(parsed.events),
        deliveries=len(deliveries),
        acks=acks,
        accepted_events=accepted_events,
        finalized=finalized,
    )
