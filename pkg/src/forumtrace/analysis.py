"""Trace analytics: reading completeness, lurker detection, and the
sphere-timeline visualization model.

Every operation here is a pure function over trace snapshots, so results
can be recomputed or cross-checked against raw-event scans at any time.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .errors import (
    InvalidWindowError,
    NonPositiveScaleError,
    ReadingOutsideWindowError,
    WrongActivityError,
)
from .model import EventKind, State, Trace, Transition

READING_ACTIVITY = "DisplayMessage"
THREAD_ACTIVITY = "DisplayThread"
POSTED_ACTIVITY = "DisplayPostedMessage"
MESSAGE_ID_ATTR = "message_id"

DEFAULT_BOTTOM_THRESHOLD = 0.98
# 0.5 display units per second and 1 display unit per minute, expressed
# per millisecond because all trace timestamps are epoch milliseconds.
DEFAULT_SCALE_K_PER_MS = 0.0005
DEFAULT_SCALE_T_PER_MS = 1.0 / 60_000.0


class Completeness(str, Enum):
    """How much of a displayed message the reader got through."""

    GREEN = "green"    # scrolled to the bottom of the page
    ORANGE = "orange"  # displayed without touching the scrollbar
    BLUE = "blue"      # scrolled, but never reached the bottom


@dataclass(frozen=True)
class Window:
    """Inclusive time window in epoch milliseconds."""

    from_ms: int
    to_ms: int

    def __post_init__(self) -> None:
        if self.from_ms > self.to_ms:
            raise InvalidWindowError(
                f"window from_ms {self.from_ms} is after to_ms {self.to_ms}"
            )

    def contains(self, timestamp_ms: int) -> bool:
        return self.from_ms <= timestamp_ms <= self.to_ms


@dataclass(frozen=True)
class ReadingRecord:
    """One message-reading state reduced to its analytic essentials."""

    actor_id: str
    message_id: str
    started_at_ms: int
    duration_ms: int
    censored: bool
    completeness: Completeness
    max_scroll_ratio: float


@dataclass(frozen=True)
class Sphere:
    """One circle of the timeline: geometry is exact data, never clamped."""

    reading: ReadingRecord
    diameter: float
    offset: float


@dataclass(frozen=True)
class SphereTimeline:
    message_id: str | None
    window: Window
    scale_k: float
    scale_t: float
    spheres: tuple[Sphere, ...]


@dataclass(frozen=True)
class ParticipationSummary:
    actor_id: str
    reads: int
    posts: int
    window: Window


def _scroll_ratios(state: State) -> list[float]:
    return [e.scroll_ratio() for e in state.events if e.kind is EventKind.SCROLL]


def classify_reading(
    state: State, bottom_threshold: float = DEFAULT_BOTTOM_THRESHOLD
) -> Completeness:
    """Color a message-reading state from its scroll evidence.

    Green when any scroll reached the bottom threshold, orange when the
    scrollbar was never touched, blue otherwise.  The three cases
    partition all possible inputs.
    """
    if state.activity != READING_ACTIVITY:
        raise WrongActivityError(
            f"expected a {READING_ACTIVITY} state, got {state.activity!r}"
        )
    ratios = _scroll_ratios(state)
    if not ratios:
        return Completeness.ORANGE
    if max(ratios) >= bottom_threshold:
        return Completeness.GREEN
    return Completeness.BLUE


def reading_duration(state: State) -> tuple[int, bool]:
    """Dwell time of a state and whether its end was ever observed."""
    return state.ended_at_ms - state.started_at_ms, state.censored


def extract_readings(
    traces: Iterable[Trace],
    window: Window,
    message_id: str | None = None,
    bottom_threshold: float = DEFAULT_BOTTOM_THRESHOLD,
) -> list[ReadingRecord]:
    """One record per message-reading state starting inside the window.

    With message_id set, only readings of that message are returned;
    records are ordered by start time (actor id breaks ties).
    """
    records: list[ReadingRecord] = []
    for trace in traces:
        for state in trace.states():
            if state.activity != READING_ACTIVITY:
                continue
            if not window.contains(state.started_at_ms):
                continue
            state_message = state.attributes.get(MESSAGE_ID_ATTR, "")
            if message_id is not None and state_message != message_id:
                continue
            duration, censored = reading_duration(state)
            ratios = _scroll_ratios(state)
            records.append(
                ReadingRecord(
                    actor_id=trace.actor_id,
                    message_id=state_message,
                    started_at_ms=state.started_at_ms,
                    duration_ms=duration,
                    censored=censored,
                    completeness=classify_reading(state, bottom_threshold),
                    max_scroll_ratio=max(ratios) if ratios else 0.0,
                )
            )
    records.sort(key=lambda r: (r.started_at_ms, r.actor_id, r.message_id))
    return records


def _posting_actors(traces: Iterable[Trace], window: Window) -> set[str]:
    posters: set[str] = set()
    for trace in traces:
        for transition in trace.transitions():
            if transition.to_activity == POSTED_ACTIVITY and window.contains(
                transition.occurred_at_ms
            ):
                posters.add(trace.actor_id)
    return posters


def detect_lurkers(traces: Sequence[Trace], window: Window) -> set[str]:
    """Actors who read messages or threads in the window but completed no
    post there.  Actors with no reading activity at all are absent, not
    lurkers."""
    readers: set[str] = set()
    for trace in traces:
        for state in trace.states():
            if state.activity in (READING_ACTIVITY, THREAD_ACTIVITY) and window.contains(
                state.started_at_ms
            ):
                readers.add(trace.actor_id)
                break
    return readers - _posting_actors(traces, window)


def participation_summary(
    traces: Sequence[Trace], window: Window
) -> list[ParticipationSummary]:
    """Per-actor read and post counts inside the window.

    Reads count message-display states; posts count transitions into the
    posted-message activity.  Actors with neither are omitted.
    """
    reads: dict[str, int] = {}
    posts: dict[str, int] = {}
    for trace in traces:
        for element in trace.sequence:
            if isinstance(element, State):
                if element.activity == READING_ACTIVITY and window.contains(
                    element.started_at_ms
                ):
                    reads[trace.actor_id] = reads.get(trace.actor_id, 0) + 1
            elif isinstance(element, Transition):
                if element.to_activity == POSTED_ACTIVITY and window.contains(
                    element.occurred_at_ms
                ):
                    posts[trace.actor_id] = posts.get(trace.actor_id, 0) + 1
    actors = sorted(set(reads) | set(posts))
    return [
        ParticipationSummary(
            actor_id=actor,
            reads=reads.get(actor, 0),
            posts=posts.get(actor, 0),
            window=window,
        )
        for actor in actors
    ]


def build_sphere_timeline(
    readings: Sequence[ReadingRecord],
    window: Window,
    scale_k: float = DEFAULT_SCALE_K_PER_MS,
    scale_t: float = DEFAULT_SCALE_T_PER_MS,
    message_id: str | None = None,
) -> SphereTimeline:
    """Timeline of one sphere per reading.

    Diameter is exactly scale_k x duration_ms and horizontal offset exactly
    scale_t x (start - window.from_ms), so on-screen distance between
    spheres stays proportional to the time gap between readings.  Display
    minimums are a renderer concern, never applied here.
    """
    if scale_k <= 0 or scale_t <= 0:
        raise NonPositiveScaleError(
            f"scales must be positive, got scale_k={scale_k} scale_t={scale_t}"
        )
    for reading in readings:
        if not window.contains(reading.started_at_ms):
            raise ReadingOutsideWindowError(
                f"reading by {reading.actor_id!r} at {reading.started_at_ms} "
                f"falls outside [{window.from_ms}, {window.to_ms}]"
            )
    ordered = sorted(readings, key=lambda r: (r.started_at_ms, r.actor_id))
    spheres = tuple(
        Sphere(
            reading=reading,
            diameter=scale_k * reading.duration_ms,
            offset=scale_t * (reading.started_at_ms - window.from_ms),
        )
        for reading in ordered
    )
    return SphereTimeline(
        message_id=message_id,
        window=window,
        scale_k=scale_k,
        scale_t=scale_t,
        spheres=spheres,
    )


# --- wire documents (consumed by the dashboard) -----------------------------------

def reading_to_dict(reading: ReadingRecord) -> dict:
    return {
        "actor_id": reading.actor_id,
        "message_id": reading.message_id,
        "started_at_ms": reading.started_at_ms,
        "duration_ms": reading.duration_ms,
        "censored": reading.censored,
        "completeness": reading.completeness.value,
        "max_scroll_ratio": reading.max_scroll_ratio,
    }


def timeline_to_dict(timeline: SphereTimeline) -> dict:
    return {
        "message_id": timeline.message_id,
        "window": {"from_ms": timeline.window.from_ms, "to_ms": timeline.window.to_ms},
        "scale_k": timeline.scale_k,
        "scale_t": timeline.scale_t,
        "spheres": [
            {
                "reading": reading_to_dict(s.reading),
                "diameter": s.diameter,
                "offset": s.offset,
            }
            for s in timeline.spheres
        ],
    }


def summary_to_dict(summary: ParticipationSummary) -> dict:
    return {
        "actor_id": summary.actor_id,
        "reads": summary.reads,
        "posts": summary.posts,
        "window": {"from_ms": summary.window.from_ms, "to_ms": summary.window.to_ms},
    }
