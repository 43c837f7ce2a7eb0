"""Deterministic structuring of ordered event streams into traces.

The machine folds a time-ordered stream for one session into an
alternating state/transition sequence: events that match a transition
rule close the current state and open the next one; other observable
events stay inside the current state; everything else is quarantined
with a reason instead of being dropped.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import (
    EmptyStreamError,
    NoInitialMatchError,
    StructuringError,
    UndeclaredActivityError,
)
from .model import (
    Annotation,
    EventKind,
    Quarantined,
    RawEvent,
    State,
    Trace,
    Transition,
    ValidatedUseModel,
    validate_trace,
)


class ClassificationKind(Enum):
    WITHIN = "within"
    TRANSITION = "transition"
    UNMATCHED = "unmatched"


@dataclass(frozen=True)
class Classification:
    """Outcome of classifying one event against the current activity."""

    kind: ClassificationKind
    to_activity: str | None = None


WITHIN = Classification(ClassificationKind.WITHIN)
UNMATCHED = Classification(ClassificationKind.UNMATCHED)


def classify_event(
    model: ValidatedUseModel, current_activity: str, event: RawEvent
) -> Classification:
    """Classify one event relative to the activity in progress.

    Returns a transition exactly when a rule matches the
    (activity, object, kind) triple; within-state when the pair is merely
    observable; unmatched otherwise.  Pure and total over valid inputs.
    """
    if current_activity not in model.observable_index:
        raise UndeclaredActivityError(
            f"current activity {current_activity!r} is not declared"
        )
    target = model.rule_index.get((current_activity, event.object_id, event.kind))
    if target is not None:
        return Classification(ClassificationKind.TRANSITION, target)
    if (event.object_id, event.kind) in model.observable_index[current_activity]:
        return WITHIN
    return UNMATCHED


def opening_activity(model: ValidatedUseModel, event: RawEvent) -> str | None:
    """Which activity a stream-opening event starts, if any.

    A declared activity_hint is authoritative (server display events carry
    one).  Without a hint, the event must be observable in an initial
    activity; ties are broken by lexicographic activity name so opening is
    deterministic.
    """
    hint = event.activity_hint
    if hint is not None and hint in model.observable_index:
        return hint
    pair = (event.object_id, event.kind)
    candidates = sorted(
        name
        for name in model.initial_activities
        if pair in model.observable_index[name]
    )
    return candidates[0] if candidates else None


@dataclass(frozen=True)
class StructuredTrace:
    """Result of structuring: the trace plus everything it excluded."""

    trace: Trace
    quarantined: tuple[Quarantined, ...]


def structure_trace(
    model: ValidatedUseModel,
    session_id: str,
    actor_id: str,
    events: Sequence[RawEvent],
    trace_id: str | None = None,
) -> StructuredTrace:
    """Fold a time-ordered event stream into one trace.

    The first event that can open a state (see :func:`opening_activity`)
    begins the sequence; earlier events are quarantined.  A session_end
    event closes the current state at its own timestamp (observed end);
    a stream that just stops leaves its final state censored at the last
    event's timestamp.  Identical inputs always produce identical output.

    Raises:
        EmptyStreamError: the stream has no events.
        NoInitialMatchError: no event can open a state.
        StructuringError: events are unordered or from mixed sessions.
    """
    if not events:
        raise EmptyStreamError(f"session {session_id!r} has no events")
    last_ts: int | None = None
    for event in events:
        if event.session_id != session_id or event.actor_id != actor_id:
            raise StructuringError(
                f"event {event.event_id!r} belongs to "
                f"({event.session_id!r}, {event.actor_id!r}), not "
                f"({session_id!r}, {actor_id!r})"
            )
        if last_ts is not None and event.timestamp_ms < last_ts:
            raise StructuringError(
                f"event {event.event_id!r} is out of time order"
            )
        last_ts = event.timestamp_ms

    sequence: list[State | Transition] = []
    quarantined: list[Quarantined] = []
    current: str | None = None
    started_at = 0
    contained: list[RawEvent] = []
    attributes: dict[str, str] = {}
    session_ended = False

    def close_state(ended_at: int, censored: bool) -> None:
        sequence.append(
            State(
                activity=current,  # type: ignore[arg-type]
                started_at_ms=started_at,
                ended_at_ms=ended_at,
                censored=censored,
                events=tuple(contained),
                attributes=dict(attributes),
            )
        )

    for event in events:
        if session_ended:
            quarantined.append(Quarantined(event, "after session end"))
            continue

        if current is None:
            if event.kind is EventKind.SESSION_END:
                quarantined.append(
                    Quarantined(event, "session ended before any state opened")
                )
                session_ended = True
                continue
            opened = opening_activity(model, event)
            if opened is None:
                quarantined.append(Quarantined(event, "cannot open an initial state"))
                continue
            current = opened
            started_at = event.timestamp_ms
            contained = [event]
            attributes = dict(event.attributes)
            continue

        if event.kind is EventKind.SESSION_END:
            contained.append(event)
            close_state(event.timestamp_ms, censored=False)
            current = None
            session_ended = True
            continue

        outcome = classify_event(model, current, event)
        if outcome.kind is ClassificationKind.UNMATCHED:
            quarantined.append(
                Quarantined(
                    event,
                    f"({event.object_id}, {event.kind.value}) is not observable "
                    f"in {current}",
                )
            )
        elif outcome.kind is ClassificationKind.WITHIN:
            contained.append(event)
        else:
            close_state(event.timestamp_ms, censored=False)
            sequence.append(
                Transition(
                    trigger_events=(event,),
                    occurred_at_ms=event.timestamp_ms,
                    from_activity=current,
                    to_activity=outcome.to_activity,  # type: ignore[arg-type]
                )
            )
            current = outcome.to_activity
            started_at = event.timestamp_ms
            contained = []
            attributes = dict(event.attributes)

    if current is not None:
        last_event_ts = contained[-1].timestamp_ms if contained else started_at
        close_state(last_event_ts, censored=True)

    if not sequence:
        raise NoInitialMatchError(
            f"no event in session {session_id!r} can open an initial state"
        )

    trace = Trace(
        trace_id=trace_id if trace_id is not None else f"t-{session_id}",
        session_id=session_id,
        actor_id=actor_id,
        sequence=tuple(sequence),
    )
    validate_trace(trace, model.observable_index)
    return StructuredTrace(trace=trace, quarantined=tuple(quarantined))


def annotate(trace: Trace, path: int, annotation: Annotation) -> Trace:
    """Trace with `annotation` appended at sequence index `path`.

    Enrichment never mutates the original: a new trace is returned and the
    contained events are shared untouched.
    """
    return trace.with_annotation(path, annotation)
