"""Domain types: use models, raw events, and state/transition traces.

A use model declares which on-page objects produce which event kinds for
each activity, plus the rules that move a user from one activity to the
next.  Raw events are single captured interactions; traces are the
structured alternating state/transition sequences built from them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from typing import Iterable, Mapping

from .errors import (
    AmbiguousRuleError,
    EmptyObservablesError,
    InvalidEventError,
    NoInitialActivityError,
    TraceInvariantError,
    UndeclaredActivityError,
    UseModelDocumentError,
    UseModelError,
)


class EventKind(str, Enum):
    """Closed set of observable event kinds."""

    CLICK = "click"
    EDIT_TEXT = "edit_text"
    SCROLL = "scroll"
    DISPLAY = "display"
    SUBMIT = "submit"
    MOUSEOVER = "mouseover"
    FOCUS = "focus"
    BLUR = "blur"
    SESSION_END = "session_end"


class ObjectClass(str, Enum):
    """Closed set of interaction-object classes."""

    HYPERTEXT = "hypertext"
    BUTTON = "button"
    IMAGE = "image"
    FORM = "form"
    SCROLLBAR = "scrollbar"
    PAGE = "page"


class Side(str, Enum):
    """Where an event was captured."""

    CLIENT = "client"
    SERVER = "server"


def parse_event_kind(token: str) -> EventKind:
    try:
        return EventKind(token)
    except ValueError:
        raise InvalidEventError(f"unknown event kind {token!r}") from None


@dataclass(frozen=True)
class InteractionObject:
    """An on-page object users interact with (button, form, page...)."""

    object_id: str
    object_class: ObjectClass


@dataclass(frozen=True)
class ObservableObject:
    """An interaction object paired with the event kinds it can produce."""

    object: InteractionObject
    events: frozenset[EventKind]


@dataclass(frozen=True)
class ActivityType:
    """A named activity and the observables that can occur during it."""

    name: str
    observables: tuple[ObservableObject, ...]


@dataclass(frozen=True)
class TransitionRule:
    """Deterministic rule: (from_activity, object, kind) ends one activity
    and begins another."""

    from_activity: str
    object_id: str
    kind: EventKind
    to_activity: str

    @property
    def trigger(self) -> tuple[str, str, EventKind]:
        return (self.from_activity, self.object_id, self.kind)


@dataclass(frozen=True)
class UseModel:
    """Full structuring vocabulary: activities, rules, and entry points.

    Construction is permissive; invariants are checked by
    :func:`validate_use_model` so that invalid models can be built and
    rejected with a precise error.
    """

    activities: tuple[ActivityType, ...]
    rules: tuple[TransitionRule, ...]
    initial_activities: frozenset[str]


@dataclass(frozen=True)
class ValidatedUseModel:
    """A use model plus the lookup tables the structuring machine needs.

    Only obtainable through :func:`validate_use_model`.
    """

    model: UseModel
    observable_index: Mapping[str, frozenset[tuple[str, EventKind]]]
    rule_index: Mapping[tuple[str, str, EventKind], str]

    @property
    def activity_names(self) -> frozenset[str]:
        return frozenset(self.observable_index)

    @property
    def initial_activities(self) -> frozenset[str]:
        return self.model.initial_activities


def validate_use_model(model: UseModel) -> ValidatedUseModel:
    """Check every use-model invariant and return a validated handle.

    Raises:
        UndeclaredActivityError: a rule or initial entry names an unknown
            activity.
        EmptyObservablesError: an activity has no observables, or an
            observable has no event kinds.
        AmbiguousRuleError: two rules share a trigger triple.
        NoInitialActivityError: the initial set is empty.
        UseModelError: a rule trigger is not observable in its source
            activity, or an activity name repeats.
    """
    names = [a.name for a in model.activities]
    seen: set[str] = set()
    for name in names:
        if name in seen:
            raise UseModelError(f"activity {name!r} declared twice")
        seen.add(name)

    observable_index: dict[str, frozenset[tuple[str, EventKind]]] = {}
    for activity in model.activities:
        if not activity.observables:
            raise EmptyObservablesError(
                f"activity {activity.name!r} has no observable objects"
            )
        pairs: set[tuple[str, EventKind]] = set()
        for obs in activity.observables:
            if not obs.object.object_id:
                raise UseModelError(
                    f"activity {activity.name!r} has an observable with an "
                    "empty object_id"
                )
            if not obs.events:
                raise EmptyObservablesError(
                    f"observable {obs.object.object_id!r} of activity "
                    f"{activity.name!r} has no event kinds"
                )
            pairs.update((obs.object.object_id, kind) for kind in obs.events)
        observable_index[activity.name] = frozenset(pairs)

    rule_index: dict[tuple[str, str, EventKind], str] = {}
    for rule in model.rules:
        for endpoint in (rule.from_activity, rule.to_activity):
            if endpoint not in observable_index:
                raise UndeclaredActivityError(
                    f"rule {rule.trigger} references undeclared activity "
                    f"{endpoint!r}"
                )
        if (rule.object_id, rule.kind) not in observable_index[rule.from_activity]:
            raise UseModelError(
                f"rule trigger ({rule.object_id!r}, {rule.kind.value}) is not "
                f"an observable of {rule.from_activity!r}"
            )
        if rule.trigger in rule_index:
            raise AmbiguousRuleError(f"duplicate rule for trigger {rule.trigger}")
        rule_index[rule.trigger] = rule.to_activity

    if not model.initial_activities:
        raise NoInitialActivityError("model declares no initial activities")
    for name in model.initial_activities:
        if name not in observable_index:
            raise UndeclaredActivityError(
                f"initial activity {name!r} is not declared"
            )

    return ValidatedUseModel(
        model=model,
        observable_index=observable_index,
        rule_index=rule_index,
    )


# --- use-model documents ------------------------------------------------------

def use_model_to_doc(model: UseModel) -> dict:
    """Serialize a use model to its JSON document form."""
    return {
        "activities": [
            {
                "name": a.name,
                "observables": [
                    {
                        "object_id": o.object.object_id,
                        "object_class": o.object.object_class.value,
                        "events": sorted(k.value for k in o.events),
                    }
                    for o in a.observables
                ],
            }
            for a in model.activities
        ],
        "rules": [
            {
                "from": r.from_activity,
                "object_id": r.object_id,
                "kind": r.kind.value,
                "to": r.to_activity,
            }
            for r in model.rules
        ],
        "initial": sorted(model.initial_activities),
    }


def use_model_from_doc(doc: Mapping) -> UseModel:
    """Parse the JSON document form back into a use model.

    Raises UseModelDocumentError on any shape or token problem; the result
    still has to pass :func:`validate_use_model`.
    """
    try:
        activities = tuple(
            ActivityType(
                name=entry["name"],
                observables=tuple(
                    ObservableObject(
                        object=InteractionObject(
                            object_id=obs["object_id"],
                            object_class=ObjectClass(obs["object_class"]),
                        ),
                        events=frozenset(EventKind(k) for k in obs["events"]),
                    )
                    for obs in entry["observables"]
                ),
            )
            for entry in doc["activities"]
        )
        rules = tuple(
            TransitionRule(
                from_activity=entry["from"],
                object_id=entry["object_id"],
                kind=EventKind(entry["kind"]),
                to_activity=entry["to"],
            )
            for entry in doc["rules"]
        )
        initial = frozenset(doc["initial"])
    except (KeyError, TypeError, ValueError) as exc:
        raise UseModelDocumentError(f"bad use-model document: {exc}") from exc
    return UseModel(activities=activities, rules=rules, initial_activities=initial)


def load_use_model(text: str | bytes) -> UseModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UseModelDocumentError(f"use-model document is not JSON: {exc}") from exc
    return use_model_from_doc(doc)


def default_forum_use_model() -> UseModel:
    """The bundled forum vocabulary: eight activities over a generic forum.

    Navigation is driven by server-side page displays (every activity can
    transition to any displayable page), plus the compose-and-submit flow.
    """
    text = resources.files("forumtrace.data").joinpath("default_model.json").read_text()
    return load_use_model(text)


# --- raw events ---------------------------------------------------------------

@dataclass(frozen=True)
class EventSource:
    """Which collector captured an event."""

    side: Side
    collector_id: str = ""


SCROLL_RATIO_ATTR = "scroll_ratio"


@dataclass(frozen=True)
class RawEvent:
    """One captured interaction or server occurrence.

    Field invariants are enforced on construction: kinds come from the
    closed set, timestamps and sequence numbers are non-negative, and
    scroll events must carry a scroll_ratio attribute in [0, 1].
    """

    event_id: str
    session_id: str
    actor_id: str
    source: EventSource
    seq: int
    timestamp_ms: int
    object_id: str
    kind: EventKind
    activity_hint: str | None = None
    attributes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.event_id:
            raise InvalidEventError("event_id must be non-empty")
        if self.seq < 0:
            raise InvalidEventError(f"seq must be >= 0, got {self.seq}")
        if self.timestamp_ms < 0:
            raise InvalidEventError(
                f"timestamp_ms must be >= 0, got {self.timestamp_ms}"
            )
        if not isinstance(self.kind, EventKind):
            raise InvalidEventError(f"kind must be an EventKind, got {self.kind!r}")
        if self.kind is EventKind.SCROLL:
            self.scroll_ratio()

    def scroll_ratio(self) -> float:
        """The scroll position carried by a scroll event, in [0, 1]."""
        raw = self.attributes.get(SCROLL_RATIO_ATTR)
        if raw is None:
            raise InvalidEventError(
                f"scroll event {self.event_id!r} lacks a {SCROLL_RATIO_ATTR} attribute"
            )
        try:
            ratio = float(raw)
        except ValueError:
            raise InvalidEventError(
                f"scroll event {self.event_id!r} has non-numeric ratio {raw!r}"
            ) from None
        if not 0.0 <= ratio <= 1.0:
            raise InvalidEventError(
                f"scroll event {self.event_id!r} has ratio {ratio} outside [0, 1]"
            )
        return ratio


# --- structured traces ----------------------------------------------------------

@dataclass(frozen=True)
class Annotation:
    """Instructor- or tool-added note attached to a state or transition."""

    key: str
    value: str
    author: str
    created_at_ms: int

    def __post_init__(self) -> None:
        if not self.key:
            raise InvalidEventError("annotation key must be non-empty")


@dataclass(frozen=True)
class State:
    """Interval during which the actor stays in one activity."""

    activity: str
    started_at_ms: int
    ended_at_ms: int
    censored: bool
    events: tuple[RawEvent, ...]
    attributes: Mapping[str, str] = field(default_factory=dict)
    annotations: tuple[Annotation, ...] = ()


@dataclass(frozen=True)
class Transition:
    """Event(s) that end one activity and begin the next."""

    trigger_events: tuple[RawEvent, ...]
    occurred_at_ms: int
    from_activity: str
    to_activity: str
    annotations: tuple[Annotation, ...] = ()


@dataclass(frozen=True)
class Quarantined:
    """An event excluded from structuring, kept with the reason why."""

    event: RawEvent
    reason: str


@dataclass(frozen=True)
class Trace:
    """Alternating state/transition sequence for one actor's session."""

    trace_id: str
    session_id: str
    actor_id: str
    sequence: tuple[State | Transition, ...]

    def states(self) -> tuple[State, ...]:
        return tuple(s for s in self.sequence if isinstance(s, State))

    def transitions(self) -> tuple[Transition, ...]:
        return tuple(t for t in self.sequence if isinstance(t, Transition))

    def with_annotation(self, path: int, annotation: Annotation) -> Trace:
        """Copy of this trace with `annotation` appended at sequence index
        `path`; everything else, events included, is untouched."""
        from .errors import PathOutOfBoundsError

        if not 0 <= path < len(self.sequence):
            raise PathOutOfBoundsError(
                f"path {path} outside sequence of length {len(self.sequence)}"
            )
        element = self.sequence[path]
        updated = replace(element, annotations=element.annotations + (annotation,))
        sequence = self.sequence[:path] + (updated,) + self.sequence[path + 1 :]
        return replace(self, sequence=sequence)


def validate_trace(trace: Trace, known_activities: Iterable[str] | None = None) -> None:
    """Check alternation, linkage, ordering, and event-uniqueness invariants.

    Raises TraceInvariantError on the first violation found.
    """
    seq = trace.sequence
    if not seq:
        raise TraceInvariantError(f"trace {trace.trace_id!r} has an empty sequence")
    if not isinstance(seq[0], State):
        raise TraceInvariantError(f"trace {trace.trace_id!r} must begin with a state")
    for i, element in enumerate(seq):
        expected = State if i % 2 == 0 else Transition
        if not isinstance(element, expected):
            raise TraceInvariantError(
                f"trace {trace.trace_id!r} breaks alternation at index {i}"
            )
    if len(seq) % 2 == 0:
        raise TraceInvariantError(
            f"trace {trace.trace_id!r} must end with a state"
        )

    known = frozenset(known_activities) if known_activities is not None else None
    seen_ids: set[str] = set()

    def check_events(events: Iterable[RawEvent], where: str) -> None:
        last_ts: int | None = None
        for event in events:
            if event.event_id in seen_ids:
                raise TraceInvariantError(
                    f"event {event.event_id!r} appears twice in trace "
                    f"{trace.trace_id!r}"
                )
            seen_ids.add(event.event_id)
            if last_ts is not None and event.timestamp_ms < last_ts:
                raise TraceInvariantError(
                    f"events out of time order in {where} of trace "
                    f"{trace.trace_id!r}"
                )
            last_ts = event.timestamp_ms

    for i, element in enumerate(seq):
        if isinstance(element, State):
            if known is not None and element.activity not in known:
                raise TraceInvariantError(
                    f"state activity {element.activity!r} is not declared"
                )
            if not element.censored and element.started_at_ms > element.ended_at_ms:
                raise TraceInvariantError(
                    f"state {i} of trace {trace.trace_id!r} ends before it starts"
                )
            check_events(element.events, f"state {i}")
        else:
            if not element.trigger_events:
                raise TraceInvariantError(
                    f"transition {i} of trace {trace.trace_id!r} has no triggers"
                )
            left = seq[i - 1]
            right = seq[i + 1]
            assert isinstance(left, State) and isinstance(right, State)
            if element.from_activity != left.activity:
                raise TraceInvariantError(
                    f"transition {i} of trace {trace.trace_id!r} does not leave "
                    f"the preceding state's activity"
                )
            if element.to_activity != right.activity:
                raise TraceInvariantError(
                    f"transition {i} of trace {trace.trace_id!r} does not enter "
                    f"the following state's activity"
                )
            check_events(element.trigger_events, f"transition {i}")
