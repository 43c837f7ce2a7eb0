"""Shared fixtures and event-stream builders."""

from __future__ import annotations

import itertools
import random

import pytest

from forumtrace.model import (
    EventKind,
    EventSource,
    RawEvent,
    Side,
    default_forum_use_model,
    validate_use_model,
)

_counter = itertools.count()


def make_event(
    kind: EventKind | str,
    object_id: str,
    ts: int,
    side: Side | str = Side.CLIENT,
    session: str = "s1",
    actor: str = "u1",
    hint: str | None = None,
    attrs: dict[str, str] | None = None,
    seq: int | None = None,
    event_id: str | None = None,
) -> RawEvent:
    n = next(_counter)
    return RawEvent(
        event_id=event_id if event_id is not None else f"e{n:06d}",
        session_id=session,
        actor_id=actor,
        source=EventSource(side=Side(side), collector_id="test"),
        seq=seq if seq is not None else n,
        timestamp_ms=ts,
        object_id=object_id,
        kind=EventKind(kind),
        activity_hint=hint,
        attributes=attrs or {},
    )


def display(object_id: str, hint: str, ts: int, **kwargs) -> RawEvent:
    return make_event(EventKind.DISPLAY, object_id, ts, side=Side.SERVER, hint=hint, **kwargs)


def scroll(ratio: float, ts: int, **kwargs) -> RawEvent:
    return make_event(
        EventKind.SCROLL, "page", ts, attrs={"scroll_ratio": str(ratio)}, **kwargs
    )


@pytest.fixture(scope="session")
def model():
    return validate_use_model(default_forum_use_model())


# --- random but structurally plausible streams for fuzzing ---------------------

_NAV_DISPLAYS = [
    ("forum_index_page", "DisplayForumIndex"),
    ("thread_page", "DisplayThread"),
    ("message_page", "DisplayMessage"),
    ("compose_form", "ComposeMessage"),
    ("search_results_page", "Search"),
    ("logout_page", "Logout"),
]
_WITHIN_KINDS = [
    EventKind.CLICK,
    EventKind.MOUSEOVER,
    EventKind.FOCUS,
    EventKind.BLUR,
]


def random_stream(
    rng: random.Random, session: str = "s1", actor: str = "u1"
) -> list[RawEvent]:
    """A time-ordered stream mixing openers, within-events, transitions,
    unmatched junk, and occasional session_end markers."""
    events: list[RawEvent] = []
    ts = rng.randint(0, 10_000)
    seq = 0

    def emit(kind, object_id, side=Side.CLIENT, hint=None, attrs=None):
        nonlocal ts, seq
        ts += rng.randint(0, 2_000)
        seq += 1
        events.append(
            RawEvent(
                event_id=f"{session}-f{seq:05d}",
                session_id=session,
                actor_id=actor,
                source=EventSource(side=side, collector_id="fuzz"),
                seq=seq,
                timestamp_ms=ts,
                object_id=object_id,
                kind=kind,
                activity_hint=hint,
                attributes=attrs or {},
            )
        )

    page, hint = rng.choice(_NAV_DISPLAYS)
    emit(EventKind.DISPLAY, page, side=Side.SERVER, hint=hint)

    for _ in range(rng.randint(0, 40)):
        roll = rng.random()
        if roll < 0.35:
            emit(EventKind.SCROLL, "page", attrs={"scroll_ratio": str(round(rng.random(), 3))})
        elif roll < 0.55:
            emit(rng.choice(_WITHIN_KINDS), "page")
        elif roll < 0.80:
            page, hint = rng.choice(_NAV_DISPLAYS)
            emit(EventKind.DISPLAY, page, side=Side.SERVER, hint=hint)
        elif roll < 0.93:
            junk_kinds = [
                EventKind.CLICK,
                EventKind.EDIT_TEXT,
                EventKind.DISPLAY,
                EventKind.SUBMIT,
                EventKind.MOUSEOVER,
            ]
            emit(rng.choice(junk_kinds), f"junk_{rng.randint(0, 5)}")
        else:
            emit(EventKind.SESSION_END, "page")
    return events
