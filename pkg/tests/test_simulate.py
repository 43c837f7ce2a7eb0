"""Scenario generation and replay: determinism, contracts, closure."""

from __future__ import annotations

import json

import pytest

from forumtrace.analysis import Window, detect_lurkers
from forumtrace.errors import InvalidSpecError, ScenarioFileError
from forumtrace.exporters import ExportFormat
from forumtrace.model import EventKind, Side
from forumtrace.repository import QueryFilter, TraceRepository
from forumtrace.service import TracingService
from forumtrace.simulate import (
    DirectTarget,
    ScenarioKind,
    ScenarioSpec,
    build_deliveries,
    generate,
    parse_scenario,
    replay,
)

WINDOW = Window(1_149_073_971_000, 1_149_117_764_000)


def spec(kind=ScenarioKind.MIXED, actors=4, messages=2, seed=11, **extra):
    return ScenarioSpec(
        kind=kind, actors=actors, messages=messages, seed=seed, window=WINDOW, **extra
    )


def fresh_service():
    return TracingService(TraceRepository(":memory:"))


class TestGenerate:
    def test_lurker_scenario_never_submits(self):
        text = generate(spec(kind=ScenarioKind.LURKER, actors=2))
        parsed = parse_scenario(text)
        kinds = {e.kind for e in parsed.events}
        assert EventKind.DISPLAY in kinds
        assert not any(e.object_id == "submit_button" for e in parsed.events)
        assert parsed.header["lurkers"] == ["u1", "u2"]

    def test_byte_identical_across_runs(self):
        assert generate(spec()) == generate(spec())

    def test_different_seeds_differ(self):
        assert generate(spec(seed=1)) != generate(spec(seed=2))

    def test_mixed_covers_figure_behaviors(self):
        parsed = parse_scenario(generate(spec(actors=4, messages=1)))
        by_actor: dict[str, list] = {}
        for event in parsed.events:
            by_actor.setdefault(event.actor_id, []).append(event)
        assert set(by_actor) == {"u1", "u2", "u3", "u4"}
        # reading message 25: u1 full (>=0.98), u2 none, u3 partial, u4 full
        def max_ratio(actor):
            ratios = [
                e.scroll_ratio() for e in by_actor[actor] if e.kind is EventKind.SCROLL
            ]
            return max(ratios) if ratios else None

        assert max_ratio("u1") >= 0.98
        assert max_ratio("u2") is None
        assert max_ratio("u3") is not None and max_ratio("u3") < 0.98
        assert max_ratio("u4") >= 0.98
        posters = {
            e.actor_id for e in parsed.events if e.object_id == "submit_button"
        }
        assert posters == {"u1", "u3"}
        assert parsed.header["lurkers"] == ["u2", "u4"]
        assert parsed.header["message_ids"][0] == "25"

    def test_all_events_inside_window(self):
        parsed = parse_scenario(generate(spec(actors=5, messages=3)))
        assert all(
            WINDOW.contains(e.timestamp_ms) for e in parsed.events
        )

    def test_window_too_small_rejected(self):
        tiny = Window(0, 10_000)
        with pytest.raises(InvalidSpecError):
            generate(
                ScenarioSpec(
                    kind=ScenarioKind.MIXED,
                    actors=3,
                    messages=5,
                    seed=1,
                    window=tiny,
                )
            )

    @pytest.mark.parametrize(
        "field,value",
        [("actors", 0), ("messages", 0), ("read_duration_range_ms", (50, 20))],
    )
    def test_invalid_spec(self, field, value):
        kwargs = {"kind": ScenarioKind.MIXED, "actors": 2, "messages": 1, "seed": 1, "window": WINDOW}
        kwargs[field] = value
        with pytest.raises(InvalidSpecError):
            ScenarioSpec(**kwargs).validate()


class TestParse:
    def test_round_trips_event_count(self):
        text = generate(spec())
        parsed = parse_scenario(text)
        assert len(parsed.events) == len(text.splitlines()) - 1

    def test_ids_and_seqs_are_deterministic(self):
        text = generate(spec())
        first = parse_scenario(text)
        second = parse_scenario(text)
        assert first.events == second.events
        for session in {e.session_id for e in first.events}:
            seqs = [
                e.seq
                for e in first.events
                if e.session_id == session and e.source.side is Side.CLIENT
            ]
            assert seqs == sorted(seqs)
            assert len(set(seqs)) == len(seqs)

    def test_bad_header_rejected(self):
        with pytest.raises(ScenarioFileError):
            parse_scenario("not json\n")

    def test_bad_line_rejected(self):
        text = generate(spec())
        with pytest.raises(ScenarioFileError):
            parse_scenario(text + "only\tthree\tfields\n")


class TestReplay:
    def test_accepted_count_equals_file_lines(self):
        text = generate(spec(kind=ScenarioKind.LURKER, actors=2))
        report = replay(text, DirectTarget(fresh_service()))
        assert report.accepted_events == report.total_events
        assert report.acks == {"accepted": report.deliveries}

    def test_batches_group_client_events(self):
        text = generate(spec())
        parsed = parse_scenario(text)
        deliveries = build_deliveries(parsed.events, batch_size=3)
        batch_events = [
            len(doc["events"]) for kind, doc in deliveries if kind == "batch"
        ]
        assert all(n <= 3 for n in batch_events)
        server_count = sum(1 for kind, _ in deliveries if kind == "server")
        assert server_count == sum(
            1 for e in parsed.events if e.source.side is Side.SERVER
        )

    def test_shuffled_replay_equals_clean_replay(self):
        text = generate(spec(actors=3, messages=2, seed=5))
        clean = fresh_service()
        replay(text, DirectTarget(clean))
        shuffled = fresh_service()
        report = replay(text, DirectTarget(shuffled), shuffle=True, seed=99)
        assert report.acks.get("duplicate", 0) > 0
        assert "rejected" not in report.acks
        for fmt in (ExportFormat.XML, ExportFormat.JSON):
            assert clean.repository.export_traces(
                QueryFilter(), fmt
            ) == shuffled.repository.export_traces(QueryFilter(), fmt)

    def test_empty_scenario_replays_to_nothing(self):
        header = json.dumps({"format": "forumtrace-scenario/1"})
        report = replay(header + "\n", DirectTarget(fresh_service()))
        assert report.total_events == 0
        assert report.finalized == {}

    def test_lurker_closure_against_analysis(self):
        for seed in (1, 2, 3):
            text = generate(spec(actors=5, messages=2, seed=seed))
            parsed = parse_scenario(text)
            svc = fresh_service()
            replay(text, DirectTarget(svc))
            traces = svc.repository.query_traces(QueryFilter())
            assert detect_lurkers(traces, WINDOW) == set(parsed.header["lurkers"])
