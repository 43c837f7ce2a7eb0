"""Command line interface: serve, simulate, replay/ingest, finalize,
query, and export.

Direct database commands run with full instructor rights; role
enforcement applies to the HTTP surface.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .analysis import Window
from .config import load_config
from .errors import ForumTraceError
from .exporters import parse_export_format, trace_to_dict
from .repository import Principal, QueryFilter, Role, TraceRepository
from .service import TracingService
from .simulate import (
    DirectTarget,
    HttpTarget,
    ScenarioKind,
    ScenarioSpec,
    generate,
    replay,
)

# canonical demo window: 2006-05-31 11:12:51 .. 23:22:44 UTC
DEMO_WINDOW_FROM_MS = 1_149_073_971_000
DEMO_WINDOW_TO_MS = 1_149_117_764_000

_INSTRUCTOR = Principal(role=Role.INSTRUCTOR)


def _service(db: str) -> TracingService:
    return TracingService(TraceRepository(db))


@click.group()
def main() -> None:
    """Forum activity tracing toolkit."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
def serve(config_path: str) -> None:
    """Run the ingest service over HTTP."""
    import uvicorn

    from .webapi import build_app

    config = load_config(config_path)
    service = TracingService(TraceRepository(config.db_path), config)
    uvicorn.run(build_app(service), host=config.host, port=config.port)


@main.command()
@click.option("--kind", type=click.Choice([k.value for k in ScenarioKind]), required=True)
@click.option("--actors", type=int, default=4, show_default=True)
@click.option("--messages", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--window-from-ms", type=int, default=DEMO_WINDOW_FROM_MS, show_default=True)
@click.option("--window-to-ms", type=int, default=DEMO_WINDOW_TO_MS, show_default=True)
@click.option("--read-min-ms", type=int, default=8_000, show_default=True)
@click.option("--read-max-ms", type=int, default=90_000, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def simulate(
    kind: str,
    actors: int,
    messages: int,
    seed: int,
    window_from_ms: int,
    window_to_ms: int,
    read_min_ms: int,
    read_max_ms: int,
    out: str,
) -> None:
    """Generate a deterministic synthetic scenario file."""
    spec = ScenarioSpec(
        kind=ScenarioKind(kind),
        actors=actors,
        messages=messages,
        seed=seed,
        window=Window(from_ms=window_from_ms, to_ms=window_to_ms),
        read_duration_range_ms=(read_min_ms, read_max_ms),
    )
    text = generate(spec)
    Path(out).write_text(text)
    click.echo(f"wrote {len(text.splitlines()) - 1} events to {out}")


def _replay_command(
    events_file: str,
    url: str | None,
    db: str | None,
    shuffle: bool,
    seed: int,
    batch_size: int,
) -> None:
    if (url is None) == (db is None):
        raise click.UsageError("provide exactly one of --url or --db")
    target = HttpTarget(url) if url is not None else DirectTarget(_service(db))  # type: ignore[arg-type]
    report = replay(
        Path(events_file).read_text(),
        target,
        shuffle=shuffle,
        seed=seed,
        batch_size=batch_size,
    )
    click.echo(json.dumps(report.to_dict(), indent=2))


@main.command(name="replay")
@click.argument("events_file", type=click.Path(exists=True))
@click.option("--url", default=None, help="replay against a running service")
@click.option("--db", default=None, help="replay directly into a database file")
@click.option("--shuffle", is_flag=True, help="duplicate and reorder deliveries")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--batch-size", type=int, default=20, show_default=True)
def replay_cmd(
    events_file: str, url: str | None, db: str | None, shuffle: bool, seed: int, batch_size: int
) -> None:
    """Feed a scenario file to a service and finalize its sessions."""
    _replay_command(events_file, url, db, shuffle, seed, batch_size)


@main.command()
@click.argument("events_file", type=click.Path(exists=True))
@click.option("--db", required=True, help="database file to ingest into")
@click.option("--batch-size", type=int, default=20, show_default=True)
def ingest(events_file: str, db: str, batch_size: int) -> None:
    """Ingest a scenario file into a local database (clean replay)."""
    _replay_command(events_file, None, db, False, 0, batch_size)


@main.command()
@click.option("--session", "session_id", required=True)
@click.option("--db", required=True)
def finalize(session_id: str, db: str) -> None:
    """Structure and store one session's trace."""
    try:
        trace_id = _service(db).finalize_session(session_id)
    except ForumTraceError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(trace_id)


def _filter_options(actor, activity, message_id, from_ms, to_ms) -> QueryFilter:
    return QueryFilter(
        actor_id=actor,
        activity=activity,
        object_attr=("message_id", message_id) if message_id is not None else None,
        from_ms=from_ms,
        to_ms=to_ms,
    )


@main.command()
@click.option("--db", required=True)
@click.option("--actor", default=None)
@click.option("--activity", default=None)
@click.option("--message-id", default=None)
@click.option("--from-ms", type=int, default=None)
@click.option("--to-ms", type=int, default=None)
def query(actor, activity, message_id, from_ms, to_ms, db) -> None:
    """List stored traces matching a filter, as JSON."""
    try:
        stored = TraceRepository(db).query_stored(
            _filter_options(actor, activity, message_id, from_ms, to_ms)
        )
    except ForumTraceError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(
        json.dumps([trace_to_dict(s.trace, s.quarantined) for s in stored], indent=2)
    )


@main.command()
@click.option("--db", required=True)
@click.option("--format", "fmt", type=click.Choice(["xml", "json", "txt"]), required=True)
@click.option("--actor", default=None)
@click.option("--activity", default=None)
@click.option("--message-id", default=None)
@click.option("--from-ms", type=int, default=None)
@click.option("--to-ms", type=int, default=None)
@click.option("--out", type=click.Path(), default=None, help="default: stdout")
def export(db, fmt, actor, activity, message_id, from_ms, to_ms, out) -> None:
    """Export matching traces in xml, json, or txt form."""
    try:
        data = TraceRepository(db).export_traces(
            _filter_options(actor, activity, message_id, from_ms, to_ms),
            parse_export_format(fmt),
        )
    except ForumTraceError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    if out is None:
        sys.stdout.buffer.write(data)
    else:
        Path(out).write_bytes(data)
        click.echo(f"wrote {len(data)} bytes to {out}")


if __name__ == "__main__":
    main()
