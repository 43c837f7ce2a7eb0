"""Trace document codecs: JSON and XML (lossless), TXT (flat event log).

Export output is byte-deterministic: field order, indentation, and
attribute order are fixed, so export -> import -> export reproduces the
original document exactly.  TXT is one tab-separated event per line and
is deliberately lossy (no annotations, no quarantine, not importable).
"""

from __future__ import annotations

import json
from enum import Enum
from typing import Mapping, Sequence
from urllib.parse import parse_qsl, urlencode
from xml.etree import ElementTree
from xml.sax.saxutils import quoteattr

from .errors import DocumentParseError, UnsupportedFormatError
from .model import (
    Annotation,
    EventSource,
    Quarantined,
    RawEvent,
    Side,
    State,
    Trace,
    Transition,
    parse_event_kind,
)


class ExportFormat(str, Enum):
    XML = "xml"
    TXT = "txt"
    JSON = "json"


TraceItem = tuple[Trace, tuple[Quarantined, ...]]


def parse_export_format(token: str) -> ExportFormat:
    try:
        return ExportFormat(token)
    except ValueError:
        raise UnsupportedFormatError(f"unknown export format {token!r}") from None


# --- dict codec (shared by JSON export and repository storage) ----------------

def event_to_dict(event: RawEvent) -> dict:
    return {
        "event_id": event.event_id,
        "session_id": event.session_id,
        "actor_id": event.actor_id,
        "side": event.source.side.value,
        "collector_id": event.source.collector_id,
        "seq": event.seq,
        "timestamp_ms": event.timestamp_ms,
        "activity_hint": event.activity_hint,
        "object_id": event.object_id,
        "kind": event.kind.value,
        "attributes": dict(event.attributes),
    }


def event_from_dict(doc: Mapping) -> RawEvent:
    return RawEvent(
        event_id=doc["event_id"],
        session_id=doc["session_id"],
        actor_id=doc["actor_id"],
        source=EventSource(side=Side(doc["side"]), collector_id=doc["collector_id"]),
        seq=int(doc["seq"]),
        timestamp_ms=int(doc["timestamp_ms"]),
        object_id=doc["object_id"],
        kind=parse_event_kind(doc["kind"]),
        activity_hint=doc.get("activity_hint"),
        attributes=dict(doc.get("attributes", {})),
    )


def annotation_to_dict(annotation: Annotation) -> dict:
    return {
        "key": annotation.key,
        "value": annotation.value,
        "author": annotation.author,
        "created_at_ms": annotation.created_at_ms,
    }


def annotation_from_dict(doc: Mapping) -> Annotation:
    return Annotation(
        key=doc["key"],
        value=doc["value"],
        author=doc["author"],
        created_at_ms=int(doc["created_at_ms"]),
    )


def _element_to_dict(element: State | Transition) -> dict:
    if isinstance(element, State):
        return {
            "activity": element.activity,
            "started_at_ms": element.started_at_ms,
            "ended_at_ms": element.ended_at_ms,
            "censored": element.censored,
            "events": [event_to_dict(e) for e in element.events],
            "attributes": dict(element.attributes),
            "annotations": [annotation_to_dict(a) for a in element.annotations],
        }
    return {
        "from_activity": element.from_activity,
        "to_activity": element.to_activity,
        "occurred_at_ms": element.occurred_at_ms,
        "trigger_events": [event_to_dict(e) for e in element.trigger_events],
        "annotations": [annotation_to_dict(a) for a in element.annotations],
    }


def _element_from_dict(doc: Mapping) -> State | Transition:
    if "activity" in doc:
        return State(
            activity=doc["activity"],
            started_at_ms=int(doc["started_at_ms"]),
            ended_at_ms=int(doc["ended_at_ms"]),
            censored=bool(doc["censored"]),
            events=tuple(event_from_dict(e) for e in doc["events"]),
            attributes=dict(doc.get("attributes", {})),
            annotations=tuple(annotation_from_dict(a) for a in doc.get("annotations", [])),
        )
    if "from_activity" in doc:
        return Transition(
            trigger_events=tuple(event_from_dict(e) for e in doc["trigger_events"]),
            occurred_at_ms=int(doc["occurred_at_ms"]),
            from_activity=doc["from_activity"],
            to_activity=doc["to_activity"],
            annotations=tuple(annotation_from_dict(a) for a in doc.get("annotations", [])),
        )
    raise DocumentParseError("sequence element is neither a state nor a transition")


def trace_to_dict(trace: Trace, quarantined: Sequence[Quarantined] = ()) -> dict:
    return {
        "trace_id": trace.trace_id,
        "session_id": trace.session_id,
        "actor_id": trace.actor_id,
        "sequence": [_element_to_dict(e) for e in trace.sequence],
        "quarantine": [
            {"reason": q.reason, "event": event_to_dict(q.event)} for q in quarantined
        ],
    }


def trace_from_dict(doc: Mapping) -> TraceItem:
    try:
        trace = Trace(
            trace_id=doc["trace_id"],
            session_id=doc["session_id"],
            actor_id=doc["actor_id"],
            sequence=tuple(_element_from_dict(e) for e in doc["sequence"]),
        )
        quarantined = tuple(
            Quarantined(event=event_from_dict(q["event"]), reason=q["reason"])
            for q in doc.get("quarantine", [])
        )
    except DocumentParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentParseError(f"bad trace document: {exc}") from exc
    return trace, quarantined


# --- JSON ---------------------------------------------------------------------

def export_json(items: Sequence[TraceItem], model_version: int) -> bytes:
    doc = {
        "model_version": model_version,
        "traces": [trace_to_dict(trace, quarantined) for trace, quarantined in items],
    }
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def import_json(data: bytes) -> tuple[int, list[TraceItem]]:
    try:
        doc = json.loads(data)
        version = int(doc["model_version"])
        items = [trace_from_dict(entry) for entry in doc["traces"]]
    except DocumentParseError:
        raise
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DocumentParseError(f"bad JSON export document: {exc}") from exc
    return version, items


# --- XML ----------------------------------------------------------------------

def _attrs_value(attributes: Mapping[str, str]) -> str:
    return urlencode(list(attributes.items()))


def _event_xml(event: RawEvent, indent: str) -> str:
    parts = [
        f"event_id={quoteattr(event.event_id)}",
        f"session_id={quoteattr(event.session_id)}",
        f"actor_id={quoteattr(event.actor_id)}",
        f"side={quoteattr(event.source.side.value)}",
        f"collector_id={quoteattr(event.source.collector_id)}",
        f'seq="{event.seq}"',
        f'timestamp_ms="{event.timestamp_ms}"',
    ]
    if event.activity_hint is not None:
        parts.append(f"activity_hint={quoteattr(event.activity_hint)}")
    parts += [
        f"object_id={quoteattr(event.object_id)}",
        f"kind={quoteattr(event.kind.value)}",
        f"attributes={quoteattr(_attrs_value(event.attributes))}",
    ]
    return f"{indent}<event {' '.join(parts)}/>"


def _annotation_xml(annotation: Annotation, indent: str) -> str:
    return (
        f"{indent}<annotation key={quoteattr(annotation.key)} "
        f"value={quoteattr(annotation.value)} "
        f"author={quoteattr(annotation.author)} "
        f'created_at_ms="{annotation.created_at_ms}"/>'
    )


def export_xml(items: Sequence[TraceItem], model_version: int) -> bytes:
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<traces model_version="{model_version}">',
    ]
    for trace, quarantined in items:
        lines.append(
            f"  <trace id={quoteattr(trace.trace_id)} "
            f"session={quoteattr(trace.session_id)} "
            f"actor={quoteattr(trace.actor_id)}>"
        )
        for element in trace.sequence:
            if isinstance(element, State):
                censored = "true" if element.censored else "false"
                lines.append(
                    f"    <state activity={quoteattr(element.activity)} "
                    f'start_ms="{element.started_at_ms}" '
                    f'end_ms="{element.ended_at_ms}" '
                    f'censored="{censored}" '
                    f"attributes={quoteattr(_attrs_value(element.attributes))}>"
                )
                for event in element.events:
                    lines.append(_event_xml(event, "      "))
                for annotation in element.annotations:
                    lines.append(_annotation_xml(annotation, "      "))
                lines.append("    </state>")
            else:
                lines.append(
                    f'    <transition at_ms="{element.occurred_at_ms}" '
                    f"from={quoteattr(element.from_activity)} "
                    f"to={quoteattr(element.to_activity)}>"
                )
                for event in element.trigger_events:
                    lines.append(_event_xml(event, "      "))
                for annotation in element.annotations:
                    lines.append(_annotation_xml(annotation, "      "))
                lines.append("    </transition>")
        if quarantined:
            lines.append("    <quarantine>")
            for q in quarantined:
                lines.append(f"      <quarantined reason={quoteattr(q.reason)}>")
                lines.append(_event_xml(q.event, "        "))
                lines.append("      </quarantined>")
            lines.append("    </quarantine>")
        lines.append("  </trace>")
    lines.append("</traces>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_attrs(value: str) -> dict[str, str]:
    return dict(parse_qsl(value, keep_blank_values=True))


def _event_from_xml(node: ElementTree.Element) -> RawEvent:
    return RawEvent(
        event_id=node.attrib["event_id"],
        session_id=node.attrib["session_id"],
        actor_id=node.attrib["actor_id"],
        source=EventSource(
            side=Side(node.attrib["side"]),
            collector_id=node.attrib["collector_id"],
        ),
        seq=int(node.attrib["seq"]),
        timestamp_ms=int(node.attrib["timestamp_ms"]),
        object_id=node.attrib["object_id"],
        kind=parse_event_kind(node.attrib["kind"]),
        activity_hint=node.attrib.get("activity_hint"),
        attributes=_parse_attrs(node.attrib.get("attributes", "")),
    )


def _annotation_from_xml(node: ElementTree.Element) -> Annotation:
    return Annotation(
        key=node.attrib["key"],
        value=node.attrib["value"],
        author=node.attrib["author"],
        created_at_ms=int(node.attrib["created_at_ms"]),
    )


def import_xml(data: bytes) -> tuple[int, list[TraceItem]]:
    try:
        root = ElementTree.fromstring(data)
    except ElementTree.ParseError as exc:
        raise DocumentParseError(f"bad XML export document: {exc}") from exc
    if root.tag != "traces":
        raise DocumentParseError(f"expected <traces> root, got <{root.tag}>")
    try:
        version = int(root.attrib["model_version"])
        items: list[TraceItem] = []
        for trace_node in root:
            if trace_node.tag != "trace":
                raise DocumentParseError(f"unexpected element <{trace_node.tag}>")
            sequence: list[State | Transition] = []
            quarantined: list[Quarantined] = []
            for child in trace_node:
                if child.tag == "state":
                    sequence.append(
                        State(
                            activity=child.attrib["activity"],
                            started_at_ms=int(child.attrib["start_ms"]),
                            ended_at_ms=int(child.attrib["end_ms"]),
                            censored=child.attrib["censored"] == "true",
                            events=tuple(
                                _event_from_xml(n) for n in child if n.tag == "event"
                            ),
                            attributes=_parse_attrs(child.attrib.get("attributes", "")),
                            annotations=tuple(
                                _annotation_from_xml(n)
                                for n in child
                                if n.tag == "annotation"
                            ),
                        )
                    )
                elif child.tag == "transition":
                    sequence.append(
                        Transition(
                            trigger_events=tuple(
                                _event_from_xml(n) for n in child if n.tag == "event"
                            ),
                            occurred_at_ms=int(child.attrib["at_ms"]),
                            from_activity=child.attrib["from"],
                            to_activity=child.attrib["to"],
                            annotations=tuple(
                                _annotation_from_xml(n)
                                for n in child
                                if n.tag == "annotation"
                            ),
                        )
                    )
                elif child.tag == "quarantine":
                    for q_node in child:
                        event_node = q_node.find("event")
                        if event_node is None:
                            raise DocumentParseError("quarantined entry without event")
                        quarantined.append(
                            Quarantined(
                                event=_event_from_xml(event_node),
                                reason=q_node.attrib["reason"],
                            )
                        )
                else:
                    raise DocumentParseError(f"unexpected element <{child.tag}>")
            items.append(
                (
                    Trace(
                        trace_id=trace_node.attrib["id"],
                        session_id=trace_node.attrib["session"],
                        actor_id=trace_node.attrib["actor"],
                        sequence=tuple(sequence),
                    ),
                    tuple(quarantined),
                )
            )
    except DocumentParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DocumentParseError(f"bad XML export document: {exc}") from exc
    return version, items


# --- TXT ------------------------------------------------------------------------

def event_txt_line(event: RawEvent, activity: str) -> str:
    """One tab-separated event line; attributes are url-encoded."""
    return "\t".join(
        [
            str(event.timestamp_ms),
            event.session_id,
            event.actor_id,
            event.source.side.value,
            activity,
            event.object_id,
            event.kind.value,
            _attrs_value(event.attributes),
        ]
    )


def export_txt(items: Sequence[TraceItem], model_version: int) -> bytes:
    del model_version  # the flat log carries no model metadata
    lines: list[str] = []
    for trace, _quarantined in items:
        for element in trace.sequence:
            if isinstance(element, State):
                lines.extend(event_txt_line(e, element.activity) for e in element.events)
            else:
                lines.extend(
                    event_txt_line(e, element.from_activity)
                    for e in element.trigger_events
                )
    return ("\n".join(lines) + "\n" if lines else "").encode("utf-8")


# --- dispatch ---------------------------------------------------------------------

def export_document(
    items: Sequence[TraceItem], model_version: int, fmt: ExportFormat
) -> bytes:
    if fmt is ExportFormat.XML:
        return export_xml(items, model_version)
    if fmt is ExportFormat.JSON:
        return export_json(items, model_version)
    return export_txt(items, model_version)


def import_document(data: bytes, fmt: ExportFormat) -> tuple[int, list[TraceItem]]:
    if fmt is ExportFormat.XML:
        return import_xml(data)
    if fmt is ExportFormat.JSON:
        return import_json(data)
    raise UnsupportedFormatError("txt documents are lossy and cannot be imported")
