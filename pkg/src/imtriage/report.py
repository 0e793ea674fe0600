"""Case report assembly and deterministic emission.

JSON is the canonical machine format: sorted keys, two-space indent,
UTF-8, trailing newline — two runs over the same tree are byte-identical.
CSV provides one table per section (a single delimited stream from
emit_report, one file per section from write_report); text is a human
summary. No wall-clock values enter the report.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

from .errors import UnsupportedFormatError
from .locator import ArtifactStore
from .media import EncryptedBackupRef, MediaRef
from .records import (
    CallRecord,
    ChatMessage,
    ChatThread,
    Contact,
    ParseWarning,
    PerContactSummary,
    ViberMessage,
)
from .timestamps import UNIT_LABELS

JSON_FORMAT = "json"
CSV_FORMAT = "csv"
TEXT_FORMAT = "text"
FORMATS = (JSON_FORMAT, CSV_FORMAT, TEXT_FORMAT)


def assumption_timestamp_unit(store_path: str, unit: str) -> str:
    return (
        f"{store_path}: timestamps interpreted as epoch "
        f"{UNIT_LABELS[unit]} (magnitude heuristic)"
    )


def assumption_duration_unit(unit: str) -> str:
    return f"call durations interpreted as {unit} (configured duration unit)"


@dataclass(frozen=True)
class TimelineEvent:
    epoch_ms: int
    timestamp_utc: str
    app: str
    kind: str  # whatsapp-message | viber-message | viber-call
    store_path: str
    rowid: int
    remote: str | None
    summary: str


@dataclass
class CaseReport:
    case_id: str
    tool_version: str
    manifest_digest: str | None
    stores: list[ArtifactStore] = field(default_factory=list)
    store_tables: dict[str, list[str]] = field(default_factory=dict)
    wa_messages: list[ChatMessage] = field(default_factory=list)
    wa_threads: list[ChatThread] = field(default_factory=list)
    wa_contacts: list[Contact] = field(default_factory=list)
    media_refs: list[MediaRef] = field(default_factory=list)
    encrypted_backups: list[EncryptedBackupRef] = field(default_factory=list)
    viber_calls: list[CallRecord] = field(default_factory=list)
    viber_messages: list[ViberMessage] = field(default_factory=list)
    viber_contacts: list[Contact] = field(default_factory=list)
    viber_numbers: list[str] = field(default_factory=list)
    viber_summaries: list[PerContactSummary] = field(default_factory=list)
    timeline: list[TimelineEvent] = field(default_factory=list)
    warnings: list[ParseWarning] = field(default_factory=list)
    assumptions: list[str] = field(default_factory=list)


def build_timeline(
    wa_messages: list[ChatMessage],
    viber_calls: list[CallRecord],
    viber_messages: list[ViberMessage],
) -> list[TimelineEvent]:
    """One event per message/call, in (instant, app, store, rowid) order —
    a total order, so the rendering is byte-deterministic."""
    events = []
    for message in wa_messages:
        summary = message.text if message.text else (
            f"[media {message.media_name}]" if message.media_name else "[empty]"
        )
        events.append(
            TimelineEvent(
                message.epoch_ms, message.timestamp_utc, "whatsapp", "whatsapp-message",
                message.store_path, message.rowid, message.thread_key, summary,
            )
        )
    for call in viber_calls:
        events.append(
            TimelineEvent(
                call.epoch_ms, call.start_time_utc, "viber", "viber-call",
                call.store_path, call.rowid, call.remote_number,
                f"{call.direction} call, {call.duration_seconds}s",
            )
        )
    for message in viber_messages:
        events.append(
            TimelineEvent(
                message.epoch_ms, message.timestamp_utc, "viber", "viber-message",
                message.store_path, message.rowid, message.remote_number,
                message.text or "[empty]",
            )
        )
    events.sort(key=lambda e: (e.epoch_ms, e.app, e.store_path, e.rowid))
    return events


# --- JSON -------------------------------------------------------------------


def _message_json(message: ChatMessage, include_raw: bool) -> dict:
    out = {
        "store_path": message.store_path,
        "rowid": message.rowid,
        "thread_key": message.thread_key,
        "direction": message.direction,
        "timestamp_utc": message.timestamp_utc,
        "raw_timestamp": message.raw_timestamp,
        "timestamp_unit": message.timestamp_unit,
        "text": message.text,
        "media_name": message.media_name,
    }
    if message.timestamp_implausible:
        out["timestamp_implausible"] = True
    if include_raw:
        out["raw_cells"] = _jsonable_cells(message.raw_cells)
    return out


def _call_json(call: CallRecord, include_raw: bool) -> dict:
    out = {
        "store_path": call.store_path,
        "rowid": call.rowid,
        "remote_number": call.remote_number,
        "direction": call.direction,
        "start_time_utc": call.start_time_utc,
        "raw_timestamp": call.raw_timestamp,
        "timestamp_unit": call.timestamp_unit,
        "duration_seconds": call.duration_seconds,
    }
    if call.raw_direction_code is not None and call.direction == "unknown":
        out["raw_direction_code"] = call.raw_direction_code
    if call.extra_sources:
        out["also_found_in"] = list(call.extra_sources)
    if call.timestamp_implausible:
        out["timestamp_implausible"] = True
    if include_raw:
        out["raw_cells"] = _jsonable_cells(call.raw_cells)
    return out


def _viber_message_json(message: ViberMessage, include_raw: bool) -> dict:
    out = {
        "store_path": message.store_path,
        "rowid": message.rowid,
        "thread_id": message.thread_id,
        "remote_number": message.remote_number,
        "number_resolved": message.number_resolved,
        "direction": message.direction,
        "timestamp_utc": message.timestamp_utc,
        "raw_timestamp": message.raw_timestamp,
        "timestamp_unit": message.timestamp_unit,
        "text": message.text,
    }
    if message.timestamp_implausible:
        out["timestamp_implausible"] = True
    if include_raw:
        out["raw_cells"] = _jsonable_cells(message.raw_cells)
    return out


def _jsonable_cells(cells: tuple) -> list:
    return [
        {"blob_hex": cell.hex()} if isinstance(cell, bytes) else cell for cell in cells
    ]


def report_to_jsonable(report: CaseReport, include_raw: bool = False) -> dict:
    return {
        "case_id": report.case_id,
        "tool_version": report.tool_version,
        "manifest_digest": report.manifest_digest,
        "stores": [
            {
                "app": store.app,
                "kind": store.kind,
                "path": store.path,
                "confidence": store.confidence,
                "note": store.note,
                "tables": report.store_tables.get(store.path),
            }
            for store in report.stores
        ],
        "whatsapp": {
            "messages": [_message_json(m, include_raw) for m in report.wa_messages],
            "threads": [
                {"thread_key": t.thread_key, "store_path": t.store_path, "rowid": t.rowid}
                for t in report.wa_threads
            ],
            "contacts": [
                {
                    "identifier": c.identifier,
                    "display_name": c.display_name,
                    "status": c.status,
                    "rowid": c.rowid,
                }
                for c in report.wa_contacts
            ],
            "media_refs": [
                {
                    "message_store_path": r.message_store_path,
                    "message_rowid": r.message_rowid,
                    "media_name": r.media_name,
                    "status": r.status,
                    "resolved_paths": list(r.resolved_paths),
                }
                for r in report.media_refs
            ],
            "encrypted_backups": [
                {
                    "path": b.path,
                    "size_bytes": b.size_bytes,
                    "classification": b.classification,
                    "note": b.note,
                }
                for b in report.encrypted_backups
            ],
        },
        "viber": {
            "calls": [_call_json(c, include_raw) for c in report.viber_calls],
            "messages": [_viber_message_json(m, include_raw) for m in report.viber_messages],
            "contacts": [
                {
                    "identifier": c.identifier,
                    "display_name": c.display_name,
                    "rowid": c.rowid,
                }
                for c in report.viber_contacts
            ],
            "viber_numbers": list(report.viber_numbers),
            "summaries": [
                {
                    "remote_number": s.remote_number,
                    "total_calls": s.total_calls,
                    "total_call_seconds": s.total_call_seconds,
                    "messages_sent": s.messages_sent,
                    "messages_received": s.messages_received,
                }
                for s in report.viber_summaries
            ],
        },
        "timeline": [
            {
                "timestamp_utc": e.timestamp_utc,
                "app": e.app,
                "kind": e.kind,
                "store_path": e.store_path,
                "rowid": e.rowid,
                "remote": e.remote,
                "summary": e.summary,
            }
            for e in report.timeline
        ],
        "warnings": [
            {
                "kind": w.kind,
                "store_path": w.store_path,
                "rowid": w.rowid,
                "detail": w.detail,
            }
            for w in report.warnings
        ],
        "assumptions": list(report.assumptions),
    }


def canonical_json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


# --- CSV --------------------------------------------------------------------


def _csv_bytes(header: list[str], rows: list[list]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue().encode("utf-8")


def csv_sections(report: CaseReport) -> dict[str, bytes]:
    """Section name -> CSV bytes, with documented headers."""
    jsonable = report_to_jsonable(report)
    sections: dict[str, bytes] = {}

    sections["stores"] = _csv_bytes(
        ["app", "kind", "path", "confidence", "note"],
        [[s.app, s.kind, s.path, s.confidence, s.note or ""] for s in report.stores],
    )
    sections["whatsapp_messages"] = _csv_bytes(
        ["store_path", "rowid", "thread_key", "direction", "timestamp_utc",
         "raw_timestamp", "timestamp_unit", "implausible", "text", "media_name"],
        [
            [m.store_path, m.rowid, m.thread_key, m.direction, m.timestamp_utc,
             m.raw_timestamp, m.timestamp_unit,
             "yes" if m.timestamp_implausible else "", m.text or "", m.media_name or ""]
            for m in report.wa_messages
        ],
    )
    sections["whatsapp_threads"] = _csv_bytes(
        ["thread_key", "store_path", "rowid"],
        [[t.thread_key, t.store_path, t.rowid] for t in report.wa_threads],
    )
    sections["whatsapp_contacts"] = _csv_bytes(
        ["identifier", "display_name", "status"],
        [[c.identifier, c.display_name or "", c.status or ""] for c in report.wa_contacts],
    )
    sections["whatsapp_media_refs"] = _csv_bytes(
        ["message_store_path", "message_rowid", "media_name", "status", "resolved_paths"],
        [
            [r.message_store_path, r.message_rowid, r.media_name, r.status,
             ";".join(r.resolved_paths)]
            for r in report.media_refs
        ],
    )
    sections["whatsapp_encrypted_backups"] = _csv_bytes(
        ["path", "size_bytes", "classification", "note"],
        [[b.path, b.size_bytes, b.classification, b.note or ""] for b in report.encrypted_backups],
    )
    sections["viber_calls"] = _csv_bytes(
        ["store_path", "rowid", "remote_number", "direction", "start_time_utc",
         "raw_timestamp", "timestamp_unit", "duration_seconds", "also_found_in"],
        [
            [c.store_path, c.rowid, c.remote_number, c.direction, c.start_time_utc,
             c.raw_timestamp, c.timestamp_unit, c.duration_seconds, ";".join(c.extra_sources)]
            for c in report.viber_calls
        ],
    )
    sections["viber_messages"] = _csv_bytes(
        ["store_path", "rowid", "thread_id", "remote_number", "number_resolved",
         "direction", "timestamp_utc", "raw_timestamp", "timestamp_unit", "text"],
        [
            [m.store_path, m.rowid, m.thread_id if m.thread_id is not None else "",
             m.remote_number or "", "yes" if m.number_resolved else "no",
             m.direction, m.timestamp_utc, m.raw_timestamp, m.timestamp_unit, m.text or ""]
            for m in report.viber_messages
        ],
    )
    sections["viber_contacts"] = _csv_bytes(
        ["identifier", "display_name"],
        [[c.identifier, c.display_name or ""] for c in report.viber_contacts],
    )
    sections["viber_numbers"] = _csv_bytes(
        ["number"], [[n] for n in report.viber_numbers]
    )
    sections["viber_summaries"] = _csv_bytes(
        ["remote_number", "total_calls", "total_call_seconds", "messages_sent",
         "messages_received"],
        [
            [s.remote_number, s.total_calls, s.total_call_seconds, s.messages_sent,
             s.messages_received]
            for s in report.viber_summaries
        ],
    )
    sections["timeline"] = _csv_bytes(
        ["timestamp_utc", "app", "kind", "store_path", "rowid", "remote", "summary"],
        [
            [e["timestamp_utc"], e["app"], e["kind"], e["store_path"], e["rowid"],
             e["remote"] or "", e["summary"]]
            for e in jsonable["timeline"]
        ],
    )
    sections["warnings"] = _csv_bytes(
        ["kind", "store_path", "rowid", "detail"],
        [
            [w.kind, w.store_path or "", w.rowid if w.rowid is not None else "", w.detail]
            for w in report.warnings
        ],
    )
    sections["assumptions"] = _csv_bytes(
        ["assumption"], [[a] for a in report.assumptions]
    )
    return sections


# --- text ---------------------------------------------------------------


def _text_summary(report: CaseReport) -> bytes:
    lines = [
        f"case: {report.case_id}",
        f"tool version: {report.tool_version}",
        f"tree digest: {report.manifest_digest or '-'}",
        "",
        f"stores ({len(report.stores)}):",
    ]
    for store in report.stores:
        note = f"  [{store.note}]" if store.note else ""
        lines.append(f"  {store.app:<8} {store.kind:<18} {store.confidence:<14} {store.path}{note}")
    lines += [
        "",
        "whatsapp: "
        f"{len(report.wa_messages)} messages, {len(report.wa_threads)} threads, "
        f"{len(report.wa_contacts)} contacts, {len(report.media_refs)} media refs "
        f"({sum(1 for r in report.media_refs if r.status == 'resolved')} resolved), "
        f"{len(report.encrypted_backups)} encrypted backups",
        "viber: "
        f"{len(report.viber_calls)} calls, {len(report.viber_messages)} messages, "
        f"{len(report.viber_contacts)} contacts, {len(report.viber_numbers)} viber numbers",
        "",
        f"timeline events: {len(report.timeline)}",
    ]
    if report.viber_summaries:
        lines.append("")
        lines.append("per-contact activity:")
        for s in report.viber_summaries:
            lines.append(
                f"  {s.remote_number}: {s.total_calls} calls ({s.total_call_seconds}s), "
                f"{s.messages_sent} sent / {s.messages_received} received messages"
            )
    if report.warnings:
        lines.append("")
        lines.append(f"warnings ({len(report.warnings)}):")
        for w in report.warnings:
            where = f" {w.store_path}" if w.store_path else ""
            row = f" rowid {w.rowid}" if w.rowid is not None else ""
            lines.append(f"  [{w.kind}]{where}{row}: {w.detail}")
    if report.assumptions:
        lines.append("")
        lines.append("assumptions applied:")
        for a in report.assumptions:
            lines.append(f"  - {a}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def emit_report(report: CaseReport, fmt: str, *, include_raw: bool = False) -> bytes:
    """Render the report as one byte sequence; emitting the same report
    twice is byte-identical."""
    if fmt == JSON_FORMAT:
        return canonical_json_bytes(report_to_jsonable(report, include_raw))
    if fmt == CSV_FORMAT:
        parts = []
        for name, payload in csv_sections(report).items():
            parts.append(f"# section: {name}\n".encode("utf-8"))
            parts.append(payload)
        return b"".join(parts)
    if fmt == TEXT_FORMAT:
        return _text_summary(report)
    raise UnsupportedFormatError(f"unsupported report format {fmt!r}; expected one of {FORMATS}")


def write_report(report: CaseReport, fmt: str, out_path, *, include_raw: bool = False) -> list:
    """Write to disk: JSON/text to one file, CSV as one file per section
    inside the out_path directory. Returns the written paths."""
    from pathlib import Path

    out = Path(out_path)
    if fmt == CSV_FORMAT:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name, payload in csv_sections(report).items():
            target = out / f"{name}.csv"
            target.write_bytes(payload)
            written.append(target)
        return written
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(emit_report(report, fmt, include_raw=include_raw))
    return [out]
