"""Full-case orchestration: hash, locate, parse, correlate, report.

Hashing runs before any parsing (acquisition-first ordering). Stores are
processed in their scan order; damage degrades per store into structured
warnings instead of aborting the case, and every heuristic that actually
fired is listed in the report's assumptions.
"""
from __future__ import annotations

import logging

from . import __version__, locator
from .errors import MissingTableError, SqliteFormatError, TruncatedFileError
from .extraction import ExtractionTree
from .integrity import build_manifest
from .media import flag_encrypted_backups, index_media, resolve_media_refs
from .records import EVIDENCE_ERROR_KINDS, ParseWarning
from .report import (
    CaseReport,
    assumption_duration_unit,
    assumption_timestamp_unit,
    build_timeline,
)
from .schema_map import SchemaMap
from .sqlite_reader import DbImage, list_tables, open_database
from .viber import (
    dedupe_calls,
    parse_call_log,
    parse_data_db,
    parse_messages_db,
    summarize_contact_activity,
)
from .whatsapp import parse_chat_list, parse_contacts, parse_messages

log = logging.getLogger(__name__)

_SIDECAR_SUFFIXES = ("-wal", "-journal", "-shm")


def _open_store(tree, store, warnings) -> DbImage | None:
    """Open a database store, degrading to a tolerant page-count when the
    file is truncated. Returns None when the content cannot be read as a
    database at all."""
    try:
        return locator.load_database(tree, store)
    except TruncatedFileError as exc:
        warnings.append(
            ParseWarning("damage", f"store is truncated: {exc}; partial rows follow", store.path)
        )
        entry = tree.find(store.path)
        try:
            return open_database(tree.read_entry(entry), source_path=store.path, tolerant=True)
        except SqliteFormatError as tolerant_exc:
            warnings.append(
                ParseWarning("store-unparseable", str(tolerant_exc), store.path)
            )
            return None
    except SqliteFormatError as exc:
        warnings.append(ParseWarning("store-unparseable", str(exc), store.path))
        return None


def run_case(
    tree: ExtractionTree,
    cfg: SchemaMap | None = None,
    *,
    case_id: str = "case",
    include_manifest: bool = True,
) -> CaseReport:
    cfg = cfg or SchemaMap()
    report = CaseReport(case_id=case_id, tool_version=__version__, manifest_digest=None)

    if include_manifest:
        report.manifest_digest = build_manifest(tree, tool_version=__version__).tree_digest

    report.stores = locator.scan_stores(tree)
    warnings: list[ParseWarning] = []
    assumptions: set[str] = set()

    for path, kind in tree.symlinks:
        warnings.append(
            ParseWarning("symlink-skipped", f"symlink to {kind!r} recorded, not followed", path)
        )
    for path, kind in tree.specials:
        warnings.append(
            ParseWarning("special-skipped", f"{kind} entry recorded, not ingested", path)
        )

    data_db_calls = []
    call_log_calls = []

    for store in report.stores:
        if store.kind not in locator.DB_KINDS:
            continue
        for suffix in _SIDECAR_SUFFIXES:
            if tree.find(store.path + suffix) is not None:
                warnings.append(
                    ParseWarning(
                        "sidecar",
                        f"{suffix} sidecar present; rows reflect the main file only",
                        store.path,
                    )
                )
        if store.confidence == locator.PATH_ONLY:
            warnings.append(
                ParseWarning(
                    "store-unparseable",
                    "path matched but content failed the SQLite magic check; not parsed",
                    store.path,
                )
            )
            continue

        db = _open_store(tree, store, warnings)
        if db is None:
            continue
        try:
            report.store_tables[store.path] = [t.name for t in list_tables(db)]
        except SqliteFormatError as exc:
            warnings.append(ParseWarning("store-unparseable", str(exc), store.path))
            continue

        try:
            if store.kind == locator.MESSAGE_DB:
                outcome = parse_messages(db, store.path, cfg)
                report.wa_messages.extend(outcome.items)
                warnings.extend(outcome.warnings)
                assumptions.update(outcome.assumptions)
                outcome = parse_chat_list(db, store.path, cfg)
                report.wa_threads.extend(outcome.items)
                warnings.extend(outcome.warnings)
                assumptions.update(outcome.assumptions)
            elif store.kind == locator.CONTACT_DB:
                outcome = parse_contacts(db, store.path, cfg)
                report.wa_contacts.extend(outcome.items)
                warnings.extend(outcome.warnings)
                assumptions.update(outcome.assumptions)
            elif store.kind == locator.CALL_LOG_DB:
                outcome = parse_call_log(db, store.path, cfg)
                call_log_calls.extend(outcome.items)
                warnings.extend(outcome.warnings)
                assumptions.update(outcome.assumptions)
            elif store.kind == locator.VIBER_DATA_DB:
                data = parse_data_db(db, store.path, cfg)
                report.viber_contacts.extend(data.contacts)
                report.viber_numbers.extend(data.viber_numbers)
                data_db_calls.extend(data.calls)
                warnings.extend(data.warnings)
                assumptions.update(data.assumptions)
            elif store.kind == locator.VIBER_MESSAGES_DB:
                outcome = parse_messages_db(db, store.path, cfg)
                report.viber_messages.extend(outcome.items)
                warnings.extend(outcome.warnings)
                assumptions.update(outcome.assumptions)
            # unclassified-db: inventoried (tables recorded), not interpreted
        except MissingTableError as exc:
            warnings.append(ParseWarning("missing-table", str(exc), store.path))

    report.viber_calls = dedupe_calls(call_log_calls, data_db_calls)
    report.viber_summaries = summarize_contact_activity(report.viber_calls, report.viber_messages)

    media_index = index_media(tree)
    report.media_refs = resolve_media_refs(report.wa_messages, media_index)
    report.encrypted_backups = flag_encrypted_backups(tree)

    report.timeline = build_timeline(report.wa_messages, report.viber_calls, report.viber_messages)

    for record in report.wa_messages + report.viber_calls + report.viber_messages:
        store_path = record.store_path
        assumptions.add(assumption_timestamp_unit(store_path, record.timestamp_unit))
    if report.viber_calls or data_db_calls:
        assumptions.add(assumption_duration_unit(cfg.duration_unit))

    report.warnings = sorted(
        warnings,
        key=lambda w: (w.kind, w.store_path or "", w.rowid if w.rowid is not None else -1, w.detail),
    )
    report.assumptions = sorted(assumptions)
    return report


def has_evidence_errors(report: CaseReport) -> bool:
    return any(w.kind in EVIDENCE_ERROR_KINDS for w in report.warnings)
