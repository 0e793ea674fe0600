"""Decode WhatsApp stores into normalized messages, threads and contacts.

msgstore.db holds the `messages` and `chat_list` tables; wa.db holds
`wa_contacts`. Column names are resolved through the schema map, rows
that cannot be mapped become warnings (never silent drops), and every
emitted timestamp is UTC with the raw epoch retained.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MissingTableError
from .records import INCOMING, OUTGOING, ROW_UNMAPPED, ChatMessage, ChatThread, Contact, ParseWarning
from .schema_map import SchemaMap
from .sqlite_reader import DbImage, TableView, list_tables, load_table_view
from .timestamps import normalize_timestamp


@dataclass
class ParseOutcome:
    items: list
    warnings: list[ParseWarning] = field(default_factory=list)
    assumptions: list[str] = field(default_factory=list)


def _resolve_column(
    view: TableView, cfg: SchemaMap, key: str, assumptions: list[str], store_path: str
) -> int | None:
    candidates = cfg.field_candidates(key)
    for position, candidate in enumerate(candidates):
        index = view.column_index(candidate)
        if index is not None:
            if position > 0:
                assumptions.append(
                    f"{store_path}: column {candidate!r} matched fallback candidate "
                    f"for {key} (tried {', '.join(candidates[:position])} first)"
                )
            return index
    return None


def _open_required_table(db: DbImage, cfg: SchemaMap, table_key: str) -> TableView:
    tables = list_tables(db)
    schema = cfg.find_table(tables, table_key)
    if schema is None:
        wanted = cfg.field_candidates(table_key)[0]
        raise MissingTableError(wanted, [t.name for t in tables])
    return load_table_view(db, schema)


def _as_text(value) -> str | None:
    if value is None:
        return None
    if isinstance(value, str):
        return value
    if isinstance(value, bytes):
        return value.decode("utf-8", errors="replace")
    return str(value)


def _as_epoch(value) -> int | None:
    if isinstance(value, int):
        return value
    if isinstance(value, str) and value.isdigit():
        return int(value)
    return None


def parse_messages(db: DbImage, store_path: str, cfg: SchemaMap) -> ParseOutcome:
    """One ChatMessage per mappable `messages` row, in rowid order.

    Raises MissingTableError when the store has no messages table; rows
    that cannot be mapped are row-unmapped warnings so that
    len(messages) + len(row-unmapped) equals the table's row count.
    """
    outcome = ParseOutcome([])
    view = _open_required_table(db, cfg, "whatsapp.messages.table")
    if view.damage is not None:
        outcome.warnings.append(
            ParseWarning("damage", f"messages table: {view.damage}", store_path)
        )

    thread_col = _resolve_column(view, cfg, "whatsapp.messages.thread", outcome.assumptions, store_path)
    from_me_col = _resolve_column(view, cfg, "whatsapp.messages.from_me", outcome.assumptions, store_path)
    ts_col = _resolve_column(view, cfg, "whatsapp.messages.timestamp", outcome.assumptions, store_path)
    text_col = _resolve_column(view, cfg, "whatsapp.messages.text", outcome.assumptions, store_path)
    media_col = _resolve_column(view, cfg, "whatsapp.messages.media_name", outcome.assumptions, store_path)
    media_url_col = _resolve_column(view, cfg, "whatsapp.messages.media_url", outcome.assumptions, store_path)

    missing = [
        (key, col)
        for key, col in (
            ("whatsapp.messages.thread", thread_col),
            ("whatsapp.messages.from_me", from_me_col),
            ("whatsapp.messages.timestamp", ts_col),
        )
        if col is None
    ]
    media_url_used = False

    for row in view.rows:
        if missing:
            fields = ", ".join(key for key, _ in missing)
            outcome.warnings.append(
                ParseWarning(ROW_UNMAPPED, f"no candidate column for {fields}", store_path, row.rowid)
            )
            continue
        thread_key = _as_text(row.cells[thread_col])
        from_me = row.cells[from_me_col]
        raw_ts = _as_epoch(row.cells[ts_col])
        problems = []
        if not thread_key:
            problems.append("thread identifier is null")
        if from_me not in (0, 1):
            problems.append(f"from-me flag {from_me!r} is not 0 or 1")
        if raw_ts is None:
            problems.append(f"timestamp {row.cells[ts_col]!r} is not an epoch integer")
        if problems:
            outcome.warnings.append(
                ParseWarning(ROW_UNMAPPED, "; ".join(problems), store_path, row.rowid)
            )
            continue

        media_name = _as_text(row.cells[media_col]) if media_col is not None else None
        if media_name is None and media_url_col is not None:
            url = _as_text(row.cells[media_url_col])
            if url:
                media_name = url.rstrip("/").rsplit("/", 1)[-1]
                media_url_used = True

        ts = normalize_timestamp(raw_ts)
        if row.damaged:
            outcome.warnings.append(
                ParseWarning("damaged-row-text",
                             "text decoded with replacement characters", store_path, row.rowid)
            )
        outcome.items.append(
            ChatMessage(
                store_path=store_path,
                rowid=row.rowid,
                thread_key=thread_key,
                direction=OUTGOING if from_me == 1 else INCOMING,
                timestamp_utc=ts.iso,
                raw_timestamp=raw_ts,
                timestamp_unit=ts.unit,
                timestamp_implausible=ts.implausible,
                text=_as_text(row.cells[text_col]) if text_col is not None else None,
                media_name=media_name,
                raw_cells=row.raw_cells,
            )
        )
    if media_url_used:
        outcome.assumptions.append(
            f"{store_path}: media names derived from the tail segment of media_url"
        )
    return outcome


def parse_chat_list(db: DbImage, store_path: str, cfg: SchemaMap) -> ParseOutcome:
    """One ChatThread per chat_list row; threads without messages are
    still evidence and still reported."""
    outcome = ParseOutcome([])
    view = _open_required_table(db, cfg, "whatsapp.chat_list.table")
    if view.damage is not None:
        outcome.warnings.append(
            ParseWarning("damage", f"chat_list table: {view.damage}", store_path)
        )
    thread_col = _resolve_column(view, cfg, "whatsapp.chat_list.thread", outcome.assumptions, store_path)
    for row in view.rows:
        thread_key = _as_text(row.cells[thread_col]) if thread_col is not None else None
        if not thread_key:
            outcome.warnings.append(
                ParseWarning(ROW_UNMAPPED, "chat_list row has no thread identifier",
                             store_path, row.rowid)
            )
            continue
        outcome.items.append(ChatThread(thread_key, store_path, row.rowid))
    return outcome


def parse_contacts(db: DbImage, store_path: str, cfg: SchemaMap) -> ParseOutcome:
    outcome = ParseOutcome([])
    view = _open_required_table(db, cfg, "whatsapp.contacts.table")
    if view.damage is not None:
        outcome.warnings.append(
            ParseWarning("damage", f"wa_contacts table: {view.damage}", store_path)
        )
    id_col = _resolve_column(view, cfg, "whatsapp.contacts.identifier", outcome.assumptions, store_path)
    name_col = _resolve_column(view, cfg, "whatsapp.contacts.display_name", outcome.assumptions, store_path)
    status_col = _resolve_column(view, cfg, "whatsapp.contacts.status", outcome.assumptions, store_path)
    for row in view.rows:
        identifier = _as_text(row.cells[id_col]) if id_col is not None else None
        if not identifier:
            outcome.warnings.append(
                ParseWarning(ROW_UNMAPPED, "contact row has no identifier", store_path, row.rowid)
            )
            continue
        outcome.items.append(
            Contact(
                identifier=identifier,
                display_name=_as_text(row.cells[name_col]) if name_col is not None else None,
                status=_as_text(row.cells[status_col]) if status_col is not None else None,
                store_path=store_path,
                rowid=row.rowid,
            )
        )
    return outcome
