"""Decode Viber stores: call log, phonebook/data store, message store.

The three stores overlap (calls appear in both viber_call_log and the
data store's Calls table), so call records are de-duplicated on
(number, start time) with a provenance trail. Direction codes are
schema-map-driven; undocumented codes pass through as `unknown` rather
than being assigned invented semantics.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .records import (
    INCOMING,
    OUTGOING,
    ROW_UNMAPPED,
    UNKNOWN,
    CallRecord,
    Contact,
    ParseWarning,
    PerContactSummary,
    ViberMessage,
)
from .schema_map import SchemaMap
from .sqlite_reader import DbImage, TableView, list_tables, load_table_view
from .timestamps import normalize_timestamp
from .whatsapp import ParseOutcome, _as_epoch, _as_text, _open_required_table, _resolve_column


@dataclass
class DataDbOutcome:
    contacts: list[Contact] = field(default_factory=list)
    viber_numbers: list[str] = field(default_factory=list)
    calls: list[CallRecord] = field(default_factory=list)
    warnings: list[ParseWarning] = field(default_factory=list)
    assumptions: list[str] = field(default_factory=list)


def _duration_to_seconds(value, cfg: SchemaMap) -> int:
    seconds = _as_epoch(value) or 0
    if cfg.duration_unit == "milliseconds":
        seconds //= 1000
    return max(0, seconds)


def _call_from_row(
    row, store_path: str, cfg: SchemaMap,
    number_col: int | None, date_col: int | None, duration_col: int | None, type_col: int | None,
) -> tuple[CallRecord | None, ParseWarning | None]:
    number = _as_text(row.cells[number_col]) if number_col is not None else None
    raw_date = _as_epoch(row.cells[date_col]) if date_col is not None else None
    problems = []
    if not number:
        problems.append("call row has no remote number")
    if raw_date is None:
        problems.append("call row has no epoch date")
    if problems:
        return None, ParseWarning(ROW_UNMAPPED, "; ".join(problems), store_path, row.rowid)

    codes = cfg.codes_for("viber.calls.direction_codes")
    raw_code = row.cells[type_col] if type_col is not None else None
    if isinstance(raw_code, int) and raw_code in codes:
        direction = codes[raw_code]
    else:
        direction = UNKNOWN  # undocumented code: preserved, never guessed
    ts = normalize_timestamp(raw_date)
    record = CallRecord(
        store_path=store_path,
        rowid=row.rowid,
        remote_number=number,
        direction=direction,
        start_time_utc=ts.iso,
        raw_timestamp=raw_date,
        timestamp_unit=ts.unit,
        timestamp_implausible=ts.implausible,
        duration_seconds=_duration_to_seconds(
            row.cells[duration_col] if duration_col is not None else 0, cfg
        ),
        raw_direction_code=raw_code if isinstance(raw_code, int) else None,
        raw_cells=row.raw_cells,
    )
    return record, None


def _resolve_call_columns(view: TableView, cfg: SchemaMap, assumptions: list[str], store_path: str):
    return (
        _resolve_column(view, cfg, "viber.calls.number", assumptions, store_path),
        _resolve_column(view, cfg, "viber.calls.date", assumptions, store_path),
        _resolve_column(view, cfg, "viber.calls.duration", assumptions, store_path),
        _resolve_column(view, cfg, "viber.calls.type", assumptions, store_path),
    )


def parse_call_log(db: DbImage, store_path: str, cfg: SchemaMap) -> ParseOutcome:
    """One CallRecord per viber_call_log row, rowid order."""
    outcome = ParseOutcome([])
    view = _open_required_table(db, cfg, "viber.calls.table")
    if view.damage is not None:
        outcome.warnings.append(
            ParseWarning("damage", f"viber_call_log table: {view.damage}", store_path)
        )
    number_col, date_col, duration_col, type_col = _resolve_call_columns(
        view, cfg, outcome.assumptions, store_path
    )
    for row in view.rows:
        record, warning = _call_from_row(
            row, store_path, cfg, number_col, date_col, duration_col, type_col
        )
        if warning is not None:
            outcome.warnings.append(warning)
        else:
            outcome.items.append(record)
    return outcome


def parse_data_db(db: DbImage, store_path: str, cfg: SchemaMap) -> DataDbOutcome:
    """Phonebook join (raw contact -> contact -> data), Viber numbers
    verbatim, plus the store's own Calls rows. Each missing table is an
    independent warning; partial results are kept."""
    outcome = DataDbOutcome()
    tables = list_tables(db)

    def open_optional(table_key: str) -> TableView | None:
        schema = cfg.find_table(tables, table_key)
        if schema is None:
            wanted = cfg.field_candidates(table_key)[0]
            outcome.warnings.append(
                ParseWarning("missing-table", f"table {wanted!r} not found", store_path)
            )
            return None
        view = load_table_view(db, schema)
        if view.damage is not None:
            outcome.warnings.append(
                ParseWarning("damage", f"{schema.name} table: {view.damage}", store_path)
            )
        if _normalized_mismatch(schema.name, cfg, table_key):
            outcome.assumptions.append(
                f"{store_path}: table {schema.name!r} matched candidate via normalized "
                f"name matching for {table_key}"
            )
        return view

    contact_view = open_optional("viber.phonebook_contact.table")
    raw_view = open_optional("viber.phonebook_rawcontact.table")
    data_view = open_optional("viber.phonebook_data.table")

    names_by_contact: dict[int, str | None] = {}
    if contact_view is not None:
        id_col = _resolve_column(contact_view, cfg, "viber.phonebook_contact.id",
                                 outcome.assumptions, store_path)
        name_col = _resolve_column(contact_view, cfg, "viber.phonebook_contact.display_name",
                                   outcome.assumptions, store_path)
        for row in contact_view.rows:
            contact_id = row.cells[id_col] if id_col is not None else row.rowid
            if isinstance(contact_id, int):
                names_by_contact[contact_id] = (
                    _as_text(row.cells[name_col]) if name_col is not None else None
                )

    contact_by_raw: dict[int, int] = {}
    if raw_view is not None:
        id_col = _resolve_column(raw_view, cfg, "viber.phonebook_rawcontact.id",
                                 outcome.assumptions, store_path)
        ref_col = _resolve_column(raw_view, cfg, "viber.phonebook_rawcontact.contact_ref",
                                  outcome.assumptions, store_path)
        for row in raw_view.rows:
            raw_id = row.cells[id_col] if id_col is not None else row.rowid
            ref = row.cells[ref_col] if ref_col is not None else None
            if isinstance(raw_id, int) and isinstance(ref, int):
                contact_by_raw[raw_id] = ref

    if data_view is not None:
        ref_col = _resolve_column(data_view, cfg, "viber.phonebook_data.raw_ref",
                                  outcome.assumptions, store_path)
        number_col = _resolve_column(data_view, cfg, "viber.phonebook_data.number",
                                     outcome.assumptions, store_path)
        for row in data_view.rows:
            number = _as_text(row.cells[number_col]) if number_col is not None else None
            if not number:
                outcome.warnings.append(
                    ParseWarning(ROW_UNMAPPED, "phonebook data row has no number",
                                 store_path, row.rowid)
                )
                continue
            display_name = None
            raw_ref = row.cells[ref_col] if ref_col is not None else None
            if isinstance(raw_ref, int) and raw_ref in contact_by_raw:
                display_name = names_by_contact.get(contact_by_raw[raw_ref])
            else:
                outcome.warnings.append(
                    ParseWarning("unlinked-contact-row",
                                 f"no raw-contact link for data row (raw ref {raw_ref!r})",
                                 store_path, row.rowid)
                )
            outcome.contacts.append(
                Contact(number, display_name, None, store_path, row.rowid)
            )

    numbers_view = open_optional("viber.numbers.table")
    if numbers_view is not None:
        number_col = _resolve_column(numbers_view, cfg, "viber.numbers.number",
                                     outcome.assumptions, store_path)
        for row in numbers_view.rows:
            number = _as_text(row.cells[number_col]) if number_col is not None else None
            if number:
                outcome.viber_numbers.append(number)
            else:
                outcome.warnings.append(
                    ParseWarning(ROW_UNMAPPED, "viber numbers row has no number",
                                 store_path, row.rowid)
                )

    calls_view = open_optional("viber.data_calls.table")
    if calls_view is not None:
        number_col, date_col, duration_col, type_col = _resolve_call_columns(
            calls_view, cfg, outcome.assumptions, store_path
        )
        for row in calls_view.rows:
            record, warning = _call_from_row(
                row, store_path, cfg, number_col, date_col, duration_col, type_col
            )
            if warning is not None:
                outcome.warnings.append(warning)
            else:
                outcome.calls.append(record)
    return outcome


def _normalized_mismatch(actual: str, cfg: SchemaMap, table_key: str) -> bool:
    return actual.lower() not in {c.lower() for c in cfg.field_candidates(table_key)}


def parse_messages_db(db: DbImage, store_path: str, cfg: SchemaMap) -> ParseOutcome:
    """Messages joined to threads and participants to resolve the remote
    number. Orphan threads and unresolvable participants are flagged,
    never dropped."""
    outcome = ParseOutcome([])
    view = _open_required_table(db, cfg, "viber.messages.table")
    if view.damage is not None:
        outcome.warnings.append(
            ParseWarning("damage", f"messages table: {view.damage}", store_path)
        )
    tables = list_tables(db)

    thread_ids: set[int] | None = None
    threads_schema = cfg.find_table(tables, "viber.threads.table")
    if threads_schema is not None:
        threads_view = load_table_view(db, threads_schema)
        id_col = _resolve_column(threads_view, cfg, "viber.threads.id",
                                 outcome.assumptions, store_path)
        thread_ids = {
            row.cells[id_col] if id_col is not None else row.rowid
            for row in threads_view.rows
        }
    else:
        outcome.warnings.append(
            ParseWarning("missing-table", "table 'threads' not found", store_path)
        )

    participants: dict[int, list[str]] = {}
    participants_schema = cfg.find_table(tables, "viber.participants.table")
    if participants_schema is not None:
        part_view = load_table_view(db, participants_schema)
        thread_col = _resolve_column(part_view, cfg, "viber.participants.thread",
                                     outcome.assumptions, store_path)
        number_col = _resolve_column(part_view, cfg, "viber.participants.number",
                                     outcome.assumptions, store_path)
        for row in part_view.rows:
            thread = row.cells[thread_col] if thread_col is not None else None
            number = _as_text(row.cells[number_col]) if number_col is not None else None
            if isinstance(thread, int) and number:
                participants.setdefault(thread, []).append(number)
    else:
        outcome.warnings.append(
            ParseWarning("missing-table", "table 'participants' not found", store_path)
        )

    thread_col = _resolve_column(view, cfg, "viber.messages.thread", outcome.assumptions, store_path)
    address_col = _resolve_column(view, cfg, "viber.messages.address", outcome.assumptions, store_path)
    date_col = _resolve_column(view, cfg, "viber.messages.date", outcome.assumptions, store_path)
    type_col = _resolve_column(view, cfg, "viber.messages.type", outcome.assumptions, store_path)
    body_col = _resolve_column(view, cfg, "viber.messages.body", outcome.assumptions, store_path)
    codes = cfg.codes_for("viber.messages.direction_codes")

    for row in view.rows:
        raw_date = _as_epoch(row.cells[date_col]) if date_col is not None else None
        raw_code = row.cells[type_col] if type_col is not None else None
        direction = codes.get(raw_code) if isinstance(raw_code, int) else None
        problems = []
        if raw_date is None:
            problems.append("message row has no epoch date")
        if direction not in (INCOMING, OUTGOING):
            problems.append(f"direction code {raw_code!r} has no documented meaning")
        if problems:
            outcome.warnings.append(
                ParseWarning(ROW_UNMAPPED, "; ".join(problems), store_path, row.rowid)
            )
            continue

        thread_id = row.cells[thread_col] if thread_col is not None else None
        if not isinstance(thread_id, int):
            thread_id = None
        address = _as_text(row.cells[address_col]) if address_col is not None else None

        remote = None
        resolved = False
        if thread_id is not None and thread_id in participants:
            numbers = sorted(set(participants[thread_id]))
            if len(numbers) == 1:
                remote, resolved = numbers[0], True
        if remote is None and address:
            remote, resolved = address, True
        if thread_id is not None and thread_ids is not None and thread_id not in thread_ids:
            outcome.warnings.append(
                ParseWarning("orphan-thread",
                             f"message references thread {thread_id} which has no threads row",
                             store_path, row.rowid)
            )
        if not resolved:
            outcome.warnings.append(
                ParseWarning("unresolved-number",
                             "no participant or address resolves the remote number",
                             store_path, row.rowid)
            )

        ts = normalize_timestamp(raw_date)
        outcome.items.append(
            ViberMessage(
                store_path=store_path,
                rowid=row.rowid,
                thread_id=thread_id,
                remote_number=remote,
                number_resolved=resolved,
                direction=direction,
                timestamp_utc=ts.iso,
                raw_timestamp=raw_date,
                timestamp_unit=ts.unit,
                timestamp_implausible=ts.implausible,
                text=_as_text(row.cells[body_col]) if body_col is not None else None,
                raw_cells=row.raw_cells,
            )
        )
    return outcome


def dedupe_calls(primary: list[CallRecord], secondary: list[CallRecord]) -> list[CallRecord]:
    """Merge call lists. A secondary call matching a primary one on
    (number, start time) is folded into it as provenance; the operation
    is idempotent. Output sorted by (time, number, store, rowid)."""
    merged: dict[tuple[str, str], CallRecord] = {}
    for record in primary:
        merged.setdefault((record.remote_number, record.start_time_utc), record)
    for record in secondary:
        key = (record.remote_number, record.start_time_utc)
        if key in merged:
            kept = merged[key]
            if record.store_path != kept.store_path and record.store_path not in kept.extra_sources:
                merged[key] = dataclasses.replace(
                    kept, extra_sources=kept.extra_sources + (record.store_path,)
                )
        else:
            merged[key] = record
    return sorted(
        merged.values(),
        key=lambda c: (c.epoch_ms, c.remote_number, c.store_path, c.rowid),
    )


def summarize_contact_activity(
    calls: list[CallRecord], messages: list[ViberMessage]
) -> list[PerContactSummary]:
    """Per-number aggregates over de-duplicated calls and resolved
    messages, sorted by number. Totals are plain sums, so conservation
    against the inputs is checkable by arithmetic."""
    totals: dict[str, list[int]] = {}
    for call in calls:
        bucket = totals.setdefault(call.remote_number, [0, 0, 0, 0])
        bucket[0] += 1
        bucket[1] += call.duration_seconds
    for message in messages:
        if not message.remote_number:
            continue  # unresolved: kept in the message section, flagged there
        bucket = totals.setdefault(message.remote_number, [0, 0, 0, 0])
        if message.direction == OUTGOING:
            bucket[2] += 1
        else:
            bucket[3] += 1
    return [
        PerContactSummary(number, *totals[number]) for number in sorted(totals)
    ]
