"""Logical-field to column-name mapping for the app database schemas.

The artifact stores name their tables but app updates move columns
around, so every logical field is resolved through an ordered candidate
list. Defaults follow the classic Android layouts of both apps; all of
them can be overridden from a plain-text file, one logical field per
line:

    whatsapp.messages.thread = key_remote_jid, remote_jid
    viber.calls.direction_codes = 1:incoming, 2:outgoing, 3:missed
    viber.duration_unit = seconds

Table-name candidates are matched after normalization (lowercase,
spaces and underscores stripped) because extraction exports and app
versions disagree on spelling.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .records import INCOMING, MISSED, OUTGOING
from .sqlite_reader import TableSchema

_DIRECTIONS = (INCOMING, OUTGOING, MISSED)

DEFAULT_CANDIDATES: dict[str, tuple[str, ...]] = {
    # WhatsApp message store
    "whatsapp.messages.table": ("messages",),
    "whatsapp.messages.thread": ("key_remote_jid",),
    "whatsapp.messages.from_me": ("key_from_me",),
    "whatsapp.messages.text": ("data",),
    "whatsapp.messages.timestamp": ("timestamp",),
    "whatsapp.messages.media_name": ("media_name",),
    "whatsapp.messages.media_url": ("media_url",),
    "whatsapp.chat_list.table": ("chat_list",),
    "whatsapp.chat_list.thread": ("key_remote_jid",),
    # WhatsApp contact store
    "whatsapp.contacts.table": ("wa_contacts",),
    "whatsapp.contacts.identifier": ("jid", "number"),
    "whatsapp.contacts.display_name": ("display_name", "wa_name", "name"),
    "whatsapp.contacts.status": ("status",),
    # Viber call log
    "viber.calls.table": ("viber_call_log",),
    "viber.calls.number": ("canonized_number", "number"),
    "viber.calls.date": ("date",),
    "viber.calls.duration": ("duration",),
    "viber.calls.type": ("type", "viber_call_type"),
    # Viber data store (phonebook mirror + own call cache)
    "viber.phonebook_contact.table": ("phonebookcontact", "phonebook contact"),
    "viber.phonebook_contact.id": ("_id",),
    "viber.phonebook_contact.display_name": ("display_name", "name"),
    "viber.phonebook_rawcontact.table": ("phonebookrawcontact", "phonebook raw contact"),
    "viber.phonebook_rawcontact.id": ("_id",),
    "viber.phonebook_rawcontact.contact_ref": ("contact_id",),
    "viber.phonebook_data.table": ("phonebookdata", "phonebook data"),
    "viber.phonebook_data.raw_ref": ("raw_id", "raw_contact_id"),
    "viber.phonebook_data.number": ("data1", "number"),
    "viber.numbers.table": ("vibernumbers", "viber numbers"),
    "viber.numbers.number": ("canonized_number", "number", "phone_number"),
    "viber.data_calls.table": ("calls",),
    # Viber message store
    "viber.messages.table": ("messages",),
    "viber.messages.thread": ("thread_id",),
    "viber.messages.address": ("address",),
    "viber.messages.date": ("date",),
    "viber.messages.type": ("type", "send_type"),
    "viber.messages.body": ("body",),
    "viber.threads.table": ("threads",),
    "viber.threads.id": ("_id",),
    "viber.participants.table": ("participants",),
    "viber.participants.thread": ("thread_id",),
    "viber.participants.number": ("number",),
}

# Android convention; overridable because the stores never document codes.
DEFAULT_DIRECTION_CODES: dict[str, dict[int, str]] = {
    "viber.calls.direction_codes": {1: INCOMING, 2: OUTGOING, 3: MISSED},
    "viber.messages.direction_codes": {1: INCOMING, 2: OUTGOING},
}

DURATION_UNITS = ("seconds", "milliseconds")


def _normalize_table_name(name: str) -> str:
    return name.lower().replace(" ", "").replace("_", "")


@dataclass(frozen=True)
class SchemaMap:
    candidates: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(DEFAULT_CANDIDATES)
    )
    direction_codes: dict[str, dict[int, str]] = field(
        default_factory=lambda: {k: dict(v) for k, v in DEFAULT_DIRECTION_CODES.items()}
    )
    duration_unit: str = "seconds"

    def field_candidates(self, key: str) -> tuple[str, ...]:
        return self.candidates[key]

    def find_table(self, tables: list[TableSchema], key: str) -> TableSchema | None:
        """First candidate that matches a store table under name
        normalization; earlier candidates win."""
        by_normalized = {_normalize_table_name(t.name): t for t in tables}
        for candidate in self.candidates[key]:
            hit = by_normalized.get(_normalize_table_name(candidate))
            if hit is not None:
                return hit
        return None

    def codes_for(self, key: str) -> dict[int, str]:
        return self.direction_codes[key]


def load_schema_map(path: str | Path) -> SchemaMap:
    return parse_schema_map(Path(path).read_text(encoding="utf-8"))


def parse_schema_map(text: str) -> SchemaMap:
    """Overlay overrides onto the defaults. Unknown keys are rejected so a
    typo cannot silently leave a field on its default."""
    candidates = dict(DEFAULT_CANDIDATES)
    codes = {k: dict(v) for k, v in DEFAULT_DIRECTION_CODES.items()}
    duration_unit = "seconds"
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"schema map line {line_number}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "viber.duration_unit":
            if value not in DURATION_UNITS:
                raise ValueError(
                    f"schema map line {line_number}: duration unit must be one of "
                    f"{', '.join(DURATION_UNITS)}"
                )
            duration_unit = value
        elif key in codes:
            codes[key] = _parse_codes(value, line_number)
        elif key in candidates:
            names = tuple(part.strip() for part in value.split(",") if part.strip())
            if not names:
                raise ValueError(f"schema map line {line_number}: no candidates given")
            candidates[key] = names
        else:
            raise ValueError(f"schema map line {line_number}: unknown key {key!r}")
    return SchemaMap(candidates, codes, duration_unit)


def _parse_codes(value: str, line_number: int) -> dict[int, str]:
    mapping: dict[int, str] = {}
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        code_text, _, direction = part.partition(":")
        direction = direction.strip()
        try:
            code = int(code_text.strip())
        except ValueError:
            raise ValueError(
                f"schema map line {line_number}: direction code {part!r} is not 'int:direction'"
            ) from None
        if direction not in _DIRECTIONS:
            raise ValueError(
                f"schema map line {line_number}: direction must be one of "
                f"{', '.join(_DIRECTIONS)}"
            )
        mapping[code] = direction
    if not mapping:
        raise ValueError(f"schema map line {line_number}: empty direction code map")
    return mapping
