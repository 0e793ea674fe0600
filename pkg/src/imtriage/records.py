"""Normalized artifact records shared across parsers and the report."""
from __future__ import annotations

from dataclasses import dataclass, field

INCOMING = "incoming"
OUTGOING = "outgoing"
MISSED = "missed"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class ChatMessage:
    store_path: str
    rowid: int
    thread_key: str
    direction: str  # incoming | outgoing
    timestamp_utc: str
    raw_timestamp: int
    timestamp_unit: str
    timestamp_implausible: bool
    text: str | None
    media_name: str | None
    raw_cells: tuple = field(default=(), repr=False)

    @property
    def epoch_ms(self) -> int:
        return self.raw_timestamp if self.timestamp_unit == "ms" else self.raw_timestamp * 1000


@dataclass(frozen=True)
class ChatThread:
    thread_key: str
    store_path: str
    rowid: int


@dataclass(frozen=True)
class Contact:
    identifier: str
    display_name: str | None
    status: str | None
    store_path: str
    rowid: int


@dataclass(frozen=True)
class CallRecord:
    store_path: str
    rowid: int
    remote_number: str
    direction: str  # incoming | outgoing | missed | unknown
    start_time_utc: str
    raw_timestamp: int
    timestamp_unit: str
    timestamp_implausible: bool
    duration_seconds: int
    raw_direction_code: int | None = None
    extra_sources: tuple[str, ...] = ()  # stores that held a duplicate of this call
    raw_cells: tuple = field(default=(), repr=False)

    @property
    def epoch_ms(self) -> int:
        return self.raw_timestamp if self.timestamp_unit == "ms" else self.raw_timestamp * 1000


@dataclass(frozen=True)
class ViberMessage:
    store_path: str
    rowid: int
    thread_id: int | None
    remote_number: str | None
    number_resolved: bool
    direction: str  # incoming | outgoing
    timestamp_utc: str
    raw_timestamp: int
    timestamp_unit: str
    timestamp_implausible: bool
    text: str | None
    raw_cells: tuple = field(default=(), repr=False)

    @property
    def epoch_ms(self) -> int:
        return self.raw_timestamp if self.timestamp_unit == "ms" else self.raw_timestamp * 1000


@dataclass(frozen=True)
class PerContactSummary:
    remote_number: str
    total_calls: int
    total_call_seconds: int
    messages_sent: int
    messages_received: int


@dataclass(frozen=True)
class ParseWarning:
    kind: str
    detail: str
    store_path: str | None = None
    rowid: int | None = None


# warning kinds that mark a row which could not be emitted; the
# row-conservation invariant counts exactly these
ROW_UNMAPPED = "row-unmapped"

# corruption-class warning kinds; their presence makes the CLI exit 1
EVIDENCE_ERROR_KINDS = frozenset({"damage", "store-unparseable", "missing-table"})
