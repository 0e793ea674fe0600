"""Read-only SQLite version-3 file-format reader.

Decodes just enough of the on-disk layout to enumerate every live row of
a named table: the 100-byte header, the schema table on page 1, table
b-trees, varints, record serial types and overflow chains. No SQL, no
writing, no indices, no WAL merge, no freelist carving.

Damage never silently truncates: a walk yields every row before the bad
page, then raises CorruptPageError carrying a structured DamageReport.
"""
from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from typing import Iterator

from .errors import (
    BadPageSizeError,
    CorruptPageError,
    CorruptSchemaPageError,
    CyclicOverflowError,
    MagicMismatchError,
    RecordOverrunError,
    SerialTypeReservedError,
    SqliteFormatError,
    TruncatedFileError,
    TruncatedVarintError,
    UnsupportedFeatureError,
)

MAGIC = b"SQLite format 3\x00"
HEADER_SIZE = 100

# b-tree page type bytes
_INTERIOR_INDEX = 0x02
_INTERIOR_TABLE = 0x05
_LEAF_INDEX = 0x0A
_LEAF_TABLE = 0x0D

_ENCODINGS = {1: "utf-8", 2: "utf-16-le", 3: "utf-16-be"}
_INT_SIZES = {1: 1, 2: 2, 3: 3, 4: 4, 5: 6, 6: 8}

_MAX_BTREE_DEPTH = 64


@dataclass(frozen=True)
class DbHeader:
    page_size: int
    page_count: int
    text_encoding: str  # "utf-8" | "utf-16-le" | "utf-16-be"
    schema_format: int
    reserved_per_page: int

    @property
    def usable_size(self) -> int:
        return self.page_size - self.reserved_per_page


@dataclass(frozen=True)
class TableSchema:
    name: str
    root_page: int
    ddl_text: str


@dataclass(frozen=True)
class RecordRow:
    rowid: int
    cells: tuple
    damaged: bool = False  # text decoded with replacement characters


@dataclass(frozen=True)
class DamageReport:
    reason: str
    page_number: int | None = None
    detail: str = ""

    def __str__(self) -> str:
        where = f" page {self.page_number}" if self.page_number is not None else ""
        tail = f": {self.detail}" if self.detail else ""
        return f"{self.reason}{where}{tail}"


@dataclass(frozen=True)
class DbImage:
    data: bytes
    header: DbHeader
    source_path: str | None = None


def parse_header(data: bytes, *, file_length: int | None = None) -> DbHeader:
    """Decode and validate the 100-byte database header.

    `file_length` enables the truncation check (header page count times
    page size must fit in the file); pass it when `data` is the whole
    image. With only the first 100 bytes the in-header page count is
    reported as-is.
    """
    if len(data) < HEADER_SIZE:
        raise TruncatedFileError(f"need {HEADER_SIZE} header bytes, have {len(data)}")
    if data[:16] != MAGIC:
        raise MagicMismatchError("not an SQLite 3 database (bad magic)")
    raw_size = struct.unpack_from(">H", data, 16)[0]
    page_size = 65536 if raw_size == 1 else raw_size
    if page_size < 512 or page_size > 65536 or page_size & (page_size - 1):
        raise BadPageSizeError(f"invalid page size {raw_size}")
    reserved = data[20]
    if page_size - reserved < 480:
        raise BadPageSizeError(f"reserved space {reserved} leaves unusable pages")
    change_counter = struct.unpack_from(">I", data, 24)[0]
    header_pages = struct.unpack_from(">I", data, 28)[0]
    schema_format = struct.unpack_from(">I", data, 44)[0]
    enc_code = struct.unpack_from(">I", data, 56)[0]
    version_valid_for = struct.unpack_from(">I", data, 92)[0]

    if enc_code == 0:
        encoding = "utf-8"  # never written to; seen on schema-less images
    elif enc_code in _ENCODINGS:
        encoding = _ENCODINGS[enc_code]
    else:
        raise UnsupportedFeatureError(f"unknown text encoding code {enc_code}")

    page_count = header_pages
    if file_length is not None:
        # The in-header count is only authoritative while it matches the
        # change counter; otherwise derive from the physical length.
        if header_pages == 0 or change_counter != version_valid_for:
            page_count = file_length // page_size
        if page_size * page_count > file_length:
            raise TruncatedFileError(
                f"header declares {page_count} pages of {page_size} bytes "
                f"but the file holds only {file_length} bytes"
            )
    if page_count < 1:
        page_count = 1
    return DbHeader(page_size, page_count, encoding, schema_format, reserved)


def open_database(
    data: bytes, *, source_path: str | None = None, tolerant: bool = False
) -> DbImage:
    """Wrap a full database image. Strict mode enforces the header's page
    count against the physical length; tolerant mode (used for damaged
    evidence) keeps whatever whole pages are physically present."""
    if tolerant:
        header = parse_header(data)
        available = max(1, len(data) // header.page_size)
        header = DbHeader(
            header.page_size,
            available,
            header.text_encoding,
            header.schema_format,
            header.reserved_per_page,
        )
    else:
        header = parse_header(data, file_length=len(data))
    return DbImage(bytes(data), header, source_path)


def read_varint(data, offset: int) -> tuple[int, int]:
    """Decode a big-endian base-128 varint: (unsigned 64-bit value, length 1-9).

    The ninth byte, when reached, contributes all 8 bits.
    """
    if offset >= len(data):
        raise TruncatedVarintError(f"varint starts past end of buffer (offset {offset})")
    value = 0
    for i in range(8):
        if offset + i >= len(data):
            raise TruncatedVarintError("continuation bit set on last available byte")
        byte = data[offset + i]
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, i + 1
    if offset + 8 >= len(data):
        raise TruncatedVarintError("continuation bit set on last available byte")
    value = ((value << 8) | data[offset + 8]) & 0xFFFFFFFFFFFFFFFF
    return value, 9


def _signed64(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def decode_record(payload, encoding: str) -> tuple[list, bool]:
    """Decode one record body into cell values.

    Returns (cells, damaged): damaged is set when a text cell only decoded
    with replacement characters. Cells map serial types to Python values:
    NULL->None, integers->int, 7->float, 8/9->0/1, blobs->bytes, text->str.
    """
    header_size, n = read_varint(payload, 0)
    if header_size < n or header_size > len(payload):
        raise RecordOverrunError(
            f"record header size {header_size} exceeds payload of {len(payload)} bytes"
        )
    serial_types = []
    pos = n
    while pos < header_size:
        serial_type, length = read_varint(payload, pos)
        pos += length
        serial_types.append(serial_type)
    if pos != header_size:
        raise RecordOverrunError("record header varints overrun the declared header size")

    cells: list = []
    damaged = False
    body = header_size
    for serial_type in serial_types:
        if serial_type in (10, 11):
            raise SerialTypeReservedError(f"reserved serial type {serial_type}")
        if serial_type == 0:
            cells.append(None)
            continue
        if serial_type == 8:
            cells.append(0)
            continue
        if serial_type == 9:
            cells.append(1)
            continue
        if serial_type == 7:
            size = 8
        elif serial_type in _INT_SIZES:
            size = _INT_SIZES[serial_type]
        elif serial_type >= 12 and serial_type % 2 == 0:
            size = (serial_type - 12) // 2
        else:  # >= 13, odd: text
            size = (serial_type - 13) // 2
        if body + size > len(payload):
            raise RecordOverrunError(
                f"cell of serial type {serial_type} needs {size} bytes, "
                f"{len(payload) - body} left"
            )
        chunk = bytes(payload[body : body + size])
        body += size
        if serial_type == 7:
            cells.append(struct.unpack(">d", chunk)[0])
        elif serial_type in _INT_SIZES:
            cells.append(int.from_bytes(chunk, "big", signed=True))
        elif serial_type % 2 == 0:
            cells.append(chunk)
        else:
            try:
                cells.append(chunk.decode(encoding))
            except UnicodeDecodeError:
                cells.append(chunk.decode(encoding, errors="replace"))
                damaged = True
    return cells, damaged


def _page(db: DbImage, page_number: int) -> memoryview:
    header = db.header
    if page_number < 1 or page_number > header.page_count:
        raise CorruptPageError(
            DamageReport("page-out-of-range", page_number,
                         f"database holds {header.page_count} pages")
        )
    start = (page_number - 1) * header.page_size
    end = start + header.page_size
    if end > len(db.data):
        raise CorruptPageError(
            DamageReport("page-beyond-file", page_number,
                         f"file ends at byte {len(db.data)}")
        )
    return memoryview(db.data)[start:end]


def _be16(view, offset: int) -> int:
    return struct.unpack_from(">H", view, offset)[0]


def _be32(view, offset: int) -> int:
    return struct.unpack_from(">I", view, offset)[0]


def walk_table(db: DbImage, root_page: int) -> Iterator[RecordRow]:
    """Yield every leaf record of the table b-tree at root_page, in rowid
    order. Overflow chains are reassembled before record decoding."""
    yield from _walk(db, root_page, is_root=True, seen=set(), depth=0)


def _walk(db: DbImage, page_number: int, is_root: bool, seen: set, depth: int) -> Iterator[RecordRow]:
    if depth > _MAX_BTREE_DEPTH:
        raise CorruptPageError(DamageReport("btree-too-deep", page_number))
    if page_number in seen:
        raise CorruptPageError(DamageReport("btree-cycle", page_number))
    seen.add(page_number)

    page = _page(db, page_number)
    base = HEADER_SIZE if page_number == 1 else 0
    page_type = page[base]

    if page_type == _INTERIOR_TABLE:
        cell_count = _be16(page, base + 3)
        pointers = base + 12
        for i in range(cell_count):
            cell_offset = _be16(page, pointers + 2 * i)
            if cell_offset + 4 > len(page):
                raise CorruptPageError(
                    DamageReport("cell-pointer-out-of-page", page_number)
                )
            child = _be32(page, cell_offset)
            yield from _walk(db, child, False, seen, depth + 1)
        right_most = _be32(page, base + 8)
        yield from _walk(db, right_most, False, seen, depth + 1)
    elif page_type == _LEAF_TABLE:
        yield from _leaf_rows(db, page, page_number, base)
    elif page_type in (_INTERIOR_INDEX, _LEAF_INDEX) and is_root:
        raise UnsupportedFeatureError(
            f"page {page_number} roots an index b-tree "
            "(index or WITHOUT ROWID table): unsupported"
        )
    else:
        raise CorruptPageError(
            DamageReport("bad-page-type", page_number, f"type byte 0x{page_type:02x}")
        )


def _leaf_rows(db: DbImage, page: memoryview, page_number: int, base: int) -> Iterator[RecordRow]:
    cell_count = _be16(page, base + 3)
    pointers = base + 8
    for i in range(cell_count):
        cell_offset = _be16(page, pointers + 2 * i)
        if cell_offset >= len(page):
            raise CorruptPageError(DamageReport("cell-pointer-out-of-page", page_number))
        try:
            payload_length, n1 = read_varint(page, cell_offset)
            rowid_raw, n2 = read_varint(page, cell_offset + n1)
            payload = _cell_payload(db, page, page_number, cell_offset + n1 + n2, payload_length)
            cells, damaged = decode_record(payload, db.header.text_encoding)
        except (TruncatedVarintError, RecordOverrunError, SerialTypeReservedError) as exc:
            raise CorruptPageError(
                DamageReport("record-decode", page_number, str(exc))
            ) from exc
        yield RecordRow(_signed64(rowid_raw), tuple(cells), damaged)


def _cell_payload(
    db: DbImage, page: memoryview, page_number: int, offset: int, payload_length: int
) -> bytes:
    """Inline payload plus reassembled overflow chain, if any."""
    usable = db.header.usable_size
    max_local = usable - 35
    if payload_length <= max_local:
        if offset + payload_length > len(page):
            raise CorruptPageError(
                DamageReport("payload-out-of-page", page_number,
                             f"{payload_length} bytes at offset {offset}")
            )
        return bytes(page[offset : offset + payload_length])

    min_local = (usable - 12) * 32 // 255 - 23
    k = min_local + (payload_length - min_local) % (usable - 4)
    local = k if k <= max_local else min_local
    if offset + local + 4 > len(page):
        raise CorruptPageError(DamageReport("payload-out-of-page", page_number))

    parts = [bytes(page[offset : offset + local])]
    remaining = payload_length - local
    next_page = _be32(page, offset + local)
    visited: set[int] = set()
    while remaining > 0:
        if next_page == 0:
            raise CorruptPageError(
                DamageReport("overflow-chain-short", page_number,
                             f"{remaining} payload bytes missing")
            )
        if next_page in visited:
            raise CyclicOverflowError(f"overflow chain revisits page {next_page}")
        visited.add(next_page)
        overflow = _page(db, next_page)
        take = min(usable - 4, remaining)
        parts.append(bytes(overflow[4 : 4 + take]))
        remaining -= take
        next_page = _be32(overflow, 0)
    return b"".join(parts)


def list_tables(db: DbImage) -> list[TableSchema]:
    """Every `table`-type row of the schema table on page 1, ordered by name."""
    tables = []
    try:
        for row in walk_table(db, 1):
            if len(row.cells) < 5:
                continue
            row_type, name, _tbl_name, root_page, sql = row.cells[:5]
            if row_type != "table" or not isinstance(name, str):
                continue
            if not isinstance(root_page, int) or root_page < 1:
                continue  # virtual tables have no storage
            if root_page > db.header.page_count:
                raise CorruptSchemaPageError(
                    f"table {name!r} claims root page {root_page} of "
                    f"{db.header.page_count}"
                )
            tables.append(TableSchema(name, root_page, sql if isinstance(sql, str) else ""))
    except CorruptPageError as exc:
        raise CorruptSchemaPageError(f"schema table unreadable: {exc.damage}") from exc
    tables.sort(key=lambda t: t.name)
    return tables


def dump_table(db: DbImage, root_page: int) -> tuple[list[RecordRow], DamageReport | None]:
    """Collect rows, degrading gracefully: on damage, return the rows that
    preceded it together with the damage report."""
    rows: list[RecordRow] = []
    generator = walk_table(db, root_page)
    while True:
        try:
            rows.append(next(generator))
        except StopIteration:
            return rows, None
        except CorruptPageError as exc:
            return rows, exc.damage
        except CyclicOverflowError as exc:
            return rows, DamageReport("cyclic-overflow", None, str(exc))
        except UnsupportedFeatureError as exc:
            return rows, DamageReport("unsupported-feature", None, str(exc))


# --- DDL helpers ----------------------------------------------------------
#
# The reader does not execute SQL, but app parsers need the column order,
# which only exists in the CREATE TABLE text.

_CONSTRAINT_KEYWORDS = ("PRIMARY", "UNIQUE", "CHECK", "FOREIGN", "CONSTRAINT")


def table_columns(ddl_text: str) -> list[str]:
    """Column names, in order, from a CREATE TABLE statement."""
    start = ddl_text.find("(")
    if start == -1:
        return []
    body, _ = _matched_paren_body(ddl_text, start)
    names = []
    for item in _split_top_level(body):
        item = item.strip()
        if not item:
            continue
        first = _first_token(item)
        if first.upper() in _CONSTRAINT_KEYWORDS:
            continue
        names.append(_unquote_identifier(first))
    return names


def integer_primary_key_index(ddl_text: str) -> int | None:
    """Index of the column declared INTEGER PRIMARY KEY (the rowid alias),
    or None. Such columns store NULL in the record; readers substitute the
    rowid. Table-level PRIMARY KEY clauses are not considered."""
    start = ddl_text.find("(")
    if start == -1:
        return None
    body, _ = _matched_paren_body(ddl_text, start)
    for index, item in enumerate(_split_top_level(body)):
        item = item.strip()
        if not item or _first_token(item).upper() in _CONSTRAINT_KEYWORDS:
            continue
        if re.search(r"\bINTEGER\s+PRIMARY\s+KEY\b", item, re.IGNORECASE):
            return index
    return None


def _matched_paren_body(text: str, open_index: int) -> tuple[str, int]:
    depth = 0
    for i in range(open_index, len(text)):
        ch = text[i]
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return text[open_index + 1 : i], i
    return text[open_index + 1 :], len(text)


def _split_top_level(body: str) -> list[str]:
    items = []
    depth = 0
    quote: str | None = None
    current = []
    for ch in body:
        if quote:
            current.append(ch)
            if ch == quote:
                quote = None
            continue
        if ch in "'\"`":
            quote = ch
        elif ch == "[":
            quote = "]"
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif ch == "," and depth == 0:
            items.append("".join(current))
            current = []
            continue
        current.append(ch)
    if current:
        items.append("".join(current))
    return items


def _first_token(item: str) -> str:
    item = item.lstrip()
    if not item:
        return ""
    ch = item[0]
    closer = {"\"": "\"", "'": "'", "`": "`", "[": "]"}.get(ch)
    if closer:
        end = item.find(closer, 1)
        return item[: end + 1] if end != -1 else item
    match = re.match(r"[^\s(]+", item)
    return match.group(0) if match else ""


def _unquote_identifier(token: str) -> str:
    if len(token) >= 2 and token[0] in "\"'`[" :
        return token[1:-1]
    return token


# --- named-table convenience ----------------------------------------------


@dataclass(frozen=True)
class ViewRow:
    rowid: int
    cells: tuple  # rowid substituted into an INTEGER PRIMARY KEY column
    raw_cells: tuple
    damaged: bool


@dataclass(frozen=True)
class TableView:
    schema: TableSchema
    columns: tuple[str, ...]
    rows: tuple[ViewRow, ...]
    damage: DamageReport | None

    def column_index(self, name: str) -> int | None:
        lowered = name.lower()
        for i, column in enumerate(self.columns):
            if column.lower() == lowered:
                return i
        return None


def load_table_view(db: DbImage, schema: TableSchema) -> TableView:
    columns = tuple(table_columns(schema.ddl_text))
    ipk = integer_primary_key_index(schema.ddl_text)
    raw_rows, damage = dump_table(db, schema.root_page)
    rows = []
    for record in raw_rows:
        cells = list(record.cells)
        if len(cells) < len(columns):
            cells.extend([None] * (len(columns) - len(cells)))  # ALTER TABLE ADD COLUMN
        if ipk is not None and ipk < len(cells) and cells[ipk] is None:
            cells[ipk] = record.rowid
        rows.append(ViewRow(record.rowid, tuple(cells), record.cells, record.damaged))
    return TableView(schema, columns, tuple(rows), damage)
