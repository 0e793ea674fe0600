"""Locate and classify evidence-bearing paths in an extraction tree.

Path matching is segment-exact but insensitive to case and separator
style; database candidates are confirmed by sniffing the SQLite magic so
planted decoys surface as suspicious instead of being parsed.
"""
from __future__ import annotations

import fnmatch
from dataclasses import dataclass

from . import sqlite_reader
from .errors import SqliteFormatError, TriageError
from .extraction import ExtractionTree, FileEntry
from .sqlite_reader import DbImage

WHATSAPP = "whatsapp"
VIBER = "viber"

MESSAGE_DB = "message-db"
CONTACT_DB = "contact-db"
CALL_LOG_DB = "call-log-db"
VIBER_DATA_DB = "viber-data-db"
VIBER_MESSAGES_DB = "viber-messages-db"
MEDIA_DIR = "media-dir"
AVATAR_DIR = "avatar-dir"
ENCRYPTED_BACKUP = "encrypted-backup"
UNCLASSIFIED_DB = "unclassified-db"

DB_KINDS = frozenset(
    {MESSAGE_DB, CONTACT_DB, CALL_LOG_DB, VIBER_DATA_DB, VIBER_MESSAGES_DB, UNCLASSIFIED_DB}
)

PATH_AND_MAGIC = "path-and-magic"
PATH_ONLY = "path-only"
MAGIC_ONLY = "magic-only"

_KINDS_BY_APP = {
    WHATSAPP: frozenset({MESSAGE_DB, CONTACT_DB, MEDIA_DIR, AVATAR_DIR, ENCRYPTED_BACKUP}),
    VIBER: frozenset({CALL_LOG_DB, VIBER_DATA_DB, VIBER_MESSAGES_DB, UNCLASSIFIED_DB}),
}

# (app, kind, suffix segments) for single-file database stores
_DB_SUFFIXES = (
    (WHATSAPP, MESSAGE_DB, ("com.whatsapp", "databases", "msgstore.db")),
    (WHATSAPP, CONTACT_DB, ("com.whatsapp", "databases", "wa.db")),
    (VIBER, CALL_LOG_DB, ("com.viber.voip", "databases", "viber_call_log.db")),
    (VIBER, VIBER_DATA_DB, ("com.viber.voip", "databases", "viber_data")),
    (VIBER, VIBER_MESSAGES_DB, ("com.viber.voip", "databases", "viber_messages")),
)

_AVATAR_SUFFIX = ("com.whatsapp", "files", "avatars")
_VIBER_DB_DIR = ("com.viber.voip", "databases")
_BACKUP_PATTERN = "msgstore*.crypt*"


@dataclass(frozen=True)
class ArtifactStore:
    app: str
    kind: str
    path: str
    confidence: str  # path-and-magic | path-only | magic-only
    note: str | None = None

    def __post_init__(self):
        if self.kind not in _KINDS_BY_APP[self.app]:
            raise ValueError(f"kind {self.kind!r} is inconsistent with app {self.app!r}")
        if self.confidence == PATH_AND_MAGIC and self.kind not in DB_KINDS:
            raise ValueError("path-and-magic confidence applies to database stores only")


def _lower_segments(entry: FileEntry) -> tuple[str, ...]:
    return tuple(seg.lower() for seg in entry.path_segments())


def _viber_name_matches(segment: str, wanted: str) -> bool:
    # "viber_data" / "viber data" / "Viber_Data" all name the same store
    return segment.replace(" ", "_") == wanted


def _endswith(segments: tuple[str, ...], suffix: tuple[str, ...], tolerant_last: bool) -> bool:
    if len(segments) < len(suffix):
        return False
    tail = segments[-len(suffix):]
    if tail[:-1] != suffix[:-1]:
        return False
    if tolerant_last:
        return _viber_name_matches(tail[-1], suffix[-1])
    return tail[-1] == suffix[-1]


def in_whatsapp_owned_path(segments: tuple[str, ...]) -> bool:
    return any(seg == "whatsapp" or seg.startswith("com.whatsapp") for seg in segments[:-1])


def media_root_of(entry: FileEntry) -> str | None:
    """Path of the `.../whatsapp/media` directory this entry belongs to
    (or is), preserving original casing."""
    segments = entry.path_segments()
    lowered = [seg.lower() for seg in segments]
    for i in range(len(lowered) - 1):
        if lowered[i] == "whatsapp" and lowered[i + 1] == "media":
            return "/".join(segments[: i + 2])
    return None


def avatar_root_of(entry: FileEntry) -> str | None:
    segments = entry.path_segments()
    lowered = [seg.lower() for seg in segments]
    for i in range(len(lowered) - 2):
        if tuple(lowered[i : i + 3]) == _AVATAR_SUFFIX:
            return "/".join(segments[: i + 3])
    return None


def classify_path(entry: FileEntry, magic_ok: bool | None = None) -> ArtifactStore | None:
    """Classify one normalized entry; non-matches return None.

    `magic_ok` reports whether the entry's content passed the SQLite
    header sniff (None when not applicable or not yet sniffed).
    """
    segments = _lower_segments(entry)
    if not segments:
        return None

    if not entry.is_directory:
        name = segments[-1]
        if fnmatch.fnmatchcase(name, _BACKUP_PATTERN) and in_whatsapp_owned_path(segments):
            return ArtifactStore(WHATSAPP, ENCRYPTED_BACKUP, entry.normalized_path, PATH_ONLY)
        for app, kind, suffix in _DB_SUFFIXES:
            if _endswith(segments, suffix, tolerant_last=kind in (VIBER_DATA_DB, VIBER_MESSAGES_DB)):
                if magic_ok is False:
                    return ArtifactStore(
                        app, kind, entry.normalized_path, PATH_ONLY,
                        note="content is not SQLite despite the database path; possible decoy",
                    )
                confidence = PATH_AND_MAGIC if magic_ok else PATH_ONLY
                return ArtifactStore(app, kind, entry.normalized_path, confidence)
        # unnamed extra stores in the Viber databases folder (the paper
        # counts five files but names only three)
        if len(segments) >= 3 and segments[-3:-1] == _VIBER_DB_DIR and magic_ok:
            return ArtifactStore(
                VIBER, UNCLASSIFIED_DB, entry.normalized_path, MAGIC_ONLY,
                note="unnamed SQLite store in the Viber databases folder",
            )
        media_root = media_root_of(entry)
        if media_root is not None and media_root != entry.normalized_path:
            return ArtifactStore(WHATSAPP, MEDIA_DIR, media_root, PATH_ONLY)
        avatar_root = avatar_root_of(entry)
        if avatar_root is not None and avatar_root != entry.normalized_path:
            return ArtifactStore(WHATSAPP, AVATAR_DIR, avatar_root, PATH_ONLY)
        return None

    if _endswith(segments, ("whatsapp", "media"), tolerant_last=False):
        return ArtifactStore(WHATSAPP, MEDIA_DIR, entry.normalized_path, PATH_ONLY)
    if _endswith(segments, _AVATAR_SUFFIX, tolerant_last=False):
        return ArtifactStore(WHATSAPP, AVATAR_DIR, entry.normalized_path, PATH_ONLY)
    return None


def sniff_entry_magic(tree: ExtractionTree, entry: FileEntry) -> bool:
    """True when the entry's first bytes parse as an SQLite header."""
    head = b""
    for chunk in tree.stream_entry(entry, chunk_size=sqlite_reader.HEADER_SIZE):
        head = chunk
        break
    try:
        sqlite_reader.parse_header(head)
        return True
    except SqliteFormatError:
        return False


def _needs_sniff(entry: FileEntry, segments: tuple[str, ...]) -> bool:
    if entry.is_directory:
        return False
    name = segments[-1]
    if fnmatch.fnmatchcase(name, _BACKUP_PATTERN):
        return False  # encrypted backups are never magic-sniffed as SQLite
    for _, kind, suffix in _DB_SUFFIXES:
        if _endswith(segments, suffix, tolerant_last=kind in (VIBER_DATA_DB, VIBER_MESSAGES_DB)):
            return True
    return len(segments) >= 3 and segments[-3:-1] == _VIBER_DB_DIR


def scan_stores(tree: ExtractionTree) -> list[ArtifactStore]:
    """Classify every entry; a pure function of tree contents, output
    sorted by (app, kind, path) with unique paths."""
    found: dict[str, ArtifactStore] = {}
    for entry in tree.entries:
        segments = _lower_segments(entry)
        if not segments:
            continue
        magic_ok = sniff_entry_magic(tree, entry) if _needs_sniff(entry, segments) else None
        store = classify_path(entry, magic_ok)
        if store is not None and store.path not in found:
            found[store.path] = store
    return sorted(found.values(), key=lambda s: (s.app, s.kind, s.path))


def load_database(tree: ExtractionTree, store: ArtifactStore) -> DbImage:
    """Single choke point through which the pipeline opens store content
    as a database; instrumentation hooks here to prove encrypted backups
    are never opened."""
    entry = tree.find(store.path)
    if entry is None:
        raise TriageError(f"store path {store.path!r} vanished from the tree")
    return sqlite_reader.open_database(tree.read_entry(entry), source_path=store.path)
