"""Inventory card media and avatars, resolve message media references,
and flag encrypted chat backups.

Matching is exact-file-name only: fuzzy matching would invent evidence
links. Encrypted backups are identified by name and never opened as
databases; only their size and leading bytes are examined (the latter to
note decoys that carry an SQLite magic despite the backup name).
"""
from __future__ import annotations

import fnmatch
from dataclasses import dataclass

from .extraction import ExtractionTree, FileEntry
from .locator import avatar_root_of, in_whatsapp_owned_path, media_root_of
from .records import ChatMessage
from .sqlite_reader import MAGIC as SQLITE_MAGIC

RESOLVED = "resolved"
UNRESOLVED = "unresolved"

_BACKUP_PATTERN = "msgstore*.crypt*"


@dataclass(frozen=True)
class MediaRef:
    message_store_path: str
    message_rowid: int
    media_name: str
    resolved_paths: tuple[str, ...]  # every candidate on a name collision

    @property
    def status(self) -> str:
        return RESOLVED if self.resolved_paths else UNRESOLVED


@dataclass(frozen=True)
class EncryptedBackupRef:
    path: str
    size_bytes: int
    classification: str = "encrypted-chat-backup"
    note: str | None = None


def _is_media_member(entry: FileEntry) -> bool:
    if entry.is_directory:
        return False
    root = media_root_of(entry)
    if root is not None and root != entry.normalized_path:
        return True
    root = avatar_root_of(entry)
    return root is not None and root != entry.normalized_path


def index_media(tree: ExtractionTree) -> dict[str, list[str]]:
    """Terminal file name -> sorted paths, over every file under a
    whatsapp/media segment or the avatar folder."""
    index: dict[str, list[str]] = {}
    for entry in tree.entries:
        if _is_media_member(entry):
            name = entry.path_segments()[-1]
            index.setdefault(name, []).append(entry.normalized_path)
    return {name: sorted(paths) for name, paths in sorted(index.items())}


def resolve_media_refs(
    messages: list[ChatMessage], index: dict[str, list[str]]
) -> list[MediaRef]:
    """Exact-name resolution; messages without a media name yield nothing."""
    refs = []
    for message in messages:
        if not message.media_name:
            continue
        refs.append(
            MediaRef(
                message_store_path=message.store_path,
                message_rowid=message.rowid,
                media_name=message.media_name,
                resolved_paths=tuple(index.get(message.media_name, ())),
            )
        )
    return refs


def flag_encrypted_backups(tree: ExtractionTree) -> list[EncryptedBackupRef]:
    """msgstore*.crypt* files under whatsapp-owned paths. Content is never
    parsed; the first 16 bytes are compared against the SQLite magic only
    to call out badly-named decoys."""
    refs = []
    for entry in tree.entries:
        if entry.is_directory:
            continue
        segments = tuple(seg.lower() for seg in entry.path_segments())
        if not fnmatch.fnmatchcase(segments[-1], _BACKUP_PATTERN):
            continue
        if not in_whatsapp_owned_path(segments):
            continue
        note = None
        if entry.size_bytes >= len(SQLITE_MAGIC):
            head = b""
            for chunk in tree.stream_entry(entry, chunk_size=len(SQLITE_MAGIC)):
                head = chunk
                break
            if head == SQLITE_MAGIC:
                note = ("magic anomaly: content carries the SQLite header "
                        "despite the encrypted-backup name")
        refs.append(EncryptedBackupRef(entry.normalized_path, entry.size_bytes, note=note))
    return sorted(refs, key=lambda r: r.path)
