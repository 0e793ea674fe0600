"""Read-only view over an acquired Android filesystem extraction.

A plain directory or an uncompressed POSIX (ustar/pax) tar archive is
presented as one immutable, deterministically ordered tree of normalized
`/`-separated paths. Inputs are never written to; symlinks are recorded
but never followed.
"""
from __future__ import annotations

import os
import re
import stat
import tarfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

from .errors import (
    BadPatternError,
    CorruptArchiveError,
    EntryTooLargeError,
    EntryVanishedError,
    ExtractionNotFoundError,
    UnsupportedContainerError,
)

DEFAULT_LOAD_CAP = 256 * 1024 * 1024  # whole-load cap; larger entries must stream
STREAM_CHUNK = 1024 * 1024

_COMPRESSED_MAGICS = (
    (b"\x1f\x8b", "gzip"),
    (b"BZh", "bzip2"),
    (b"\xfd7zXZ\x00", "xz"),
    (b"\x28\xb5\x2f\xfd", "zstd"),
    (b"PK\x03\x04", "zip"),
)


def normalize_path(path: str) -> str:
    """Collapse a raw member path to canonical form: `/` separators, no
    empty/`.`/`..` segments, no leading slash. Idempotent.

    Raises ValueError if `..` would climb above the root.
    """
    segments: list[str] = []
    for seg in path.replace("\\", "/").split("/"):
        if seg in ("", "."):
            continue
        if seg == "..":
            if not segments:
                raise ValueError(f"path escapes extraction root: {path!r}")
            segments.pop()
        else:
            segments.append(seg)
    return "/".join(segments)


@dataclass(frozen=True)
class FileEntry:
    normalized_path: str
    size_bytes: int
    is_directory: bool
    # ingested for provenance only; never trusted as an artifact timestamp
    # and excluded from equality so directory/tar ingestion compare equal.
    mtime_epoch: float | None = field(default=None, compare=False)

    def path_segments(self) -> tuple[str, ...]:
        return tuple(self.normalized_path.split("/")) if self.normalized_path else ()


@dataclass(frozen=True)
class ExtractionTree:
    source_kind: str  # "directory" | "tar-archive"
    root_label: str
    entries: tuple[FileEntry, ...]
    symlinks: tuple[tuple[str, str], ...] = ()  # (normalized path, raw target)
    specials: tuple[tuple[str, str], ...] = ()  # (normalized path, member kind)
    load_cap_bytes: int = DEFAULT_LOAD_CAP
    _source: Path = field(default=Path("."), repr=False, compare=False)
    # tar member payload locations: normalized path -> (data offset, size)
    _tar_index: dict = field(default_factory=dict, repr=False, compare=False)

    def find(self, path: str) -> FileEntry | None:
        wanted = normalize_path(path)
        for entry in self.entries:
            if entry.normalized_path == wanted:
                return entry
        return None

    def list_entries(self, glob: str | None = None) -> list[FileEntry]:
        """Entries matching the glob (all when absent), in sorted order.

        `*`/`?` do not cross `/`; a bare `**` segment spans any number of
        segments.
        """
        if glob is None:
            return list(self.entries)
        pattern = _glob_to_regex(glob)
        return [e for e in self.entries if pattern.match(e.normalized_path)]

    def read_entry(self, entry: FileEntry) -> bytes:
        """Full content of a file entry; length always equals size_bytes."""
        if entry.is_directory:
            raise ValueError(f"cannot read directory entry {entry.normalized_path!r}")
        if entry.size_bytes > self.load_cap_bytes:
            raise EntryTooLargeError(
                f"{entry.normalized_path}: {entry.size_bytes} bytes exceeds the "
                f"{self.load_cap_bytes}-byte load cap; stream instead"
            )
        return b"".join(self.stream_entry(entry))

    def stream_entry(self, entry: FileEntry, chunk_size: int = STREAM_CHUNK) -> Iterator[bytes]:
        """Yield entry content in chunks. Safe for concurrent callers: every
        stream opens its own handle on the source."""
        if entry.is_directory:
            raise ValueError(f"cannot read directory entry {entry.normalized_path!r}")
        if self.source_kind == "directory":
            yield from self._stream_from_directory(entry, chunk_size)
        else:
            yield from self._stream_from_tar(entry, chunk_size)

    def _stream_from_directory(self, entry: FileEntry, chunk_size: int) -> Iterator[bytes]:
        target = self._source / Path(entry.normalized_path)
        try:
            handle = open(target, "rb")
        except FileNotFoundError:
            raise EntryVanishedError(
                f"{entry.normalized_path}: file disappeared after the tree was opened"
            ) from None
        total = 0
        with handle:
            while True:
                chunk = handle.read(chunk_size)
                if not chunk:
                    break
                total += len(chunk)
                if total > entry.size_bytes:
                    raise EntryVanishedError(
                        f"{entry.normalized_path}: grew beyond recorded size "
                        f"{entry.size_bytes}; tree mutated externally"
                    )
                yield chunk
        if total != entry.size_bytes:
            raise EntryVanishedError(
                f"{entry.normalized_path}: read {total} bytes, expected "
                f"{entry.size_bytes}; tree mutated externally"
            )

    def _stream_from_tar(self, entry: FileEntry, chunk_size: int) -> Iterator[bytes]:
        offset, size = self._tar_index[entry.normalized_path]
        try:
            handle = open(self._source, "rb")
        except FileNotFoundError:
            raise EntryVanishedError(f"archive {self._source} disappeared") from None
        with handle:
            handle.seek(offset)
            remaining = size
            while remaining:
                chunk = handle.read(min(chunk_size, remaining))
                if not chunk:
                    raise CorruptArchiveError(
                        f"{entry.normalized_path}: member data truncated", offset=offset
                    )
                remaining -= len(chunk)
                yield chunk


def open_extraction(path: str | Path, *, load_cap_bytes: int = DEFAULT_LOAD_CAP) -> ExtractionTree:
    """Open a directory or uncompressed tar archive as an ExtractionTree."""
    source = Path(path)
    if not source.exists():
        raise ExtractionNotFoundError(f"no such extraction: {source}")
    if source.is_dir():
        return _open_directory(source, load_cap_bytes)
    if source.is_file():
        return _open_tar(source, load_cap_bytes)
    raise UnsupportedContainerError(f"{source}: neither a directory nor a regular file")


def list_entries(tree: ExtractionTree, glob: str | None = None) -> list[FileEntry]:
    return tree.list_entries(glob)


def read_entry(tree: ExtractionTree, entry: FileEntry) -> bytes:
    return tree.read_entry(entry)


def _sort_key(entry: FileEntry):
    return entry.normalized_path.encode("utf-8", errors="surrogateescape")


def _open_directory(root: Path, load_cap_bytes: int) -> ExtractionTree:
    entries: list[FileEntry] = []
    symlinks: list[tuple[str, str]] = []
    specials: list[tuple[str, str]] = []

    def walk(directory: Path) -> None:
        with os.scandir(directory) as it:
            children = sorted(it, key=lambda d: d.name)
        for child in children:
            rel = normalize_path(str(Path(child.path).relative_to(root)))
            if child.is_symlink():
                symlinks.append((rel, os.readlink(child.path)))
                continue  # never followed
            info = child.stat(follow_symlinks=False)
            if stat.S_ISDIR(info.st_mode):
                entries.append(FileEntry(rel, 0, True, info.st_mtime))
                walk(Path(child.path))
            elif stat.S_ISREG(info.st_mode):
                entries.append(FileEntry(rel, info.st_size, False, info.st_mtime))
            else:
                specials.append((rel, stat.filemode(info.st_mode)))

    walk(root)
    entries.sort(key=_sort_key)
    return ExtractionTree(
        source_kind="directory",
        root_label=root.name or str(root),
        entries=tuple(entries),
        symlinks=tuple(sorted(symlinks)),
        specials=tuple(sorted(specials)),
        load_cap_bytes=load_cap_bytes,
        _source=root,
    )


def _open_tar(source: Path, load_cap_bytes: int) -> ExtractionTree:
    with open(source, "rb") as fh:
        head = fh.read(8)
    for magic, name in _COMPRESSED_MAGICS:
        if head.startswith(magic):
            raise UnsupportedContainerError(
                f"{source}: {name}-compressed input; only plain tar or a directory is supported"
            )

    try:
        archive = tarfile.open(source, mode="r:")
    except tarfile.ReadError as exc:
        raise UnsupportedContainerError(f"{source}: not a tar archive ({exc})") from exc

    files: dict[str, tuple[FileEntry, tuple[int, int]]] = {}
    dirs: dict[str, FileEntry] = {}
    symlinks: list[tuple[str, str]] = []
    specials: list[tuple[str, str]] = []
    file_size = source.stat().st_size

    with archive:
        while True:
            try:
                member = archive.next()
            except tarfile.ReadError as exc:
                raise CorruptArchiveError(
                    f"{source}: {exc}", offset=getattr(archive, "offset", None)
                ) from exc
            if member is None:
                break
            try:
                rel = normalize_path(member.name)
            except ValueError as exc:
                raise CorruptArchiveError(f"{source}: {exc}", offset=member.offset) from exc
            if not rel:
                continue  # the archive root itself
            if member.issym() or member.islnk():
                symlinks.append((rel, member.linkname))
            elif member.isdir():
                files.pop(rel, None)  # later member of the same name wins
                dirs[rel] = FileEntry(rel, 0, True, float(member.mtime))
            elif member.isreg() and not member.sparse:
                data_end = member.offset_data + member.size
                if data_end > file_size:
                    raise CorruptArchiveError(
                        f"{source}: member {rel!r} data extends past end of archive",
                        offset=member.offset,
                    )
                dirs.pop(rel, None)
                files[rel] = (
                    FileEntry(rel, member.size, False, float(member.mtime)),
                    (member.offset_data, member.size),
                )
            else:
                kind = {
                    tarfile.CHRTYPE: "char-device",
                    tarfile.BLKTYPE: "block-device",
                    tarfile.FIFOTYPE: "fifo",
                }.get(member.type, "sparse" if member.sparse else "special")
                specials.append((rel, kind))

    # Synthesize ancestor directories so a tar without explicit directory
    # members enumerates identically to the directory form.
    for path in list(files) + list(dirs):
        parts = path.split("/")
        for depth in range(1, len(parts)):
            parent = "/".join(parts[:depth])
            if parent not in dirs and parent not in files:
                dirs[parent] = FileEntry(parent, 0, True, None)

    entries = sorted(
        [fe for fe, _ in files.values()] + list(dirs.values()), key=_sort_key
    )
    index = {path: location for path, (_, location) in files.items()}
    return ExtractionTree(
        source_kind="tar-archive",
        root_label=source.stem,
        entries=tuple(entries),
        symlinks=tuple(sorted(symlinks)),
        specials=tuple(sorted(specials)),
        load_cap_bytes=load_cap_bytes,
        _source=source,
        _tar_index=index,
    )


def _glob_to_regex(pattern: str) -> re.Pattern:
    """Translate a path glob to a regex. Segment `**` spans directories;
    `*`/`?`/`[...]` stay within one segment."""
    if pattern == "":
        raise BadPatternError("empty pattern")
    parts = pattern.replace("\\", "/").split("/")
    out: list[str] = []
    for index, part in enumerate(parts):
        if part == "**":
            out.append("(?:[^/]+/)*" if index < len(parts) - 1 else "(?:[^/]+(?:/[^/]+)*)?")
            continue
        piece = _segment_to_regex(part, pattern)
        out.append(piece + "/" if index < len(parts) - 1 else piece)
    try:
        return re.compile("^" + "".join(out) + "$")
    except re.error as exc:
        raise BadPatternError(f"malformed glob {pattern!r}: {exc}") from exc


def _segment_to_regex(segment: str, whole: str) -> str:
    out = []
    i = 0
    while i < len(segment):
        ch = segment[i]
        if ch == "*":
            out.append("[^/]*")
        elif ch == "?":
            out.append("[^/]")
        elif ch == "[":
            end = segment.find("]", i + 2 if segment[i + 1 : i + 2] in ("!", "^") else i + 1)
            if end == -1:
                raise BadPatternError(f"malformed glob {whole!r}: unterminated character class")
            body = segment[i + 1 : end]
            if body.startswith("!"):
                body = "^" + body[1:]
            out.append(f"[{body}]")
            i = end
        else:
            out.append(re.escape(ch))
        i += 1
    return "".join(out)
