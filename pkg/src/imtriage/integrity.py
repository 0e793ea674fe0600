"""SHA-256 chain-of-custody manifests over extraction trees.

Manifest file layout (UTF-8, line-oriented, trailing newline), designed
so external tools can re-verify it byte-for-byte:

    # imtriage evidence manifest v1
    # created_at_utc: <ISO-8601 or ->
    # tool_version: <text>
    # entries: <count>
    # tree_digest: <64 lowercase hex>
    <path>\t<size>\t<sha256>\n   (one line per file, sorted by path)

Backslash, tab, CR and LF inside paths are escaped as \\ \t \r \n. The
tree digest is the SHA-256 of exactly the record lines, so it depends on
evidence content alone; the header lines (timestamp, tool version) sit
outside the digested region.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from datetime import datetime, timezone

from .errors import MalformedManifestError
from .extraction import ExtractionTree, FileEntry

MANIFEST_HEADER = "# imtriage evidence manifest v1"
_HEX64 = re.compile(r"^[0-9a-f]{64}$")

MATCH = "match"
MISMATCH = "mismatch"
MISSING = "missing"
EXTRA = "extra"


@dataclass(frozen=True)
class ManifestEntry:
    normalized_path: str
    size_bytes: int
    sha256_hex: str


@dataclass(frozen=True)
class EvidenceManifest:
    created_at_utc: str | None
    tool_version: str
    entries: tuple[ManifestEntry, ...]
    tree_digest: str


@dataclass(frozen=True)
class VerificationReport:
    matched: tuple[str, ...]
    mismatched: tuple[str, ...]
    missing: tuple[str, ...]   # in the manifest, absent from the tree
    extra: tuple[str, ...]     # in the tree, absent from the manifest

    @property
    def passed(self) -> bool:
        return not (self.mismatched or self.missing or self.extra)


def hash_entry(tree: ExtractionTree, entry: FileEntry) -> str:
    """Streaming SHA-256 over the full entry content."""
    digest = hashlib.sha256()
    for chunk in tree.stream_entry(entry):
        digest.update(chunk)
    return digest.hexdigest()


def _escape(path: str) -> str:
    return (
        path.replace("\\", "\\\\")
        .replace("\t", "\\t")
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 1 >= len(text):
                raise MalformedManifestError("dangling escape in path")
            nxt = text[i + 1]
            try:
                out.append({"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}[nxt])
            except KeyError:
                raise MalformedManifestError(f"unknown escape \\{nxt} in path") from None
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def _record_lines(entries: tuple[ManifestEntry, ...]) -> bytes:
    lines = [
        f"{_escape(e.normalized_path)}\t{e.size_bytes}\t{e.sha256_hex}\n" for e in entries
    ]
    return "".join(lines).encode("utf-8", errors="surrogateescape")


def compute_tree_digest(entries: tuple[ManifestEntry, ...]) -> str:
    return hashlib.sha256(_record_lines(entries)).hexdigest()


def build_manifest(
    tree: ExtractionTree,
    *,
    tool_version: str = "unknown",
    created_at_utc: str | None = None,
) -> EvidenceManifest:
    """One record per file entry, sorted by path. Aborts on any unreadable
    entry: a partial manifest is worse than none."""
    if created_at_utc is None:
        created_at_utc = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    entries = tuple(
        ManifestEntry(entry.normalized_path, entry.size_bytes, hash_entry(tree, entry))
        for entry in tree.entries
        if not entry.is_directory
    )
    return EvidenceManifest(created_at_utc, tool_version, entries, compute_tree_digest(entries))


def serialize_manifest(manifest: EvidenceManifest) -> bytes:
    head = (
        f"{MANIFEST_HEADER}\n"
        f"# created_at_utc: {manifest.created_at_utc or '-'}\n"
        f"# tool_version: {manifest.tool_version}\n"
        f"# entries: {len(manifest.entries)}\n"
        f"# tree_digest: {manifest.tree_digest}\n"
    )
    return head.encode("utf-8") + _record_lines(manifest.entries)


def parse_manifest(data: bytes) -> EvidenceManifest:
    try:
        text = data.decode("utf-8", errors="surrogateescape")
    except Exception as exc:  # pragma: no cover - surrogateescape cannot fail
        raise MalformedManifestError(str(exc)) from exc
    lines = text.split("\n")
    if not lines or lines[0] != MANIFEST_HEADER:
        raise MalformedManifestError("missing manifest header line")
    if lines[-1] != "":
        raise MalformedManifestError("manifest must end with a newline")
    lines = lines[1:-1]

    meta: dict[str, str] = {}
    records: list[ManifestEntry] = []
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            meta[key] = value
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise MalformedManifestError(f"record line needs 3 tab-separated fields: {line!r}")
        path, size_text, digest = parts
        if not size_text.isdigit():
            raise MalformedManifestError(f"size is not a non-negative integer: {size_text!r}")
        if not _HEX64.match(digest):
            raise MalformedManifestError(f"digest is not 64 lowercase hex chars: {digest!r}")
        records.append(ManifestEntry(_unescape(path), int(size_text), digest))

    paths = [r.normalized_path for r in records]
    if sorted(paths, key=lambda p: p.encode("utf-8", errors="surrogateescape")) != paths:
        raise MalformedManifestError("record lines are not sorted by path")
    if len(set(paths)) != len(paths):
        raise MalformedManifestError("duplicate paths in manifest")

    declared = meta.get("tree_digest", "")
    entries = tuple(records)
    recomputed = compute_tree_digest(entries)
    if declared != recomputed:
        raise MalformedManifestError(
            f"declared tree digest {declared!r} does not match the records ({recomputed})"
        )
    if meta.get("entries", str(len(entries))) != str(len(entries)):
        raise MalformedManifestError("declared entry count does not match the records")
    created = meta.get("created_at_utc")
    return EvidenceManifest(
        None if created in (None, "-") else created,
        meta.get("tool_version", "unknown"),
        entries,
        declared,
    )


def verify_manifest(tree: ExtractionTree, manifest: EvidenceManifest) -> VerificationReport:
    """Per-entry match/mismatch/missing/extra; passes only when everything
    matches and the tree holds nothing undeclared."""
    in_tree = {e.normalized_path: e for e in tree.entries if not e.is_directory}
    matched, mismatched, missing = [], [], []
    for record in manifest.entries:
        entry = in_tree.pop(record.normalized_path, None)
        if entry is None:
            missing.append(record.normalized_path)
        elif (
            entry.size_bytes == record.size_bytes
            and hash_entry(tree, entry) == record.sha256_hex
        ):
            matched.append(record.normalized_path)
        else:
            mismatched.append(record.normalized_path)
    extra = sorted(in_tree)
    return VerificationReport(tuple(matched), tuple(mismatched), tuple(missing), tuple(extra))
