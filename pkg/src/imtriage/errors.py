"""Exception hierarchy for the triage pipeline.

Every error a caller is expected to handle derives from TriageError;
format-level SQLite problems derive from SqliteFormatError so the
pipeline can degrade per-store instead of aborting the case.
"""


class TriageError(Exception):
    pass


# --- extraction ingest ---------------------------------------------------

class ExtractionNotFoundError(TriageError):
    pass


class UnsupportedContainerError(TriageError):
    pass


class CorruptArchiveError(TriageError):
    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at archive offset {offset})"
        super().__init__(message)
        self.offset = offset


class BadPatternError(TriageError):
    pass


class EntryVanishedError(TriageError):
    """Directory-backed tree mutated after opening: evidence contamination."""


class EntryTooLargeError(TriageError):
    """Entry exceeds the whole-load cap; use the streaming reader."""


# --- sqlite reader -------------------------------------------------------

class SqliteFormatError(TriageError):
    pass


class MagicMismatchError(SqliteFormatError):
    pass


class BadPageSizeError(SqliteFormatError):
    pass


class TruncatedFileError(SqliteFormatError):
    pass


class TruncatedVarintError(SqliteFormatError):
    pass


class CorruptSchemaPageError(SqliteFormatError):
    pass


class CorruptPageError(SqliteFormatError):
    """Carries the structured damage report; rows yielded before the
    damage point remain valid."""

    def __init__(self, damage):
        super().__init__(str(damage))
        self.damage = damage


class CyclicOverflowError(SqliteFormatError):
    pass


class SerialTypeReservedError(SqliteFormatError):
    pass


class RecordOverrunError(SqliteFormatError):
    pass


class UnsupportedFeatureError(SqliteFormatError):
    pass


# --- parsers / report / manifest ----------------------------------------

class MissingTableError(TriageError):
    def __init__(self, table: str, available: list[str] | None = None):
        self.table = table
        self.available = tuple(available or ())
        detail = f"required table {table!r} not found"
        if self.available:
            detail += f"; store holds: {', '.join(self.available)}"
        super().__init__(detail)


class UnsupportedFormatError(TriageError):
    pass


class MalformedManifestError(TriageError):
    pass


class InvalidScenarioError(TriageError):
    pass


class EngineUnavailableError(TriageError):
    pass
