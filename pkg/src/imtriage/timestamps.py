"""Epoch-timestamp normalization shared by the app parsers.

The artifact stores never declare their unit; magnitude decides:
raw >= 10^12 is milliseconds, 10^9 <= raw < 10^12 is seconds, anything
below 10^9 (before 2001-09-09) is implausible for these apps and gets
flagged but never dropped.
"""
from __future__ import annotations

import calendar
from dataclasses import dataclass
from datetime import datetime, timezone

MS_THRESHOLD = 10**12
PLAUSIBLE_FLOOR = 10**9

# last epoch-second renderable as a 4-digit ISO year (9999-12-31T23:59:59Z)
_MAX_RENDERABLE_SECONDS = 253402300799

UNIT_MS = "ms"
UNIT_S = "s"

UNIT_LABELS = {UNIT_MS: "milliseconds", UNIT_S: "seconds"}


@dataclass(frozen=True)
class NormalizedTimestamp:
    iso: str
    unit: str  # UNIT_MS | UNIT_S
    implausible: bool
    epoch_ms: int


def normalize_timestamp(raw: int) -> NormalizedTimestamp:
    """Total function: every input yields a rendering plus flags."""
    implausible = False
    if raw >= MS_THRESHOLD:
        unit, epoch_ms = UNIT_MS, raw
    elif raw >= PLAUSIBLE_FLOOR:
        unit, epoch_ms = UNIT_S, raw * 1000
    else:
        unit, epoch_ms = UNIT_S, raw * 1000
        implausible = True
    seconds, millis = divmod(epoch_ms, 1000)
    if seconds < 0 or seconds > _MAX_RENDERABLE_SECONDS:
        # beyond ISO-8601 four-digit years; keep the value recoverable
        return NormalizedTimestamp(f"unrenderable-epoch-ms:{epoch_ms}", unit, True, epoch_ms)
    moment = datetime.fromtimestamp(seconds, tz=timezone.utc)
    iso = moment.strftime("%Y-%m-%dT%H:%M:%S")
    if millis:
        iso += f".{millis:03d}"
    return NormalizedTimestamp(iso + "Z", unit, implausible, epoch_ms)


def iso_to_epoch_ms(iso: str) -> int:
    """Inverse of the rendering above; used to prove round-trips."""
    if iso.startswith("unrenderable-epoch-ms:"):
        return int(iso.split(":", 1)[1])
    if not iso.endswith("Z"):
        raise ValueError(f"not a UTC timestamp: {iso!r}")
    body = iso[:-1]
    millis = 0
    if "." in body:
        body, fraction = body.split(".", 1)
        millis = int(fraction.ljust(3, "0")[:3])
    moment = datetime.strptime(body, "%Y-%m-%dT%H:%M:%S")
    return calendar.timegm(moment.timetuple()) * 1000 + millis


def denormalize(ts: NormalizedTimestamp) -> int:
    """Recover the raw stored epoch integer under the chosen unit."""
    epoch_ms = iso_to_epoch_ms(ts.iso)
    return epoch_ms if ts.unit == UNIT_MS else epoch_ms // 1000
