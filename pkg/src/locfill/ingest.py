"""Event stream parsing and removal of accounts with impossible movement.

Input records are line delimited, either CSV (``user_id,iso8601_ts,lat,lon``)
or JSON objects with keys ``user``, ``ts``, ``lat``, ``lon``; the format is
auto-detected per file.  Malformed lines are counted and skipped, never
fatal.  Timestamps are read as UTC and optionally shifted to a fixed local
offset with a single daylight-saving switchover.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable, Optional

from .geo import GeoPoint, haversine_miles

# Movement faster than this between consecutive posts is physically
# implausible; accounts exceeding the violation share below are dropped.
SPEED_THRESHOLD_MPM = 0.5
VIOLATION_SHARE = 0.05

# Guard for zero or sub-minute intervals: one second, in minutes.
_MIN_INTERVAL_MINUTES = 1.0 / 60.0


@dataclass(frozen=True)
class RawEvent:
    """One geo-tagged post: who, when (epoch seconds, UTC), where."""

    user_id: str
    ts: int
    point: GeoPoint


@dataclass(frozen=True)
class AccountVerdict:
    user_id: str
    total_events: int
    violating_events: int
    excluded: bool


@dataclass
class ParseReport:
    parsed: int = 0
    skipped: int = 0
    duplicates: int = 0
    errors: list = field(default_factory=list)  # first few (line_no, reason)

    _MAX_ERRORS = 20

    def note_error(self, line_no: int, reason: str) -> None:
        self.skipped += 1
        if len(self.errors) < self._MAX_ERRORS:
            self.errors.append((line_no, reason))


@dataclass(frozen=True)
class ClockShift:
    """Fixed UTC offset plus an optional one-off DST switchover.

    From ``dst_start_ts`` (a UTC epoch second) onward an extra hour is
    added, reproducing a spring-forward adjustment inside the study window.
    """

    utc_offset_hours: float = 0.0
    dst_start_ts: Optional[int] = None

    def apply(self, ts: int) -> int:
        shifted = ts + int(round(self.utc_offset_hours * 3600))
        if self.dst_start_ts is not None and ts >= self.dst_start_ts:
            shifted += 3600
        return shifted


def parse_timestamp(text: str) -> int:
    """ISO-8601 (or integer epoch seconds) to an epoch second."""
    text = text.strip()
    if not text:
        raise ValueError("empty timestamp")
    try:
        return int(text)
    except ValueError:
        pass
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _parse_line(line: str) -> RawEvent:
    line = line.strip()
    if line.startswith("{"):
        obj = json.loads(line)
        user, ts, lat, lon = obj["user"], obj["ts"], obj["lat"], obj["lon"]
    else:
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"expected 4 CSV fields, got {len(parts)}")
        user, ts, lat, lon = parts
    user = str(user).strip()
    if not user:
        raise ValueError("empty user id")
    return RawEvent(user, parse_timestamp(str(ts)), GeoPoint(float(lat), float(lon)))


def parse_events(
    stream: Iterable[str] | IO[str],
    clock: ClockShift | None = None,
) -> tuple[dict[str, list[RawEvent]], ParseReport]:
    """Parse a line-delimited event stream into per-user sorted lists.

    Returns events grouped by user, each list sorted by timestamp, with
    exact duplicates (same user, time and point) removed, plus a report of
    skipped lines.
    """
    clock = clock or ClockShift()
    report = ParseReport()
    by_user: dict[str, list[RawEvent]] = {}
    for line_no, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        if line_no == 1 and line.lower().lstrip().startswith("user_id,"):
            continue  # optional CSV header
        try:
            event = _parse_line(line)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            report.note_error(line_no, str(exc))
            continue
        if clock.utc_offset_hours or clock.dst_start_ts is not None:
            event = RawEvent(event.user_id, clock.apply(event.ts), event.point)
        by_user.setdefault(event.user_id, []).append(event)
        report.parsed += 1

    for user, events in by_user.items():
        events.sort(key=lambda e: (e.ts, e.point.lat, e.point.lon))
        deduped: list[RawEvent] = []
        for e in events:
            if deduped and deduped[-1] == e:
                report.duplicates += 1
                report.parsed -= 1
                continue
            deduped.append(e)
        by_user[user] = deduped
    return by_user, report


def speed_violation(e1: RawEvent, e2: RawEvent) -> bool:
    """True when moving between the two events needs > 0.5 miles/minute.

    ``e1`` must not be later than ``e2``.  Identical timestamps fall back
    to a one-second interval, so co-timed posts from clearly separated
    points still register as violations.
    """
    if e2.ts < e1.ts:
        raise ValueError("events out of order")
    dist = haversine_miles(e1.point, e2.point)
    minutes = max((e2.ts - e1.ts) / 60.0, _MIN_INTERVAL_MINUTES)
    return dist / minutes > SPEED_THRESHOLD_MPM


def account_verdict(user_id: str, events: list[RawEvent]) -> AccountVerdict:
    """Count violating events (attributed to the later event of each pair)."""
    violations = sum(
        1 for prev, cur in zip(events, events[1:]) if speed_violation(prev, cur)
    )
    total = len(events)
    excluded = total >= 1 and violations / total > VIOLATION_SHARE
    return AccountVerdict(user_id, total, violations, excluded)


def filter_spoofed_accounts(
    events_by_user: dict[str, list[RawEvent]],
) -> tuple[dict[str, list[RawEvent]], list[AccountVerdict]]:
    """Drop accounts whose violating share exceeds 5% (strictly)."""
    retained: dict[str, list[RawEvent]] = {}
    verdicts: list[AccountVerdict] = []
    for user_id, events in events_by_user.items():
        verdict = account_verdict(user_id, events)
        verdicts.append(verdict)
        if not verdict.excluded:
            retained[user_id] = events
    return retained, verdicts


def apply_exclusion_list(
    events_by_user: dict[str, list[RawEvent]], excluded_ids: Iterable[str]
) -> tuple[dict[str, list[RawEvent]], list[str]]:
    """Remove explicitly listed accounts (e.g. known non-personal ones)."""
    excluded = set(excluded_ids)
    removed = sorted(u for u in events_by_user if u in excluded)
    kept = {u: ev for u, ev in events_by_user.items() if u not in excluded}
    return kept, removed
