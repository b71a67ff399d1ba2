"""Fixed-resolution sampled timelines with stay and home interpolation.

A timeline is an array of slots at a resolution of 1 or 2 hours covering an
integer number of weeks from a Monday-00:00 study start.  Slot ``q`` is
centered on the sampled instant ``q * resolution`` from the start; events
are attached to their nearest sampled instant (exact midpoints round down).

Index vocabulary, used everywhere downstream:

* ``q`` global slot index, ``k`` slot-of-week, ``h`` slot-of-day,
* ``d`` day-of-week (Monday = 0), ``w`` week number,
* with ``q = w * slots_per_week + k`` and ``k = d * slots_per_day + h``.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .geo import GridSpec, OutsideGridError, assign_grid
from .ingest import RawEvent

EMPTY = -1

# Daytime (evaluation-eligible) slot centers run from 08:00 to 22:00
# inclusive: 15 sampled hours at 1-hour resolution, 8 at 2-hour.
DAY_START_HOUR = 8
DAY_END_HOUR = 22

# The home window of day d spans [22:00 of d, 08:00 of d+1).
NIGHT_START_HOUR = 22
NIGHT_END_HOUR = 8

MAX_STAY_GAP_SECONDS = 6 * 3600


class Provenance(IntEnum):
    NONE = 0
    OBSERVED = 1
    STAY_INTERP = 2
    HOME_INTERP = 3


@dataclass(frozen=True)
class TimeIndex:
    q: int
    k: int
    h: int
    d: int
    w: int


class TimeGrid:
    """Slot geometry for one (resolution, weeks, study start) combination.

    Precomputes per-slot index arrays so per-user passes can use plain
    array lookups.  ``study_start_ts`` must be a Monday 00:00.
    """

    def __init__(self, resolution_hours: int, weeks: int, study_start_ts: int = 0):
        if resolution_hours not in (1, 2):
            raise ValueError(f"resolution must be 1 or 2 hours, got {resolution_hours}")
        if weeks < 1:
            raise ValueError(f"need at least one week, got {weeks}")
        self.resolution_hours = resolution_hours
        self.weeks = weeks
        self.study_start_ts = study_start_ts
        self.slot_seconds = resolution_hours * 3600
        self.slots_per_day = 24 // resolution_hours
        self.slots_per_week = 7 * self.slots_per_day
        self.n_slots = weeks * self.slots_per_week

        q = np.arange(self.n_slots)
        self.k_of = (q % self.slots_per_week).astype(np.int32)
        self.h_of = (self.k_of % self.slots_per_day).astype(np.int32)
        self.d_of = (self.k_of // self.slots_per_day).astype(np.int32)
        self.w_of = (q // self.slots_per_week).astype(np.int32)
        center_hour = self.h_of * resolution_hours
        self.is_weekend = self.d_of >= 5
        self.is_daytime = (center_hour >= DAY_START_HOUR) & (center_hour <= DAY_END_HOUR)
        self.is_night = (center_hour >= NIGHT_START_HOUR) | (center_hour < NIGHT_END_HOUR)
        # Day-of-week owning each night slot's home window: the slot's own
        # day after 22:00, the previous day before 08:00.
        owner = np.where(center_hour >= NIGHT_START_HOUR, self.d_of, (self.d_of - 1) % 7)
        self.night_owner = np.where(self.is_night, owner, -1).astype(np.int32)

        self.daytime_hours: tuple[int, ...] = tuple(
            h for h in range(self.slots_per_day)
            if DAY_START_HOUR <= h * resolution_hours <= DAY_END_HOUR
        )

    def time_index(self, ts: int) -> TimeIndex:
        """Nearest-slot index of a timestamp; exact midpoints round down.

        Raises ``ValueError`` before the study start; timestamps at the far
        end clamp into the final slot.
        """
        rel = ts - self.study_start_ts
        if rel < 0:
            raise ValueError(f"timestamp {ts} precedes study start {self.study_start_ts}")
        q = (rel + self.slot_seconds // 2 - 1) // self.slot_seconds if rel > 0 else 0
        q = min(int(q), self.n_slots - 1)
        k = q % self.slots_per_week
        return TimeIndex(q=q, k=k, h=k % self.slots_per_day,
                         d=k // self.slots_per_day, w=q // self.slots_per_week)

    def slot_center_ts(self, q: int) -> int:
        return self.study_start_ts + q * self.slot_seconds

    def slot_interval(self, q: int) -> tuple[int, int]:
        """Inclusive timestamp range whose points map to slot ``q``.

        Midpoints round down, so each interior slot owns the instants in
        ``(center - S/2, center + S/2]``; the first and last slots absorb
        the window edges.
        """
        center = self.slot_center_ts(q)
        half = self.slot_seconds // 2
        lo = self.study_start_ts if q == 0 else center - half + 1
        if q == self.n_slots - 1:
            hi = self.study_start_ts + self.n_slots * self.slot_seconds - 1
        else:
            hi = center + half
        return lo, hi


@dataclass
class AssignedTimeline:
    """Per-user slot array of grid cells with provenance.

    ``cells[q]`` is a grid cell index or ``EMPTY``; ``provenance[q]`` says
    whether the value was observed or interpolated.
    """

    user_id: str
    grid: TimeGrid
    cells: np.ndarray      # int32, EMPTY where unassigned
    provenance: np.ndarray  # int8 of Provenance values

    @classmethod
    def empty(cls, user_id: str, grid: TimeGrid) -> "AssignedTimeline":
        return cls(
            user_id=user_id,
            grid=grid,
            cells=np.full(grid.n_slots, EMPTY, dtype=np.int32),
            provenance=np.zeros(grid.n_slots, dtype=np.int8),
        )

    @property
    def assigned(self) -> np.ndarray:
        return self.cells != EMPTY

    @property
    def n_assigned(self) -> int:
        return int(self.assigned.sum())

    def copy(self) -> "AssignedTimeline":
        return AssignedTimeline(self.user_id, self.grid,
                                self.cells.copy(), self.provenance.copy())

    def set_slot(self, q: int, cell: int, prov: Provenance) -> None:
        self.cells[q] = cell
        self.provenance[q] = prov


@dataclass(frozen=True)
class HomeMap:
    """Modal nighttime cell per day-of-week with a day-independent fallback."""

    per_day: dict  # d -> cell
    fallback: Optional[int]

    def home_for(self, d: int) -> Optional[int]:
        return self.per_day.get(d, self.fallback)


def _modal_cell(counter: Counter) -> Optional[int]:
    # Ties resolve to the smaller cell index.
    if not counter:
        return None
    return min(counter, key=lambda c: (-counter[c], c))


def build_assigned_timeline(
    user_id: str,
    events: Sequence[RawEvent],
    spec: GridSpec,
    grid: TimeGrid,
) -> tuple[AssignedTimeline, int]:
    """Slot observed events into a timeline.

    When several events share a slot the one closest to the slot center
    wins, earliest first on exact ties.  Events outside the grid bbox or
    before the study start are dropped; their count is returned.
    """
    tl = AssignedTimeline.empty(user_id, grid)
    dropped = 0
    # (distance to center, ts) of the current winner per slot
    best: dict[int, tuple[int, int]] = {}
    for e in events:
        try:
            cell = assign_grid(e.point, spec)
            q = grid.time_index(e.ts).q
        except (OutsideGridError, ValueError):
            dropped += 1
            continue
        key = (abs(e.ts - grid.slot_center_ts(q)), e.ts)
        if q not in best or key < best[q]:
            best[q] = key
            tl.set_slot(q, cell, Provenance.OBSERVED)
    return tl, dropped


def interpolate_stay(
    tl: AssignedTimeline,
    events: Sequence[RawEvent],
    spec: GridSpec,
    grid: TimeGrid,
) -> AssignedTimeline:
    """Fill gaps between same-cell consecutive events up to six hours apart.

    Every empty slot strictly between the two events' slots takes their
    shared cell; observed slots are never overwritten.
    """
    out = tl.copy()
    prev: Optional[tuple[int, int, int]] = None  # (slot, cell, ts)
    for e in events:
        try:
            cell = assign_grid(e.point, spec)
            q = grid.time_index(e.ts).q
        except (OutsideGridError, ValueError):
            continue
        if prev is not None:
            q0, c0, ts0 = prev
            if c0 == cell and (e.ts - ts0) <= MAX_STAY_GAP_SECONDS:
                for mid in range(q0 + 1, q):
                    if out.cells[mid] == EMPTY:
                        out.set_slot(mid, cell, Provenance.STAY_INTERP)
        prev = (q, cell, e.ts)
    return out


def infer_home(tl: AssignedTimeline) -> HomeMap:
    """Modal nighttime cell per day-of-week, plus a day-independent fallback."""
    grid = tl.grid
    night = tl.assigned & grid.is_night
    per_day = {}
    overall: Counter = Counter()
    for d in range(7):
        counts = Counter(
            tl.cells[night & (grid.night_owner == d)].tolist()
        )
        overall.update(counts)
        cell = _modal_cell(counts)
        if cell is not None:
            per_day[d] = cell
    return HomeMap(per_day=per_day, fallback=_modal_cell(overall))


def fill_home_nights(tl: AssignedTimeline, homes: HomeMap) -> AssignedTimeline:
    """Assign each empty nighttime slot the home of its window's day."""
    out = tl.copy()
    grid = tl.grid
    targets = np.nonzero((~tl.assigned) & grid.is_night)[0]
    for q in targets:
        home = homes.home_for(int(grid.night_owner[q]))
        if home is not None:
            out.set_slot(int(q), home, Provenance.HOME_INTERP)
    return out


def inclusion_check(tl: AssignedTimeline) -> bool:
    """Does every daytime slot-of-day have at least one assigned slot?"""
    grid = tl.grid
    covered = set(np.unique(grid.h_of[tl.assigned & grid.is_daytime]).tolist())
    return all(h in covered for h in grid.daytime_hours)


def daytime_empty_fraction(tl: AssignedTimeline) -> float:
    day = tl.grid.is_daytime
    return float((~tl.assigned & day).sum() / day.sum())


def preprocess_user(
    user_id: str,
    events: Sequence[RawEvent],
    spec: GridSpec,
    grid: TimeGrid,
) -> tuple[AssignedTimeline, HomeMap, int]:
    """Observation slotting, then stay interpolation, then home filling."""
    tl, dropped = build_assigned_timeline(user_id, events, spec, grid)
    tl = interpolate_stay(tl, events, spec, grid)
    homes = infer_home(tl)
    tl = fill_home_nights(tl, homes)
    return tl, homes, dropped


# ---------------------------------------------------------------------------
# Persistence: columnar CSV of assigned slots plus a JSON sidecar.

def write_timelines_csv(
    path: str | Path,
    timelines: Iterable[AssignedTimeline],
    spec: GridSpec,
    grid: TimeGrid,
) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "q", "cell", "provenance"])
        for tl in timelines:
            for q in np.nonzero(tl.assigned)[0]:
                writer.writerow([tl.user_id, int(q), int(tl.cells[q]),
                                 Provenance(int(tl.provenance[q])).name])
    tmp.replace(path)
    sidecar = {
        "resolution_hours": grid.resolution_hours,
        "weeks": grid.weeks,
        "study_start": datetime.fromtimestamp(
            grid.study_start_ts, tz=timezone.utc
        ).isoformat(),
        "grid_hash": spec.content_hash(),
        "grid": spec.to_dict(),
    }
    header = path.with_suffix(".header.json")
    tmp_header = header.with_suffix(".json.tmp")
    tmp_header.write_text(json.dumps(sidecar, indent=2))
    tmp_header.replace(header)


def read_timelines_csv(path: str | Path) -> tuple[list[AssignedTimeline], GridSpec, TimeGrid]:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".header.json").read_text())
    spec = GridSpec.from_dict(sidecar["grid"])
    start_ts = int(datetime.fromisoformat(sidecar["study_start"]).timestamp())
    grid = TimeGrid(sidecar["resolution_hours"], sidecar["weeks"], start_ts)

    by_user: dict[str, AssignedTimeline] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            tl = by_user.get(row["user_id"])
            if tl is None:
                tl = AssignedTimeline.empty(row["user_id"], grid)
                by_user[row["user_id"]] = tl
            tl.set_slot(int(row["q"]), int(row["cell"]), Provenance[row["provenance"]])
    return list(by_user.values()), spec, grid
