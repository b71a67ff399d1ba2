"""Ground-truth cohorts with community structure and sparse observations.

Users belong to groups sharing a deterministic weekly schedule: a home cell
through the night window, a work cell through weekday daytimes, and leisure
cells in blocks over both weekend days.  Each user's ground truth perturbs
the group schedule slot-wise with probability ``epsilon`` to a uniformly
random grid cell, and the observed event stream keeps each slot with
probability ``keep_rate``.  Everything is reproducible from the seed.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Dict, List, Optional, Sequence

import numpy as np

from .geo import (
    MILES_PER_DEG_LAT,
    GeoPoint,
    GridSpec,
    build_grid_spec,
    cell_bounds,
    square_bbox,
)
from .ingest import RawEvent
from .timeline import DAY_START_HOUR, NIGHT_START_HOUR, TimeGrid

# Monday 2014-01-06 00:00 UTC, inside the window the study format targets.
DEFAULT_STUDY_START = int(datetime(2014, 1, 6, tzinfo=timezone.utc).timestamp())

CELLS_PER_GROUP = 5  # home, work, up to three leisure cells


@dataclass(frozen=True)
class CohortConfig:
    n_users: int = 100
    n_groups: int = 10
    weeks: int = 26
    resolution_hours: int = 1
    cell_size_miles: float = 1.0
    bbox_side_miles: float = 29.0
    center_lat: float = 40.754
    center_lon: float = -73.984
    epsilon: float = 0.15
    keep_rate: float = 0.15
    n_leisure: int = 3
    weekend_rotation: bool = False
    force_inclusion: bool = True
    gps_sigma_miles: float = 0.016  # ~25 m of per-event position scatter
    seed: int = 0
    study_start_ts: int = DEFAULT_STUDY_START

    def __post_init__(self):
        if not 1 <= self.n_groups <= self.n_users:
            raise ValueError("need 1 <= n_groups <= n_users")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if not 0.0 <= self.keep_rate <= 1.0:
            raise ValueError("keep_rate must be in [0, 1]")
        if not 1 <= self.n_leisure <= 3:
            raise ValueError("n_leisure must be 1, 2 or 3")


@dataclass
class GroupSchedule:
    """One group's weekly pattern: cell per slot-of-week."""

    group: int
    home: int
    work: int
    leisure: List[int]
    week_cells: np.ndarray  # int32 of length slots_per_week


@dataclass
class GroundTruthTimeline:
    user_id: str
    group: int
    cells: np.ndarray  # full, no gaps
    schedule: GroupSchedule = field(repr=False)


def _weekly_pattern(
    grid: TimeGrid, home: int, work: int, leisure: Sequence[int], rotate_sunday: bool
) -> np.ndarray:
    """Home at night, work on weekday daytimes, leisure blocks on weekends.

    With ``rotate_sunday``, Sunday walks through the same leisure cells in
    a shifted order, so weekend hours are ambiguous for statistics pooling
    the two days but exact for week-specific ones (and for the group's
    other members, which is what community ablations exercise).
    """
    pattern = np.empty(grid.slots_per_week, dtype=np.int32)
    n_blocks = len(leisure)
    day_hours = list(range(DAY_START_HOUR, NIGHT_START_HOUR))  # centers 08..21
    for k in range(grid.slots_per_week):
        d, h = k // grid.slots_per_day, k % grid.slots_per_day
        hour = h * grid.resolution_hours
        if hour >= NIGHT_START_HOUR or hour < DAY_START_HOUR:
            pattern[k] = home
        elif d < 5:
            pattern[k] = work
        else:
            block = min(day_hours.index(hour) * n_blocks // len(day_hours), n_blocks - 1)
            if d == 6 and rotate_sunday:
                block = (block + 1) % n_blocks
            pattern[k] = leisure[block]
    return pattern


def build_grid(cfg: CohortConfig) -> GridSpec:
    bbox = square_bbox(GeoPoint(cfg.center_lat, cfg.center_lon), cfg.bbox_side_miles)
    return build_grid_spec(bbox, cfg.cell_size_miles)


def generate_cohort(cfg: CohortConfig) -> tuple[List[GroundTruthTimeline], GridSpec, TimeGrid]:
    """Ground-truth timelines for every user, grouped by shared schedules."""
    spec = build_grid(cfg)
    grid = TimeGrid(cfg.resolution_hours, cfg.weeks, cfg.study_start_ts)
    needed = cfg.n_groups * CELLS_PER_GROUP
    if needed > spec.n_cells:
        raise ValueError(
            f"{cfg.n_groups} groups need {needed} distinct cells, grid has {spec.n_cells}"
        )
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xC0110]))
    allocation = rng.permutation(spec.n_cells)[:needed].reshape(cfg.n_groups, CELLS_PER_GROUP)

    schedules = []
    for g in range(cfg.n_groups):
        home, work, *leisure_pool = (int(c) for c in allocation[g])
        leisure = leisure_pool[: cfg.n_leisure]
        schedules.append(GroupSchedule(
            group=g, home=home, work=work, leisure=leisure,
            week_cells=_weekly_pattern(grid, home, work, leisure, cfg.weekend_rotation),
        ))

    cohort = []
    for u in range(cfg.n_users):
        group = u % cfg.n_groups
        schedule = schedules[group]
        cells = np.tile(schedule.week_cells, cfg.weeks).astype(np.int32)
        user_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, u]))
        if cfg.epsilon > 0:
            deviate = user_rng.random(grid.n_slots) < cfg.epsilon
            cells[deviate] = user_rng.integers(0, spec.n_cells, int(deviate.sum()))
        cohort.append(GroundTruthTimeline(
            user_id=f"u{u:04d}", group=group, cells=cells, schedule=schedule,
        ))
    return cohort, spec, grid


class _SpotPicker:
    """Per-(user, cell) favorite spot with per-event GPS-style scatter.

    Positions never leave the true cell, so recovery on the generating
    grid stays exact; regridding at finer cell sizes sees a realistic
    spread over sub-cells instead of a single point.
    """

    _MARGIN = 0.05  # keep anchors (and clamped events) off the cell edges

    def __init__(self, spec: GridSpec, sigma_miles: float, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng
        self.sigma_lat = sigma_miles / MILES_PER_DEG_LAT
        self.sigma_lon = sigma_miles / spec.miles_per_deg_lon
        self._anchors: dict[int, tuple[float, float]] = {}

    def point_in(self, cell: int) -> GeoPoint:
        lat0, lon0, lat1, lon1 = cell_bounds(self.spec, cell)
        anchor = self._anchors.get(cell)
        if anchor is None:
            u, v = self.rng.uniform(self._MARGIN, 1.0 - self._MARGIN, 2)
            anchor = (lat0 + u * (lat1 - lat0), lon0 + v * (lon1 - lon0))
            self._anchors[cell] = anchor
        lat = anchor[0] + self.rng.normal(0.0, self.sigma_lat)
        lon = anchor[1] + self.rng.normal(0.0, self.sigma_lon)
        pad_lat = self._MARGIN * 0.5 * (lat1 - lat0)
        pad_lon = self._MARGIN * 0.5 * (lon1 - lon0)
        return GeoPoint(
            float(np.clip(lat, lat0 + pad_lat, lat1 - pad_lat)),
            float(np.clip(lon, lon0 + pad_lon, lon1 - pad_lon)),
        )


def sparsify(
    gt: GroundTruthTimeline,
    cfg: CohortConfig,
    spec: GridSpec,
    grid: TimeGrid,
    keep_rate: Optional[float] = None,
) -> List[RawEvent]:
    """Observed events: one per kept slot, timed at the slot center.

    With ``force_inclusion``, every daytime slot-of-day that ended up with
    no kept slot gets exactly one forced observation, so the user passes
    the inclusion criteria regardless of the keep rate.
    """
    keep = cfg.keep_rate if keep_rate is None else keep_rate
    rng = np.random.default_rng(
        np.random.SeedSequence([cfg.seed, 2, zlib.crc32(gt.user_id.encode())])
    )
    kept = rng.random(grid.n_slots) < keep
    if cfg.force_inclusion:
        kept_h = set(np.unique(grid.h_of[kept]).tolist())
        for h in grid.daytime_hours:
            if h not in kept_h:
                slots = np.nonzero(grid.h_of == h)[0]
                kept[int(rng.choice(slots))] = True

    spots = _SpotPicker(spec, cfg.gps_sigma_miles, rng)
    events = []
    for q in np.nonzero(kept)[0].tolist():
        point = spots.point_in(int(gt.cells[q]))
        events.append(RawEvent(gt.user_id, grid.slot_center_ts(q), point))
    return events


def make_cohort_events(
    cfg: CohortConfig,
) -> tuple[Dict[str, List[RawEvent]], List[GroundTruthTimeline], GridSpec, TimeGrid]:
    """Generate and sparsify a whole cohort in one call."""
    cohort, spec, grid = generate_cohort(cfg)
    events = {gt.user_id: sparsify(gt, cfg, spec, grid) for gt in cohort}
    return events, cohort, spec, grid


def events_to_csv_lines(events: Sequence[RawEvent]) -> List[str]:
    lines = []
    for e in events:
        ts = datetime.fromtimestamp(e.ts, tz=timezone.utc).isoformat().replace("+00:00", "Z")
        lines.append(f"{e.user_id},{ts},{e.point.lat:.6f},{e.point.lon:.6f}")
    return lines
