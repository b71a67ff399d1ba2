import numpy as np
import pytest

from locfill.geo import GeoPoint, build_grid_spec, square_bbox
from locfill.timeline import AssignedTimeline, Provenance, TimeGrid

CITY_CENTER = GeoPoint(40.754, -73.984)


@pytest.fixture(scope="session")
def city_spec():
    """29x29 mile box at 1-mile cells: 841 cells."""
    return build_grid_spec(square_bbox(CITY_CENTER, 29.0), 1.0)


@pytest.fixture()
def week_grid():
    """Two weeks at 1-hour resolution, study start at epoch 0 (a Thursday
    by the calendar, but the grid only cares that slot 0 is its Monday)."""
    return TimeGrid(resolution_hours=1, weeks=2, study_start_ts=0)


def make_timeline(grid, user_id="u", slots=None):
    """Timeline with ``slots`` = {q: cell} marked as observed."""
    tl = AssignedTimeline.empty(user_id, grid)
    for q, cell in (slots or {}).items():
        tl.set_slot(q, cell, Provenance.OBSERVED)
    return tl


def weekly_timeline(grid, user_id, week_pattern, weeks=None):
    """Observed timeline repeating ``week_pattern`` (k -> cell) weekly."""
    tl = AssignedTimeline.empty(user_id, grid)
    weeks = range(grid.weeks) if weeks is None else weeks
    for w in weeks:
        for k, cell in week_pattern.items():
            tl.set_slot(w * grid.slots_per_week + k, cell, Provenance.OBSERVED)
    return tl


def rng_timeline(grid, user_id, density, n_cells, seed):
    rng = np.random.default_rng(seed)
    tl = AssignedTimeline.empty(user_id, grid)
    mask = rng.random(grid.n_slots) < density
    cells = rng.integers(0, n_cells, grid.n_slots)
    tl.cells[mask] = cells[mask]
    tl.provenance[mask] = Provenance.OBSERVED
    return tl
