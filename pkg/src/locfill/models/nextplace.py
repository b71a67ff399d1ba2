"""Nonlinear visit-timing baseline built on delay embedding.

Treats each (user, cell) pair as a time series of visit start slots,
embeds it with three delayed copies, and predicts the single next visit to
that cell by averaging how far ahead the successors of the nearest
embedded points lay.  Only the predicted visit's slots are filled, which
keeps coverage deliberately low on sparse data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from ..timeline import EMPTY, AssignedTimeline
from .base import Candidates, Cohort, TimelinePredictor

EMBED_DIM = 3


@dataclass(frozen=True)
class Visit:
    start: int      # slot index
    duration: int   # in slots, >= 1


def extract_visits(tl: AssignedTimeline) -> Dict[int, List[Visit]]:
    """Maximal runs of consecutive same-cell assigned slots, per cell.

    A lone assigned slot is a visit of one slot (one resolution unit).
    """
    visits: Dict[int, List[Visit]] = {}
    cells = tl.cells
    q = 0
    n = cells.size
    while q < n:
        cell = int(cells[q])
        if cell == EMPTY:
            q += 1
            continue
        start = q
        while q + 1 < n and cells[q + 1] == cell:
            q += 1
        visits.setdefault(cell, []).append(Visit(start=start, duration=q - start + 1))
        q += 1
    return visits


def delay_embed(starts: np.ndarray, dim: int = EMBED_DIM, delay: int = 1) -> np.ndarray:
    """Vectors of ``dim`` successive (delayed) start times, oldest last."""
    n = starts.size - (dim - 1) * delay
    if n <= 0:
        return np.empty((0, dim))
    cols = [starts[(dim - 1 - j) * delay: (dim - 1 - j) * delay + n] for j in range(dim)]
    return np.column_stack(cols).astype(float)


class NextPlaceModel(TimelinePredictor):
    """Average-of-nearest-neighbors prediction of the next visit per cell.

    Parameters
    ----------
    n_neighbors : int
        Embedded points averaged for the prediction.
    """

    def __init__(self, n_neighbors: int = 2):
        self.n_neighbors = n_neighbors

    def fit(self, cohort: Cohort, y=None) -> "NextPlaceModel":
        self.cohort_ = cohort
        self.visits_ = {tl.user_id: extract_visits(tl) for tl in cohort.timelines}
        return self

    def _predict_cell_visit(self, visits: List[Visit]) -> Tuple[int, int] | None:
        """(start, duration) of the predicted next visit, or None.

        Needs at least ``EMBED_DIM + 1`` visits: the latest embedded vector
        plus one earlier vector that still has a successor visit.
        """
        if len(visits) < EMBED_DIM + 1:
            return None
        starts = np.array([v.start for v in visits], dtype=np.int64)
        vectors = delay_embed(starts)
        latest = vectors[-1]
        history = vectors[:-1]  # vector i ends at visit i + EMBED_DIM - 1
        dists = np.linalg.norm(history - latest, axis=1)
        order = np.argsort(dists, kind="stable")[: max(1, self.n_neighbors)]
        gaps, durations = [], []
        for i in order.tolist():
            end_visit = i + EMBED_DIM - 1
            gaps.append(starts[end_visit + 1] - starts[end_visit])
            durations.append(visits[end_visit + 1].duration)
        start = int(starts[-1] + round(float(np.mean(gaps))))
        duration = max(1, int(round(float(np.mean(durations)))))
        return start, duration

    def _predict_user(self, cohort: Cohort, user_id: str, qs: np.ndarray) -> Dict[int, Candidates]:
        visits_by_cell = self.visits_[user_id]
        n = cohort.grid.n_slots
        # cell -> claimed slots; conflicts go to the richer visit history,
        # then the smaller cell index.
        claims: Dict[int, Tuple[int, int]] = {}  # slot -> (history size, cell)
        for cell, visits in visits_by_cell.items():
            predicted = self._predict_cell_visit(visits)
            if predicted is None:
                continue
            start, duration = predicted
            strength = (len(visits), -cell)
            for q in range(max(0, start), min(n, start + duration)):
                held = claims.get(q)
                if held is None or strength > (held[0], -held[1]):
                    claims[q] = (len(visits), cell)
        wanted = set(qs.tolist())
        original = cohort.timeline(user_id).cells
        return {
            q: [(cell, 1.0)]
            for q, (_, cell) in claims.items()
            if q in wanted and original[q] == EMPTY
        }
