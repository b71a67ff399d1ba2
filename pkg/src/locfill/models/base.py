"""Shared fitting surface for all timeline predictors.

Every model is an sklearn-style estimator: construct with hyperparameters,
``fit`` on a :class:`Cohort` (the training view of a user population), then
``predict`` ranked cell candidates for missing slots.  ``get_params`` /
``set_params`` come from :class:`sklearn.base.BaseEstimator`, so the models
clone and grid-search like any other estimator.
"""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..probability import BehaviorTables, NeighborIndex
from ..timeline import EMPTY, AssignedTimeline, HomeMap, TimeGrid, infer_home

# user_id -> {slot -> ranked [(cell, score), ...]}
Candidates = List[Tuple[int, float]]
Predictions = Dict[str, Dict[int, Candidates]]


class Cohort:
    """Training view of a user population on one time grid.

    Holds the per-user timelines with any held-out slots already masked to
    empty, plus lazily built shared artifacts (behavior tables, neighbor
    rankings, home maps) so several models can fit on the same cohort
    without recomputation.
    """

    def __init__(self, timelines: Sequence[AssignedTimeline], spec=None):
        if not timelines:
            raise ValueError("cohort needs at least one timeline")
        grids = {id(tl.grid) for tl in timelines}
        if len(grids) > 1:
            raise ValueError("all timelines must share one TimeGrid")
        self.grid: TimeGrid = timelines[0].grid
        self.spec = spec  # spatial GridSpec; required only by distance-aware models
        self.timelines = list(timelines)
        self.user_ids = [tl.user_id for tl in timelines]
        self.index_of = {uid: i for i, uid in enumerate(self.user_ids)}
        self.matrix = np.stack([tl.cells for tl in timelines])

        self._tables: dict[str, BehaviorTables] = {}
        self._homes: dict[str, HomeMap] = {}
        self._neighbors: Optional[NeighborIndex] = None

    @classmethod
    def from_split(
        cls,
        timelines: Sequence[AssignedTimeline],
        test_masks: Optional[dict] = None,
        spec=None,
    ) -> "Cohort":
        """Build a training cohort, blanking each user's test slots."""
        if not test_masks:
            return cls([tl.copy() for tl in timelines], spec=spec)
        masked = []
        for tl in timelines:
            view = tl.copy()
            mask = test_masks.get(tl.user_id)
            if mask is not None:
                view.cells[mask] = EMPTY
                view.provenance[mask] = 0
            masked.append(view)
        return cls(masked, spec=spec)

    def timeline(self, user_id: str) -> AssignedTimeline:
        return self.timelines[self.index_of[user_id]]

    def tables(self, user_id: str) -> BehaviorTables:
        if user_id not in self._tables:
            self._tables[user_id] = BehaviorTables(self.timeline(user_id))
        return self._tables[user_id]

    def homes(self, user_id: str) -> HomeMap:
        if user_id not in self._homes:
            self._homes[user_id] = infer_home(self.timeline(user_id))
        return self._homes[user_id]

    def modal_cell(self, user_id: str) -> Optional[int]:
        cells = self.timeline(user_id).cells
        assigned = cells[cells != EMPTY]
        if assigned.size == 0:
            return None
        values, counts = np.unique(assigned, return_counts=True)
        best = counts.max()
        return int(values[counts == best].min())

    @property
    def neighbors(self) -> NeighborIndex:
        if self._neighbors is None:
            self._neighbors = NeighborIndex(self.user_ids, self.matrix, self.grid)
        return self._neighbors


class TimelinePredictor(BaseEstimator):
    """Base class: fit on a cohort, emit ranked candidates per empty slot."""

    def fit(self, cohort: Cohort, y=None) -> "TimelinePredictor":
        raise NotImplementedError

    def _check_fitted(self) -> Cohort:
        cohort = getattr(self, "cohort_", None)
        if cohort is None:
            raise NotFittedError(
                f"{type(self).__name__} must be fitted before calling predict"
            )
        return cohort

    def _resolve_targets(
        self, cohort: Cohort, user_ids: Optional[Sequence[str]], slots: Optional[dict]
    ) -> list[tuple[str, np.ndarray]]:
        """Per user, the slot indices to predict (default: all empty slots)."""
        ids = list(user_ids) if user_ids is not None else list(cohort.user_ids)
        targets = []
        for uid in ids:
            tl = cohort.timeline(uid)
            if slots is not None and uid in slots:
                qs = np.asarray(sorted(slots[uid]), dtype=np.int64)
            else:
                qs = np.nonzero(~tl.assigned)[0]
            targets.append((uid, qs))
        return targets

    def predict(
        self,
        user_ids: Optional[Sequence[str]] = None,
        slots: Optional[dict] = None,
    ) -> Predictions:
        """Ranked candidates for the requested (default: all empty) slots.

        Slots a model cannot fill are simply absent from its output.
        """
        cohort = self._check_fitted()
        out: Predictions = {}
        for uid, qs in self._resolve_targets(cohort, user_ids, slots):
            out[uid] = self._predict_user(cohort, uid, qs)
        return out

    def _predict_user(self, cohort: Cohort, user_id: str, qs: np.ndarray):
        raise NotImplementedError
