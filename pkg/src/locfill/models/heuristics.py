"""Heuristic comparison models: home/work switching and Markov predictors.

All three share the cohort's behavior tables and emit a single candidate
per slot they can fill.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from ..probability import ALL_STRATA
from ..timeline import EMPTY
from .base import Candidates, Cohort, TimelinePredictor


@dataclass(frozen=True)
class HomeWorkProfile:
    home: Optional[int]
    work: Optional[int]


def _modal(counter: Counter) -> Optional[int]:
    if not counter:
        return None
    return min(counter, key=lambda c: (-counter[c], c))


class HomeWorkModel(TimelinePredictor):
    """Two-location periodic behavior: home at night, work by day.

    Home is the modal training cell with slot centers in [22:00, 08:00),
    work the modal cell in [08:00, 22:00).  A missing side falls back to
    the other.
    """

    def fit(self, cohort: Cohort, y=None) -> "HomeWorkModel":
        self.cohort_ = cohort
        night = cohort.grid.is_night
        self.profiles_: Dict[str, HomeWorkProfile] = {}
        for tl in cohort.timelines:
            assigned = tl.assigned
            home = _modal(Counter(tl.cells[assigned & night].tolist()))
            work = _modal(Counter(tl.cells[assigned & ~night].tolist()))
            self.profiles_[tl.user_id] = HomeWorkProfile(home=home, work=work)
        return self

    def predict_slot(self, profile: HomeWorkProfile, is_night: bool) -> Optional[int]:
        first, second = (profile.home, profile.work) if is_night else (profile.work, profile.home)
        return first if first is not None else second

    def _predict_user(self, cohort: Cohort, user_id: str, qs: np.ndarray) -> Dict[int, Candidates]:
        profile = self.profiles_[user_id]
        night = cohort.grid.is_night
        out: Dict[int, Candidates] = {}
        for q in qs.tolist():
            cell = self.predict_slot(profile, bool(night[q]))
            if cell is not None:
                out[q] = [(cell, 1.0)]
        return out


class MarkovOrder0Model(TimelinePredictor):
    """Most frequent cell for the slot's time key, falling back WS→RS→HS."""

    def fit(self, cohort: Cohort, y=None) -> "MarkovOrder0Model":
        self.cohort_ = cohort
        return self

    def predict_cell(self, tables, q: int) -> Optional[int]:
        for stratum in ALL_STRATA:
            counts = tables.indep[stratum].get(tables.time_key(stratum, q))
            if counts:
                return _modal(counts)
        return None

    def _predict_user(self, cohort: Cohort, user_id: str, qs: np.ndarray) -> Dict[int, Candidates]:
        tables = cohort.tables(user_id)
        out: Dict[int, Candidates] = {}
        for q in qs.tolist():
            cell = self.predict_cell(tables, q)
            if cell is not None:
                out[q] = [(cell, 1.0)]
        return out


class MarkovOrder1Model(TimelinePredictor):
    """Iterated next-location transitions from the last known cell.

    A forward scan carries the chain: each empty slot takes the modal
    successor (WS, then RS, then HS tables) of the previous slot's value,
    whether that value was observed or itself predicted.  Where the chain
    has no predecessor or the tables hold no transition, the slot stays
    unfilled; there is no marginal fallback.
    """

    def fit(self, cohort: Cohort, y=None) -> "MarkovOrder1Model":
        self.cohort_ = cohort
        return self

    def chain(self, cohort: Cohort, user_id: str) -> np.ndarray:
        """The full forward-predicted timeline (EMPTY where unfillable)."""
        tables = cohort.tables(user_id)
        cells = cohort.timeline(user_id).cells
        out = cells.copy()
        prev = EMPTY
        for q in range(out.size):
            val = out[q]
            if val == EMPTY and q > 0 and prev != EMPTY:
                for stratum in ALL_STRATA:
                    counts = tables.next[stratum].get(
                        (tables.time_key(stratum, q - 1), int(prev))
                    )
                    if counts:
                        val = _modal(counts)
                        out[q] = val
                        break
            prev = val
        return out

    def _predict_user(self, cohort: Cohort, user_id: str, qs: np.ndarray) -> Dict[int, Candidates]:
        completed = self.chain(cohort, user_id)
        original = cohort.timeline(user_id).cells
        out: Dict[int, Candidates] = {}
        for q in qs.tolist():
            if original[q] == EMPTY and completed[q] != EMPTY:
                out[q] = [(int(completed[q]), 1.0)]
        return out
