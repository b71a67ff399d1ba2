"""Intermediate location computing: gap filling with discounted conditionals.

The model runs, per user and per stratum, a forward pass that fills every
gap left-to-right from next-location conditionals (falling back to the
marginal list) and a mirrored backward pass using previous-location
conditionals.  The pass values stand in as conditioning anchors wherever
the real timeline is missing.  The final prediction at a gap slot combines,
for each stratum, the two conditional lists discounted by an information
loss factor ``(1 - alpha)^(n-1)`` (``n`` = distance to the nearest truly
assigned slot on that side) with the marginal list, averages the strata,
and blends in the community vote of the top-``m`` most similar users.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..probability import (
    ALL_STRATA,
    ProbList,
    Strata,
    argmax_cell,
    blend,
    combine_individual,
    combine_strata,
    community_prob,
    top_k,
)
from ..timeline import EMPTY, TimeGrid
from .base import Candidates, Cohort, TimelinePredictor

GIVEN_DATA = "GivenData"
PREDICTED = "Predicted"
UNFILLED = "Unfilled"


def information_loss(n_steps: int, alpha: float) -> float:
    """Discount for a conditional anchored ``n_steps`` slots away."""
    if n_steps < 1:
        raise ValueError(f"need n >= 1, got {n_steps}")
    return (1.0 - alpha) ** (n_steps - 1)


def inter(primary: ProbList, fallback: ProbList) -> Optional[int]:
    """Most probable cell of ``primary``, else of ``fallback``, else None."""
    cell = argmax_cell(primary)
    if cell is not None:
        return cell
    return argmax_cell(fallback)


def _anchor_distances(assigned: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distance from each slot to the nearest assigned slot on either side.

    Zero distance marks assigned slots themselves; sides with no anchor at
    all hold ``n_slots`` (an impossible distance, treated as infinite).
    """
    n = assigned.size
    left = np.full(n, n, dtype=np.int64)
    idx = np.nonzero(assigned)[0]
    if idx.size:
        pos = np.full(n, -1, dtype=np.int64)
        pos[idx] = idx
        pos = np.maximum.accumulate(pos)
        has = pos >= 0
        left[has] = np.arange(n)[has] - pos[has]
        right = np.full(n, n, dtype=np.int64)
        rpos = np.full(n, 2 * n, dtype=np.int64)
        rpos[idx] = idx
        rpos = np.minimum.accumulate(rpos[::-1])[::-1]
        has = rpos < 2 * n
        right[has] = rpos[has] - np.arange(n)[has]
    else:
        right = left.copy()
    return left, right


@dataclass
class CompletedTimeline:
    """Full per-slot output of one user's completion."""

    user_id: str
    cells: np.ndarray                 # predicted or echoed cell, EMPTY if unfilled
    source: List[str]                 # GIVEN_DATA / PREDICTED / UNFILLED per slot
    candidates: Dict[int, Candidates] = field(default_factory=dict)

    def unfilled_slots(self) -> np.ndarray:
        return np.nonzero(self.cells == EMPTY)[0]


class IntermediateLocationModel(TimelinePredictor):
    """Timeline completion by intermediate location computing.

    Parameters
    ----------
    alpha : float
        Constant per-step information loss in [0, 1).
    neighbor_count : int
        ``m``, how many most-similar users feed the community vote.
    top_k : int
        Number of ranked candidates kept per predicted slot.
    beta : float
        Default community blend weight for (user, slot-of-week) pairs not
        covered by ``beta_table`` or ``beta_fallback``.
    beta_table : dict, optional
        Tuned weights keyed by ``(user_id, k)``.
    beta_fallback : dict, optional
        Cohort-average weights keyed by ``(weekend, h)``, consulted for
        users with no tuned value at a ``k``.
    """

    def __init__(
        self,
        alpha: float = 0.1,
        neighbor_count: int = 50,
        top_k: int = 3,
        beta: float = 0.5,
        beta_table: Optional[dict] = None,
        beta_fallback: Optional[dict] = None,
    ):
        self.alpha = alpha
        self.neighbor_count = neighbor_count
        self.top_k = top_k
        self.beta = beta
        self.beta_table = beta_table
        self.beta_fallback = beta_fallback

    def fit(self, cohort: Cohort, y=None) -> "IntermediateLocationModel":
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")
        self.cohort_ = cohort
        if self.neighbor_count > 0:
            cohort.neighbors  # build the similarity ranking eagerly
        return self

    # -- passes -------------------------------------------------------------

    def _forward_pass(self, tables, cells: np.ndarray, stratum: Strata) -> np.ndarray:
        """Fill gaps left-to-right; predictions anchor the following steps."""
        out = cells.copy()
        nxt = tables.next[stratum]
        ind = tables.indep[stratum]
        key_at = tables.time_key
        prev_val = EMPTY
        for q in range(out.size):
            val = out[q]
            if val == EMPTY:
                counts = nxt.get((key_at(stratum, q - 1), int(prev_val))) if q > 0 and prev_val != EMPTY else None
                if not counts:
                    counts = ind.get(key_at(stratum, q))
                if counts:
                    val = min(counts, key=lambda c: (-counts[c], c))
                    out[q] = val
            prev_val = val
        return out

    def _backward_pass(self, tables, cells: np.ndarray, stratum: Strata) -> np.ndarray:
        """Mirror of the forward pass, scanning right-to-left."""
        out = cells.copy()
        prv = tables.prev[stratum]
        ind = tables.indep[stratum]
        key_at = tables.time_key
        n = out.size
        next_val = EMPTY
        for q in range(n - 1, -1, -1):
            val = out[q]
            if val == EMPTY:
                counts = prv.get((key_at(stratum, q), int(next_val))) if q < n - 1 and next_val != EMPTY else None
                if not counts:
                    counts = ind.get(key_at(stratum, q))
                if counts:
                    val = min(counts, key=lambda c: (-counts[c], c))
                    out[q] = val
            next_val = val
        return out

    # -- final combination ----------------------------------------------------

    def _beta_for(self, user_id: str, q: int, grid: TimeGrid) -> float:
        k = int(grid.k_of[q])
        if self.beta_table is not None:
            value = self.beta_table.get((user_id, k))
            if value is not None:
                return value
        if self.beta_fallback is not None:
            value = self.beta_fallback.get((bool(grid.is_weekend[q]), int(grid.h_of[q])))
            if value is not None:
                return value
        return self.beta

    def individual_prob(
        self,
        tables,
        cells: np.ndarray,
        passes: dict,
        dist_left: np.ndarray,
        dist_right: np.ndarray,
        q: int,
    ) -> ProbList:
        """P_I at slot ``q``: strata-averaged discounted combination."""
        n = cells.size
        has_left = dist_left[q] < n if q > 0 else False
        has_right = dist_right[q] < n if q < n - 1 else False
        lam_a = information_loss(int(dist_left[q]), self.alpha) if has_left else 0.0
        lam_b = information_loss(int(dist_right[q]), self.alpha) if has_right else 0.0

        per_stratum = []
        for stratum in ALL_STRATA:
            fwd, bwd = passes[stratum]
            pa: ProbList = {}
            pb: ProbList = {}
            if has_left:
                anchor = cells[q - 1] if cells[q - 1] != EMPTY else fwd[q - 1]
                pa = tables.next_prob(stratum, q, int(anchor))
            if has_right:
                anchor = cells[q + 1] if cells[q + 1] != EMPTY else bwd[q + 1]
                pb = tables.prev_prob(stratum, q, int(anchor))
            pc = tables.indep_prob(stratum, q)
            per_stratum.append(combine_individual(pa, pb, pc, lam_a, lam_b))
        return combine_strata(*per_stratum)

    def complete(self, user_id: str) -> CompletedTimeline:
        """Run the full completion for one user over every empty slot."""
        cohort = self._check_fitted()
        tl = cohort.timeline(user_id)
        targets = np.nonzero(~tl.assigned)[0]
        return self._complete_slots(cohort, user_id, targets)

    def _predict_user(self, cohort: Cohort, user_id: str, qs: np.ndarray) -> Dict[int, Candidates]:
        return self._complete_slots(cohort, user_id, qs).candidates

    def _complete_slots(
        self, cohort: Cohort, user_id: str, targets: np.ndarray
    ) -> CompletedTimeline:
        grid = cohort.grid
        tl = cohort.timeline(user_id)
        tables = cohort.tables(user_id)
        cells = tl.cells
        dist_left, dist_right = _anchor_distances(tl.assigned)
        passes = {
            s: (self._forward_pass(tables, cells, s), self._backward_pass(tables, cells, s))
            for s in ALL_STRATA
        }

        m = self.neighbor_count
        user_idx = cohort.index_of[user_id]
        neighbor_lists = {
            weekend: cohort.neighbors.top_m(user_idx, m, weekend) if m > 0 else []
            for weekend in (False, True)
        }

        out_cells = cells.copy()
        source = [GIVEN_DATA if cells[q] != EMPTY else UNFILLED for q in range(grid.n_slots)]
        candidates: Dict[int, Candidates] = {}
        homes = cohort.homes(user_id)
        modal = cohort.modal_cell(user_id)

        for q in targets.tolist():
            if cells[q] != EMPTY:
                continue
            p_ind = self.individual_prob(tables, cells, passes, dist_left, dist_right, q)
            p_com = community_prob(q, neighbor_lists[bool(grid.is_weekend[q])], cohort.matrix)
            final = blend(p_ind, p_com, self._beta_for(user_id, q, grid))
            if final:
                ranked = top_k(final, self.top_k)
            else:
                fallback = homes.home_for(int(grid.d_of[q]))
                if fallback is None:
                    fallback = modal
                ranked = [(int(fallback), 0.0)] if fallback is not None else []
            if ranked:
                out_cells[q] = ranked[0][0]
                source[q] = PREDICTED
                candidates[q] = [(int(c), float(s)) for c, s in ranked]
        return CompletedTimeline(user_id, out_cells, source, candidates)
