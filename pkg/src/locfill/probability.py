"""Stratified visit statistics and the probability lists built from them.

All predictors trade in one currency: a *probability list*, a sparse dict
mapping grid cell to non-negative weight.  Conditional and marginal lists
come out of per-user count tables kept at three stratifications:

* ``WS`` week-specific, keyed by slot-of-week ``k``,
* ``RS`` day-type-specific, keyed by (slot-of-day ``h``, weekday/weekend),
* ``HS`` hour-specific, keyed by ``h`` alone.

Transition counts are accumulated once per adjacent pair of assigned slots
and keyed by the earlier slot's time, so the next- and previous-location
tables are exact mirrors.  Conditional lists are normalized over the
observed successors (or predecessors) of the conditioning cell, making
each a proper distribution whenever it is non-empty.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from enum import Enum
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from .timeline import EMPTY, AssignedTimeline, TimeGrid

ProbList = Dict[int, float]

WEIGHT_TOLERANCE = 1e-9


class Strata(Enum):
    WS = "week_specific"
    RS = "daytype_specific"
    HS = "hour_specific"


ALL_STRATA = (Strata.WS, Strata.RS, Strata.HS)


# ---------------------------------------------------------------------------
# Probability-list algebra


def normalize(plist: ProbList) -> ProbList:
    total = sum(plist.values())
    if total <= 0:
        return {}
    return {cell: w / total for cell, w in plist.items()}


def argmax_cell(plist: ProbList) -> Optional[int]:
    """Heaviest cell, ties to the smaller index; None when empty."""
    if not plist:
        return None
    return min(plist, key=lambda c: (-plist[c], c))


def top_k(plist: ProbList, k: int) -> list[tuple[int, float]]:
    """The ``k`` heaviest (cell, weight) pairs, ties to the smaller index."""
    ranked = sorted(plist.items(), key=lambda it: (-it[1], it[0]))
    return ranked[:k]


def add_scaled(acc: ProbList, plist: ProbList, factor: float) -> None:
    if factor == 0.0 or not plist:
        return
    for cell, w in plist.items():
        acc[cell] = acc.get(cell, 0.0) + factor * w


def combine_individual(
    pa: ProbList, pb: ProbList, pc: ProbList, lambda_a: float, lambda_b: float
) -> ProbList:
    """One stratum's individual list: (λa·Pa + λb·Pb + Pc) / 3.

    The result is sub-normalized by design: the λ factors discount
    conditionals anchored on far-away slots, and empty inputs contribute
    nothing.
    """
    acc: ProbList = {}
    add_scaled(acc, pa, lambda_a / 3.0)
    add_scaled(acc, pb, lambda_b / 3.0)
    add_scaled(acc, pc, 1.0 / 3.0)
    return acc


def combine_strata(p_ws: ProbList, p_rs: ProbList, p_hs: ProbList) -> ProbList:
    """Entrywise mean of the three stratum lists (missing entries are 0)."""
    acc: ProbList = {}
    for plist in (p_ws, p_rs, p_hs):
        add_scaled(acc, plist, 1.0 / 3.0)
    return acc


def blend(p_ind: ProbList, p_com: ProbList, beta: float) -> ProbList:
    """(1-β)·individual + β·community, degrading gracefully on empties."""
    if not p_com:
        return dict(p_ind)
    if not p_ind:
        return dict(p_com)
    acc: ProbList = {}
    add_scaled(acc, p_ind, 1.0 - beta)
    add_scaled(acc, p_com, beta)
    return acc


# ---------------------------------------------------------------------------
# Per-user behavior tables


class BehaviorTables:
    """Visit and transition counts for one user's training timeline."""

    def __init__(self, tl: AssignedTimeline):
        grid = tl.grid
        self.user_id = tl.user_id
        self.grid = grid

        # stratum -> key -> Counter(cell)
        self.indep = {s: defaultdict(Counter) for s in ALL_STRATA}
        # stratum -> (key, conditioning cell) -> Counter(cell)
        self.next = {s: defaultdict(Counter) for s in ALL_STRATA}
        self.prev = {s: defaultdict(Counter) for s in ALL_STRATA}

        cells = tl.cells
        assigned = np.nonzero(tl.assigned)[0]
        k_of, h_of, we = grid.k_of, grid.h_of, grid.is_weekend
        for q in assigned.tolist():
            c = int(cells[q])
            self.indep[Strata.WS][int(k_of[q])][c] += 1
            self.indep[Strata.RS][(int(h_of[q]), bool(we[q]))][c] += 1
            self.indep[Strata.HS][int(h_of[q])][c] += 1

        both = tl.assigned[:-1] & tl.assigned[1:]
        for q in np.nonzero(both)[0].tolist():
            i, j = int(cells[q]), int(cells[q + 1])
            ws_key, rs_key, hs_key = (
                int(k_of[q]),
                (int(h_of[q]), bool(we[q])),
                int(h_of[q]),
            )
            self.next[Strata.WS][(ws_key, i)][j] += 1
            self.next[Strata.RS][(rs_key, i)][j] += 1
            self.next[Strata.HS][(hs_key, i)][j] += 1
            self.prev[Strata.WS][(ws_key, j)][i] += 1
            self.prev[Strata.RS][(rs_key, j)][i] += 1
            self.prev[Strata.HS][(hs_key, j)][i] += 1

    # -- time keys --------------------------------------------------------

    def time_key(self, stratum: Strata, q: int):
        grid = self.grid
        if stratum is Strata.WS:
            return int(grid.k_of[q])
        if stratum is Strata.RS:
            return (int(grid.h_of[q]), bool(grid.is_weekend[q]))
        return int(grid.h_of[q])

    # -- probability lists -------------------------------------------------

    def indep_prob(self, stratum: Strata, q: int) -> ProbList:
        """Marginal visit distribution at slot ``q``'s stratum key."""
        counts = self.indep[stratum].get(self.time_key(stratum, q))
        return normalize(counts) if counts else {}

    def next_prob(self, stratum: Strata, q: int, from_cell: int) -> ProbList:
        """Distribution of slot ``q`` given ``from_cell`` at slot ``q - 1``."""
        if q <= 0 or from_cell == EMPTY:
            return {}
        counts = self.next[stratum].get((self.time_key(stratum, q - 1), from_cell))
        return normalize(counts) if counts else {}

    def prev_prob(self, stratum: Strata, q: int, to_cell: int) -> ProbList:
        """Distribution of slot ``q`` given ``to_cell`` at slot ``q + 1``."""
        if q >= self.grid.n_slots - 1 or to_cell == EMPTY:
            return {}
        counts = self.prev[stratum].get((self.time_key(stratum, q), to_cell))
        return normalize(counts) if counts else {}

    def indep_counts_at(self, stratum: Strata, q: int) -> Counter:
        return self.indep[stratum].get(self.time_key(stratum, q), Counter())


# ---------------------------------------------------------------------------
# Community behavior


def similarity(
    cells_a: np.ndarray, cells_b: np.ndarray, slot_mask: Optional[np.ndarray] = None
) -> float:
    """Share of co-assigned slots where two users sit in the same cell."""
    both = (cells_a != EMPTY) & (cells_b != EMPTY)
    if slot_mask is not None:
        both &= slot_mask
    n_both = int(both.sum())
    if n_both == 0:
        return 0.0
    return float((cells_a[both] == cells_b[both]).sum() / n_both)


class NeighborIndex:
    """Top-similarity neighbor lists per user, separate per day type.

    Built once over a cohort's training matrix; ``top_m`` slices the
    ordering for any requested ``m``.
    """

    def __init__(self, user_ids: Sequence[str], matrix: np.ndarray, grid: TimeGrid):
        self.user_ids = list(user_ids)
        self._order: dict[bool, list[list[tuple[int, float]]]] = {}
        for weekend in (False, True):
            mask = grid.is_weekend == weekend
            self._order[weekend] = self._rank_all(matrix, mask)

    def _rank_all(self, matrix: np.ndarray, slot_mask: np.ndarray):
        n = len(self.user_ids)
        sims = np.zeros((n, n))
        sub = matrix[:, slot_mask]
        assigned = sub != EMPTY
        for a in range(n):
            both = assigned[a] & assigned[a + 1:]
            eq = (sub[a] == sub[a + 1:]) & both
            n_both = both.sum(axis=1)
            with np.errstate(invalid="ignore"):
                s = np.where(n_both > 0, eq.sum(axis=1) / np.maximum(n_both, 1), 0.0)
            sims[a, a + 1:] = s
            sims[a + 1:, a] = s
        order = []
        ids = self.user_ids
        for a in range(n):
            ranked = sorted(
                (b for b in range(n) if b != a),
                key=lambda b: (-sims[a, b], ids[b]),
            )
            order.append([(b, float(sims[a, b])) for b in ranked])
        return order

    def top_m(self, user_idx: int, m: int, weekend: bool) -> list[tuple[int, float]]:
        """Up to ``m`` (user index, similarity) pairs, best first."""
        if m <= 0:
            return []
        return self._order[weekend][user_idx][:m]


def community_prob(
    q: int,
    neighbors: Iterable[tuple[int, float]],
    matrix: np.ndarray,
) -> ProbList:
    """Similarity-weighted vote over neighbors' cells at slot ``q``.

    Normalized by the total present weight; empty when no neighbor has an
    assigned slot there.
    """
    votes: ProbList = {}
    for idx, s in neighbors:
        cell = int(matrix[idx, q])
        if cell != EMPTY and s > 0:
            votes[cell] = votes.get(cell, 0.0) + s
    return normalize(votes)
