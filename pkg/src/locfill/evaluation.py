"""Train/test splitting, parameter tuning, and the reported metrics.

The split holds out a share of each user's assigned *daytime* slots,
independently per distinct slot-of-week, reproducibly from (seed, user id).
Nighttime slots always stay in training: they are dominated by home
interpolation and would overstate every model.  Accuracy is reported over
the slots a model actually filled, with the fill rate alongside, both as
a micro average over test points and macro averaged per user.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .models.base import Cohort, Predictions
from .models.ilc import IntermediateLocationModel, _anchor_distances, information_loss
from .probability import (
    ALL_STRATA,
    blend,
    combine_individual,
    combine_strata,
    community_prob,
)
from .timeline import EMPTY, AssignedTimeline

BETA_GRID = tuple(round(0.05 * i, 2) for i in range(21))   # 0.00 .. 1.00
ALPHA_GRID = tuple(round(0.05 * i, 2) for i in range(11))  # 0.00 .. 0.50
DEFAULT_BETA = 0.5

SplitMask = Dict[str, np.ndarray]  # user -> bool array, True = held out


def _user_rng(seed: int, user_id: str, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([seed, zlib.crc32(user_id.encode()), stream])
    )


def split_timeline(
    tl: AssignedTimeline, ratio: float = 0.7, seed: int = 0, stream: int = 0
) -> np.ndarray:
    """Test mask over one user's assigned daytime slots.

    Within each distinct slot-of-week, every assigned daytime slot lands in
    the test set independently with probability ``1 - ratio``.
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    grid = tl.grid
    mask = np.zeros(grid.n_slots, dtype=bool)
    eligible = tl.assigned & grid.is_daytime
    rng = _user_rng(seed, tl.user_id, stream)
    for k in sorted(np.unique(grid.k_of[eligible]).tolist()):
        slots = np.nonzero(eligible & (grid.k_of == k))[0]
        mask[slots] = rng.random(slots.size) > ratio
    return mask


def make_split(
    timelines: Sequence[AssignedTimeline], ratio: float = 0.7, seed: int = 0
) -> SplitMask:
    return {tl.user_id: split_timeline(tl, ratio, seed) for tl in timelines}


# ---------------------------------------------------------------------------
# Parameter tuning


def _strict_anchor_distances(assigned: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distances to the nearest *other* assigned slot on each side.

    Unlike the gap-filling variant, an assigned slot does not anchor
    itself; needed when scoring self-predictions of assigned slots.
    """
    n = assigned.size
    idx = np.nonzero(assigned)[0]
    left = np.full(n, n, dtype=np.int64)
    right = np.full(n, n, dtype=np.int64)
    if idx.size:
        pos = np.full(n, -1, dtype=np.int64)
        pos[idx] = idx
        pos = np.maximum.accumulate(pos)
        has = np.zeros(n, dtype=bool)
        has[1:] = pos[:-1] >= 0
        left[has] = np.arange(n)[has] - pos[np.nonzero(has)[0] - 1]
        rpos = np.full(n, 2 * n, dtype=np.int64)
        rpos[idx] = idx
        rpos = np.minimum.accumulate(rpos[::-1])[::-1]
        has = np.zeros(n, dtype=bool)
        has[:-1] = rpos[1:] < 2 * n
        right[has] = rpos[np.nonzero(has)[0] + 1] - np.arange(n)[has]
    return left, right


def _tune_beta_detailed(
    truths: Sequence[int],
    p_inds: Sequence[dict],
    p_coms: Sequence[dict],
    grid: Iterable[float] = BETA_GRID,
) -> tuple[float, bool]:
    """Best blend weight plus whether the candidates differed at all.

    A tuning where every candidate scores the same says nothing about the
    community's value; callers aggregating cohort statistics should skip
    those.
    """
    best_beta, best_hits, worst_hits = None, -1, None
    for beta in grid:
        hits = 0
        for truth, p_ind, p_com in zip(truths, p_inds, p_coms):
            merged = blend(p_ind, p_com, beta)
            if merged:
                top = min(merged, key=lambda c: (-merged[c], c))
                hits += int(top == truth)
        if hits > best_hits:
            best_beta, best_hits = beta, hits
        worst_hits = hits if worst_hits is None else min(worst_hits, hits)
    return float(best_beta), best_hits != worst_hits


def tune_beta(
    truths: Sequence[int],
    p_inds: Sequence[dict],
    p_coms: Sequence[dict],
    grid: Iterable[float] = BETA_GRID,
) -> float:
    """Blend weight maximizing top-1 self-prediction accuracy, ties low.

    All three sequences are aligned per training slot at one slot-of-week.
    """
    return _tune_beta_detailed(truths, p_inds, p_coms, grid)[0]


def build_beta_table(
    cohort: Cohort,
    alpha: float = 0.1,
    neighbor_count: int = 50,
    daytime_only: bool = True,
) -> tuple[dict, dict]:
    """Tune the community blend per (user, slot-of-week).

    Returns the tuned table plus cohort-average fallbacks keyed by
    (weekend, slot-of-day) for users lacking data at some ``k``.
    """
    model = IntermediateLocationModel(alpha=alpha, neighbor_count=neighbor_count)
    model.fit(cohort)
    grid = cohort.grid
    table: dict = {}
    fallback_acc: dict = {}

    for uid in cohort.user_ids:
        tl = cohort.timeline(uid)
        tables = cohort.tables(uid)
        cells = tl.cells
        dist_left, dist_right = _strict_anchor_distances(tl.assigned)
        passes = {
            s: (model._forward_pass(tables, cells, s), model._backward_pass(tables, cells, s))
            for s in ALL_STRATA
        }
        user_idx = cohort.index_of[uid]
        neighbor_lists = {
            we: cohort.neighbors.top_m(user_idx, neighbor_count, we)
            if neighbor_count > 0 else []
            for we in (False, True)
        }
        scope = tl.assigned & grid.is_daytime if daytime_only else tl.assigned
        by_k: dict[int, list[int]] = {}
        for q in np.nonzero(scope)[0].tolist():
            by_k.setdefault(int(grid.k_of[q]), []).append(q)
        for k, qs in by_k.items():
            truths, p_inds, p_coms = [], [], []
            for q in qs:
                truths.append(int(cells[q]))
                p_inds.append(model.individual_prob(
                    tables, cells, passes, dist_left, dist_right, q))
                p_coms.append(community_prob(
                    q, neighbor_lists[bool(grid.is_weekend[q])], cohort.matrix))
            beta, informative = _tune_beta_detailed(truths, p_inds, p_coms)
            table[(uid, k)] = beta
            if informative:
                # All-tied tunings carry no signal; keep them out of the
                # cohort averages that back users with no data at a k.
                key = (bool(grid.is_weekend[qs[0]]), int(grid.h_of[qs[0]]))
                fallback_acc.setdefault(key, []).append(beta)

    fallback = {key: float(np.mean(vals)) for key, vals in fallback_acc.items()}
    return table, fallback


def tune_alpha(
    timelines: Sequence[AssignedTimeline],
    candidates: Iterable[float] = ALPHA_GRID,
    holdout: float = 0.1,
    seed: int = 0,
    spec=None,
) -> float:
    """Step-loss constant maximizing individual-only accuracy, ties low.

    Holds out a share of each user's training daytime slots, completes
    them with the individual component alone (no community), and scores
    top-1 accuracy per candidate.  Conditional lists are fetched once per
    slot; only the discount weights vary across candidates.
    """
    candidates = [float(a) for a in candidates]
    if not candidates:
        raise ValueError("need at least one alpha candidate")
    if len(candidates) == 1:
        return candidates[0]

    inner_masks = {
        tl.user_id: split_timeline(tl, ratio=1.0 - holdout, seed=seed, stream=1)
        for tl in timelines
    }
    cohort = Cohort.from_split(timelines, inner_masks, spec=spec)
    model = IntermediateLocationModel(alpha=candidates[0], neighbor_count=0)
    model.fit(cohort)

    hits = {a: 0 for a in candidates}
    for tl in timelines:
        holdout_slots = np.nonzero(inner_masks[tl.user_id])[0]
        if holdout_slots.size == 0:
            continue
        train_tl = cohort.timeline(tl.user_id)
        tables = cohort.tables(tl.user_id)
        cells = train_tl.cells
        dist_left, dist_right = _anchor_distances(train_tl.assigned)
        passes = {
            s: (model._forward_pass(tables, cells, s), model._backward_pass(tables, cells, s))
            for s in ALL_STRATA
        }
        n = cells.size
        for q in holdout_slots.tolist():
            truth = int(tl.cells[q])
            parts = []
            for stratum in ALL_STRATA:
                fwd, bwd = passes[stratum]
                pa: dict = {}
                pb: dict = {}
                if dist_left[q] < n:
                    anchor = cells[q - 1] if cells[q - 1] != EMPTY else fwd[q - 1]
                    pa = tables.next_prob(stratum, q, int(anchor))
                if dist_right[q] < n:
                    anchor = cells[q + 1] if cells[q + 1] != EMPTY else bwd[q + 1]
                    pb = tables.prev_prob(stratum, q, int(anchor))
                parts.append((pa, pb, tables.indep_prob(stratum, q)))
            for alpha in candidates:
                lam_a = information_loss(int(dist_left[q]), alpha) if dist_left[q] < n else 0.0
                lam_b = information_loss(int(dist_right[q]), alpha) if dist_right[q] < n else 0.0
                merged = combine_strata(
                    *[combine_individual(pa, pb, pc, lam_a, lam_b) for pa, pb, pc in parts]
                )
                if merged:
                    top = min(merged, key=lambda c: (-merged[c], c))
                    hits[alpha] += int(top == truth)

    return min(candidates, key=lambda a: (-hits[a], a))


# ---------------------------------------------------------------------------
# Metrics


@dataclass
class EvalReport:
    """Accuracy and coverage of one model over the held-out slots.

    ``top1_micro``/``top3_micro`` score only the test points the model
    filled; ``top1_effective``/``top3_effective`` additionally count every
    unfilled test point as a miss, so low-coverage models pay for their
    gaps.  Macro variants average the per-user filled-only accuracies.
    """

    model: str
    n_test_points: int
    n_predicted: int
    top1_micro: float
    top3_micro: float
    top1_macro: float
    top3_macro: float
    top1_effective: float
    top3_effective: float
    filled_pct: float
    accuracy_defined: bool
    per_user: List[dict] = field(default_factory=list)
    distinct_pairs: List[Tuple[int, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "n_test_points": self.n_test_points,
            "n_predicted": self.n_predicted,
            "top1_micro": self.top1_micro,
            "top3_micro": self.top3_micro,
            "top1_macro": self.top1_macro,
            "top3_macro": self.top3_macro,
            "top1_effective": self.top1_effective,
            "top3_effective": self.top3_effective,
            "filled_pct": self.filled_pct,
            "accuracy_defined": self.accuracy_defined,
        }


def evaluate(
    predictions: Predictions,
    truth_timelines: Sequence[AssignedTimeline],
    test_masks: SplitMask,
    model: str = "",
    top_n: int = 3,
) -> EvalReport:
    """Score ranked predictions against held-out assigned cells.

    Top-1/Top-3 accuracy is over the test points the model filled;
    ``filled_pct`` is over all test points.  A model that filled nothing
    reports zero accuracy with ``accuracy_defined=False``.
    """
    total = 0
    filled = 0
    top1_hits = 0
    top3_hits = 0
    per_user: List[dict] = []
    distinct_pairs: List[Tuple[int, float]] = []

    for tl in truth_timelines:
        mask = test_masks.get(tl.user_id)
        if mask is None:
            continue
        slots = np.nonzero(mask)[0]
        total += slots.size
        user_preds = predictions.get(tl.user_id, {})
        u_filled = u_top1 = u_top3 = 0
        for q in slots.tolist():
            ranked = user_preds.get(q)
            if not ranked:
                continue
            truth = int(tl.cells[q])
            u_filled += 1
            if ranked[0][0] == truth:
                u_top1 += 1
            if truth in [c for c, _ in ranked[:top_n]]:
                u_top3 += 1
        filled += u_filled
        top1_hits += u_top1
        top3_hits += u_top3
        user_row = {
            "user_id": tl.user_id,
            "n_test": int(slots.size),
            "n_filled": u_filled,
            "top1": 100.0 * u_top1 / u_filled if u_filled else None,
            "top3": 100.0 * u_top3 / u_filled if u_filled else None,
        }
        per_user.append(user_row)
        if u_filled:
            n_distinct = int(np.unique(tl.cells[tl.assigned]).size)
            distinct_pairs.append((n_distinct, user_row["top1"]))

    scored = [u for u in per_user if u["top1"] is not None]
    return EvalReport(
        model=model,
        n_test_points=total,
        n_predicted=filled,
        top1_micro=100.0 * top1_hits / filled if filled else 0.0,
        top3_micro=100.0 * top3_hits / filled if filled else 0.0,
        top1_macro=float(np.mean([u["top1"] for u in scored])) if scored else 0.0,
        top3_macro=float(np.mean([u["top3"] for u in scored])) if scored else 0.0,
        top1_effective=100.0 * top1_hits / total if total else 0.0,
        top3_effective=100.0 * top3_hits / total if total else 0.0,
        filled_pct=100.0 * filled / total if total else 0.0,
        accuracy_defined=filled > 0,
        per_user=per_user,
        distinct_pairs=distinct_pairs,
    )
