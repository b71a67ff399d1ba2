"""Collaborative point-of-interest recommendation baseline.

Scores candidate cells by mixing a geographic term with a community term:
the geographic term follows a power law over the distance from the user's
nearest observed cell, fitted on the pooled distances between successive
assigned cells across the cohort; the community term is the similarity
weighted vote of the most similar users.
"""

from __future__ import annotations

import math
from typing import Dict, Optional, Tuple

import numpy as np

from ..geo import cell_distance_miles
from ..probability import community_prob, normalize, top_k
from ..timeline import EMPTY
from .base import Candidates, Cohort, TimelinePredictor
from .ilc import _anchor_distances

DEGENERATE_PARAMS = (1.0, -1.0)


def fit_power_law(distances: np.ndarray, n_bins: int = 12) -> Tuple[float, float]:
    """Least-squares fit of ``w = a * d**b`` on log-binned distances.

    ``distances`` are pooled consecutive-step distances in miles; zero
    distances carry no information about the decay and are dropped.  With
    fewer than two populated bins the fit is degenerate and the default
    ``(a, b) = (1, -1)`` is returned.
    """
    d = np.asarray(distances, dtype=float)
    d = d[d > 0]
    if d.size < 2 or np.isclose(d.min(), d.max()):
        return DEGENERATE_PARAMS
    edges = np.geomspace(d.min(), d.max() * (1 + 1e-12), n_bins + 1)
    counts, _ = np.histogram(d, bins=edges)
    widths = np.diff(edges)
    centers = np.sqrt(edges[:-1] * edges[1:])
    populated = counts > 0
    if populated.sum() < 2:
        return DEGENERATE_PARAMS
    density = counts[populated] / (d.size * widths[populated])
    slope, intercept = np.polyfit(np.log(centers[populated]), np.log(density), 1)
    return float(math.exp(intercept)), float(slope)


class PoiRecommendationModel(TimelinePredictor):
    """Distance power law blended with similar users' locations.

    Parameters
    ----------
    gamma : float
        Weight of the geographic term against the community term.
    neighbor_count : int
        How many most-similar users vote and contribute candidate cells.
    n_bins : int
        Log-spaced histogram bins for the power-law fit.
    top_k : int
        Ranked candidates kept per slot.
    """

    def __init__(self, gamma: float = 0.5, neighbor_count: int = 50,
                 n_bins: int = 12, top_k: int = 3):
        self.gamma = gamma
        self.neighbor_count = neighbor_count
        self.n_bins = n_bins
        self.top_k = top_k

    def fit(self, cohort: Cohort, y=None) -> "PoiRecommendationModel":
        if cohort.spec is None:
            raise ValueError("POI model needs a cohort built with a spatial GridSpec")
        self.cohort_ = cohort
        pooled = []
        for tl in cohort.timelines:
            seq = tl.cells[tl.assigned]
            if seq.size >= 2:
                for c1, c2 in zip(seq[:-1].tolist(), seq[1:].tolist()):
                    pooled.append(cell_distance_miles(cohort.spec, c1, c2))
        self.power_law_ = fit_power_law(np.asarray(pooled), self.n_bins)
        self.visited_ = {
            tl.user_id: set(np.unique(tl.cells[tl.assigned]).tolist())
            for tl in cohort.timelines
        }
        return self

    def _geographic_scores(self, cohort: Cohort, anchor: int, candidates) -> dict:
        a, b = self.power_law_
        min_d = cohort.spec.cell_size_miles / 2.0  # clamp: the anchor cell itself
        scores = {}
        for cell in candidates:
            d = max(cell_distance_miles(cohort.spec, anchor, cell), min_d)
            scores[cell] = a * d ** b
        return normalize(scores)

    def _predict_user(self, cohort: Cohort, user_id: str, qs: np.ndarray) -> Dict[int, Candidates]:
        tl = cohort.timeline(user_id)
        user_idx = cohort.index_of[user_id]
        neighbor_lists = {
            weekend: cohort.neighbors.top_m(user_idx, self.neighbor_count, weekend)
            if self.neighbor_count > 0 else []
            for weekend in (False, True)
        }
        candidates = set(self.visited_[user_id])
        for weekend in (False, True):
            for idx, _ in neighbor_lists[weekend]:
                candidates |= self.visited_[cohort.user_ids[idx]]
        candidates.discard(EMPTY)

        dist_left, dist_right = _anchor_distances(tl.assigned)
        n = tl.cells.size
        geo_cache: dict = {}  # one user's anchors recur across many slots
        out: Dict[int, Candidates] = {}
        for q in qs.tolist():
            anchor = self._nearest_anchor(tl.cells, dist_left, dist_right, q, n)
            p_com = community_prob(q, neighbor_lists[bool(cohort.grid.is_weekend[q])],
                                   cohort.matrix)
            scores: dict = {}
            if anchor is not None and candidates:
                geo = geo_cache.get(anchor)
                if geo is None:
                    geo = self._geographic_scores(cohort, anchor, candidates)
                    geo_cache[anchor] = geo
                for cell, s in geo.items():
                    scores[cell] = scores.get(cell, 0.0) + self.gamma * s
            if p_com:
                for cell, s in p_com.items():
                    scores[cell] = scores.get(cell, 0.0) + (1.0 - self.gamma) * s
            if scores:
                out[q] = [(int(c), float(s)) for c, s in top_k(scores, self.top_k)]
        return out

    @staticmethod
    def _nearest_anchor(cells: np.ndarray, dist_left: np.ndarray,
                        dist_right: np.ndarray, q: int, n: int) -> Optional[int]:
        # Equidistant anchors resolve to the earlier slot.
        dl, dr = int(dist_left[q]), int(dist_right[q])
        if dl >= n and dr >= n:
            return None
        if dl <= dr:
            return int(cells[q - dl])
        return int(cells[q + dr])
