"""End-to-end orchestration shared by the CLI and the test harness."""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .evaluation import (
    EvalReport,
    SplitMask,
    build_beta_table,
    evaluate,
    make_split,
    tune_alpha,
)
from .geo import GridSpec
from .ingest import AccountVerdict, RawEvent, filter_spoofed_accounts
from .models import MODEL_REGISTRY, Cohort
from .models.ilc import IntermediateLocationModel
from .timeline import AssignedTimeline, TimeGrid, daytime_empty_fraction, inclusion_check, preprocess_user


@dataclass
class PreprocessResult:
    timelines: List[AssignedTimeline]          # included users only
    verdicts: List[AccountVerdict]
    excluded_by_list: List[str]
    excluded_by_inclusion: List[str]
    dropped_events: int
    summary: dict = field(default_factory=dict)


def preprocess_cohort(
    events_by_user: Dict[str, List[RawEvent]],
    spec: GridSpec,
    grid: TimeGrid,
    exclude_ids: Sequence[str] = (),
) -> PreprocessResult:
    """Spoofed-account filtering, timeline assembly, inclusion criteria."""
    from .ingest import apply_exclusion_list

    events_by_user, removed_listed = apply_exclusion_list(events_by_user, exclude_ids)
    retained, verdicts = filter_spoofed_accounts(events_by_user)

    timelines: List[AssignedTimeline] = []
    excluded_inclusion: List[str] = []
    dropped = 0
    for uid in sorted(retained):
        tl, _, n_dropped = preprocess_user(uid, retained[uid], spec, grid)
        dropped += n_dropped
        if inclusion_check(tl):
            timelines.append(tl)
        else:
            excluded_inclusion.append(uid)

    summary = {
        "total_accounts": len(events_by_user) + len(removed_listed),
        "excluded_listed": len(removed_listed),
        "excluded_spoofed": sum(v.excluded for v in verdicts),
        "excluded_inclusion": len(excluded_inclusion),
        "included_users": len(timelines),
        "events_outside_grid_or_window": dropped,
        "mean_daytime_empty_fraction": (
            float(np.mean([daytime_empty_fraction(tl) for tl in timelines]))
            if timelines else None
        ),
    }
    return PreprocessResult(
        timelines=timelines,
        verdicts=verdicts,
        excluded_by_list=removed_listed,
        excluded_by_inclusion=excluded_inclusion,
        dropped_events=dropped,
        summary=summary,
    )


@dataclass
class RunResult:
    reports: Dict[str, EvalReport]
    predictions: dict
    split: SplitMask
    alpha: float
    beta_table: Optional[dict]


def _predict_chunk(args):
    model, user_ids, test_slots = args
    return model.predict(user_ids=user_ids, slots=test_slots)


def _predict_parallel(model, cohort: Cohort, test_slots: dict, jobs: int) -> dict:
    """Fan the per-user predictions out over forked workers."""
    chunks = np.array_split(np.array(cohort.user_ids, dtype=object), jobs)
    payloads = [(model, chunk.tolist(), test_slots) for chunk in chunks if chunk.size]
    ctx = multiprocessing.get_context("fork")
    merged: dict = {}
    with ctx.Pool(processes=jobs) as pool:
        for part in pool.imap_unordered(_predict_chunk, payloads):
            merged.update(part)
    return merged


def run_models(
    timelines: Sequence[AssignedTimeline],
    spec: GridSpec,
    models: Sequence[str] = ("ilc",),
    seed: int = 0,
    split_ratio: float = 0.7,
    alpha: Optional[float] = 0.1,
    neighbor_count: int = 50,
    top_k: int = 3,
    tune_beta: bool = True,
    gamma: float = 0.5,
    jobs: int = 1,
) -> RunResult:
    """Split, tune, fit every requested model, and score the test slots.

    ``alpha=None`` triggers the grid search on a held-out share of the
    training slots; otherwise the given constant is used directly.
    """
    unknown = [m for m in models if m not in MODEL_REGISTRY]
    if unknown:
        raise ValueError(f"unknown models: {unknown}; choose from {sorted(MODEL_REGISTRY)}")

    split = make_split(timelines, ratio=split_ratio, seed=seed)
    cohort = Cohort.from_split(timelines, split, spec=spec)
    test_slots = {uid: np.nonzero(mask)[0] for uid, mask in split.items()}

    if alpha is None:
        alpha = tune_alpha(cohort.timelines, seed=seed, spec=spec)

    beta_table = beta_fallback = None
    if tune_beta and "ilc" in models and neighbor_count > 0:
        beta_table, beta_fallback = build_beta_table(
            cohort, alpha=alpha, neighbor_count=neighbor_count
        )

    reports: Dict[str, EvalReport] = {}
    predictions: dict = {}
    for name in models:
        cls = MODEL_REGISTRY[name]
        if cls is IntermediateLocationModel:
            model = cls(alpha=alpha, neighbor_count=neighbor_count, top_k=top_k,
                        beta_table=beta_table, beta_fallback=beta_fallback)
        elif name == "poi":
            model = cls(gamma=gamma, neighbor_count=neighbor_count, top_k=top_k)
        else:
            model = cls()
        model.fit(cohort)
        if jobs > 1:
            preds = _predict_parallel(model, cohort, test_slots, jobs)
        else:
            preds = model.predict(slots=test_slots)
        predictions[name] = preds
        reports[name] = evaluate(preds, list(timelines), split, model=name, top_n=top_k)
    return RunResult(reports=reports, predictions=predictions, split=split,
                     alpha=alpha, beta_table=beta_table)
