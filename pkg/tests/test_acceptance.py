"""Acceptance criteria for the primary component.

Each test prints one PASS/FAIL line.  Tolerances and cohort parameters are
pinned here, not tuned at runtime.  Ordering criteria that speak to the
published comparison table use the fill-penalized accuracy (unfilled test
points count as misses) alongside the raw fill rates; coverage-blind
criteria use accuracy over predicted points, which is identical for the
models that always answer.

The recurrent-network criterion (9) belongs to the companion package and
is exercised by its own test suite; nothing here depends on it.
"""

import time

import numpy as np
import pytest

from locfill.evaluation import make_split, tune_beta
from locfill.models import (
    Cohort,
    HomeWorkModel,
    IntermediateLocationModel,
    MarkovOrder0Model,
    MarkovOrder1Model,
    information_loss,
    inter,
)
from locfill.pipeline import preprocess_cohort, run_models
from locfill.probability import similarity
from locfill.synth import CohortConfig, make_cohort_events
from locfill.timeline import EMPTY, TimeGrid, preprocess_user
from locfill.ingest import GeoPoint, RawEvent, account_verdict


def report(criterion: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {criterion}: {status} {detail}")


def build_cohort(cfg: CohortConfig):
    events, gts, spec, grid = make_cohort_events(cfg)
    pre = preprocess_cohort(events, spec, grid)
    return pre.timelines, spec, grid


ALL_MODELS = ("ilc", "homework", "markov0", "markov1", "poi", "nextplace")


class TestCriterion1:
    def test_markov0_matches_brute_force_oracle(self):
        """Markov-0 equals an independent modal-frequency oracle everywhere."""
        start = time.time()
        cfg = CohortConfig(n_users=50, n_groups=10, weeks=13, seed=314)
        timelines, spec, grid = build_cohort(cfg)
        split = make_split(timelines, seed=314)
        cohort = Cohort.from_split(timelines, split, spec=spec)
        model = MarkovOrder0Model().fit(cohort)
        test_slots = {uid: np.nonzero(m)[0] for uid, m in split.items()}
        preds = model.predict(slots=test_slots)

        def oracle(cells, g, q):
            # Recount straight from the raw training array per query.
            keys = [
                g.k_of == g.k_of[q],
                (g.h_of == g.h_of[q]) & (g.is_weekend == g.is_weekend[q]),
                g.h_of == g.h_of[q],
            ]
            for mask in keys:
                vals = cells[mask & (cells != EMPTY)]
                if vals.size:
                    uniq, counts = np.unique(vals, return_counts=True)
                    return int(uniq[counts == counts.max()].min())
            return None

        total = mismatches = 0
        for tl in cohort.timelines:
            for q in test_slots[tl.user_id].tolist():
                expected = oracle(tl.cells, grid, q)
                got = preds[tl.user_id].get(q)
                total += 1
                if (got[0][0] if got else None) != expected:
                    mismatches += 1
        elapsed = time.time() - start
        ok = mismatches == 0 and total > 0 and elapsed < 10.0
        report("1 (Markov-0 oracle equivalence)", ok,
               f"[{total} slots, {mismatches} mismatches, {elapsed:.1f}s < 10s]")
        assert mismatches == 0 and total > 0
        assert elapsed < 10.0


class TestCriterion2:
    def test_noiseless_recovery_is_exact(self):
        """epsilon=0, keep=0.3, 100 users, 26 weeks: 100% top-1, 100% fill."""
        start = time.time()
        cfg = CohortConfig(n_users=100, weeks=26, resolution_hours=1,
                           epsilon=0.0, keep_rate=0.3, seed=2024)
        timelines, spec, _ = build_cohort(cfg)
        result = run_models(timelines, spec, models=("ilc",), seed=2024)
        rep = result.reports["ilc"]
        elapsed = time.time() - start
        ok = rep.top1_micro == 100.0 and rep.filled_pct == 100.0 and elapsed < 60.0
        report("2 (noiseless recovery)", ok,
               f"[top1={rep.top1_micro:.4f}%, fill={rep.filled_pct:.2f}%, {elapsed:.1f}s < 60s]")
        assert rep.top1_micro == 100.0
        assert rep.filled_pct == 100.0
        assert elapsed < 60.0


class TestCriterion3:
    def test_fill_rate_ordering(self):
        """ILC = Home-Work = Markov-0 = 100% fill; Markov-1 < 100;
        NextPlace strictly lowest."""
        cfg = CohortConfig(seed=99)  # defaults: epsilon=0.15
        timelines, spec, _ = build_cohort(cfg)
        result = run_models(timelines, spec, models=ALL_MODELS, seed=99)
        fills = {m: result.reports[m].filled_pct for m in ALL_MODELS}
        full = all(fills[m] == 100.0 for m in ("ilc", "homework", "markov0"))
        partial = fills["markov1"] < 100.0
        lowest = all(fills["nextplace"] < fills[m]
                     for m in ALL_MODELS if m != "nextplace")
        ok = full and partial and lowest
        report("3 (fill-rate ordering)", ok,
               "[" + ", ".join(f"{m}={fills[m]:.2f}%" for m in ALL_MODELS) + "]")
        assert full, fills
        assert partial, fills
        assert lowest, fills


class TestCriterion4:
    def test_accuracy_ordering_over_ten_seeds(self):
        """Mean over 10 seeds: ILC > Home-Work > Markov-1 (comparison-table
        convention: unfilled test points count as misses), margins >= 1
        point; ILC top-3 >= top-1 on every run."""
        models = ("ilc", "homework", "markov1")
        acc = {m: [] for m in models}
        top3_ge_top1 = True
        for seed in range(10):
            cfg = CohortConfig(seed=seed)
            timelines, spec, _ = build_cohort(cfg)
            result = run_models(timelines, spec, models=models, seed=seed)
            for m in models:
                acc[m].append(result.reports[m].top1_effective)
            r = result.reports["ilc"]
            top3_ge_top1 &= r.top3_effective >= r.top1_effective
        means = {m: float(np.mean(acc[m])) for m in models}
        margin_a = means["ilc"] - means["homework"]
        margin_b = means["homework"] - means["markov1"]
        ok = margin_a >= 1.0 and margin_b >= 1.0 and top3_ge_top1
        report("4 (accuracy ordering, 10-seed mean)", ok,
               f"[ilc={means['ilc']:.2f} > homework={means['homework']:.2f} "
               f"> markov1={means['markov1']:.2f}; margins {margin_a:.2f}/{margin_b:.2f} >= 1.0]")
        assert margin_a >= 1.0, means
        assert margin_b >= 1.0, means
        assert top3_ge_top1


class TestCriterion5:
    def test_community_ablation_trend(self):
        """First similar user helps; the 20->50 step adds less than the
        0->1 step. 10-group cohorts, mean over 10 seeds."""
        gain_first, gain_tail = [], []
        for seed in range(10):
            cfg = CohortConfig(n_users=60, n_groups=10, weeks=13,
                               keep_rate=0.3, weekend_rotation=True, seed=seed)
            timelines, spec, _ = build_cohort(cfg)
            accs = {}
            for m in (0, 1, 20, 50):
                result = run_models(timelines, spec, models=("ilc",),
                                    seed=seed, neighbor_count=m)
                accs[m] = result.reports["ilc"].top1_micro
            gain_first.append(accs[1] - accs[0])
            gain_tail.append(accs[50] - accs[20])
        mean_first = float(np.mean(gain_first))
        mean_tail = float(np.mean(gain_tail))
        ok = mean_first > 0.0 and mean_tail < mean_first
        report("5 (community ablation trend)", ok,
               f"[gain(m=1)-gain(m=0)={mean_first:.3f} > 0; "
               f"gain(m=50)-gain(m=20)={mean_tail:.3f} < {mean_first:.3f}]")
        assert mean_first > 0.0
        assert mean_tail < mean_first


class TestCriterion6:
    def test_resolution_and_grid_trends(self):
        """Mean over 10 seeds: accuracy at r=1 >= r=2, and coarser grids
        never do worse: 1.0 mi >= 0.5 mi >= 0.1 mi.  The grid sweep
        re-assigns one cohort's events at each cell size, as the source
        protocol does."""
        from locfill.geo import build_grid_spec

        res_acc = {1: [], 2: []}
        grid_acc = {1.0: [], 0.5: [], 0.1: []}
        for seed in range(10):
            for r in (1, 2):
                cfg = CohortConfig(n_users=50, weeks=13, resolution_hours=r, seed=seed)
                timelines, spec, _ = build_cohort(cfg)
                result = run_models(timelines, spec, models=("ilc",), seed=seed)
                res_acc[r].append(result.reports["ilc"].top1_micro)
            cfg = CohortConfig(n_users=50, weeks=13, seed=seed)
            events, _, base_spec, grid = make_cohort_events(cfg)
            bbox = (base_spec.min_lat, base_spec.min_lon,
                    base_spec.max_lat, base_spec.max_lon)
            for cell in (1.0, 0.5, 0.1):
                spec_c = build_grid_spec(bbox, cell)
                pre = preprocess_cohort(events, spec_c, grid)
                result = run_models(pre.timelines, spec_c, models=("ilc",), seed=seed)
                grid_acc[cell].append(result.reports["ilc"].top1_micro)
        r1, r2 = (float(np.mean(res_acc[r])) for r in (1, 2))
        g10, g05, g01 = (float(np.mean(grid_acc[c])) for c in (1.0, 0.5, 0.1))
        ok = r1 >= r2 and g10 >= g05 >= g01
        report("6 (resolution and grid trends)", ok,
               f"[r1={r1:.2f} >= r2={r2:.2f}; grid {g10:.2f} >= {g05:.2f} >= {g01:.2f}]")
        assert r1 >= r2
        assert g10 >= g05 >= g01


class TestCriterion7:
    def test_unit_suite(self):
        """Loss factors, Inter fallback, speed-filter boundary, temporal
        sampling worked examples, split determinism, no leakage."""
        checks = []

        # Information loss at alpha = 0.1 for n = 1, 2, 3.
        checks.append(information_loss(1, 0.1) == pytest.approx(1.0))
        checks.append(information_loss(2, 0.1) == pytest.approx(0.9))
        checks.append(information_loss(3, 0.1) == pytest.approx(0.81))

        # Inter fallback truth table.
        checks.append(inter({1: 0.6, 2: 0.4}, {9: 1.0}) == 1)
        checks.append(inter({}, {9: 1.0}) == 9)
        checks.append(inter({}, {}) is None)

        # Speed-filter boundary: 6% excluded, 5% retained.
        from test_ingest import _user_with_excursions

        checks.append(account_verdict("u", _user_with_excursions(100, 6)).excluded)
        checks.append(not account_verdict("u", _user_with_excursions(100, 5)).excluded)

        # Temporal sampling worked examples: Tuesday 19:05.
        ts = 24 * 3600 + 19 * 3600 + 5 * 60
        idx1 = TimeGrid(1, 1).time_index(ts)
        idx2 = TimeGrid(2, 1).time_index(ts)
        checks.append(idx1.k == 43 and idx1.h == 19)
        checks.append(idx2.k == 22 and idx2.h == 10)

        # Split determinism.
        cfg = CohortConfig(n_users=6, n_groups=2, weeks=4, keep_rate=0.3, seed=5)
        timelines, spec, _ = build_cohort(cfg)
        m1 = make_split(timelines, seed=8)
        m2 = make_split(timelines, seed=8)
        checks.append(all(np.array_equal(m1[u], m2[u]) for u in m1))

        # No-leakage audit: scrambling held-out cells changes nothing the
        # training side produces.
        split = m1
        cohort_a = Cohort.from_split(timelines, split, spec=spec)
        scrambled = []
        rng = np.random.default_rng(0)
        for tl in timelines:
            c = tl.copy()
            qs = np.nonzero(split[tl.user_id])[0]
            c.cells[qs] = rng.integers(0, spec.n_cells, qs.size)
            scrambled.append(c)
        cohort_b = Cohort.from_split(scrambled, split, spec=spec)
        model_a = IntermediateLocationModel(neighbor_count=3).fit(cohort_a)
        model_b = IntermediateLocationModel(neighbor_count=3).fit(cohort_b)
        slots = {u: np.nonzero(split[u])[0] for u in split}
        checks.append(model_a.predict(slots=slots) == model_b.predict(slots=slots))

        ok = all(checks)
        report("7 (unit suite)", ok, f"[{sum(checks)}/{len(checks)} checks]")
        assert all(checks), checks


class TestCriterion8:
    def test_beta_tuning_extremes(self):
        """Always-correct low-similarity neighbor forces beta = 1.0; empty
        community lists tie down to beta = 0.0."""
        # A real two-user cohort fixes the similarity weight: the users
        # co-occur on 25 training slots and agree on exactly one of them.
        grid = TimeGrid(1, 4)
        a_cells = {q: 1 for q in range(30, 55)}
        b_cells = {q: 2 for q in range(30, 55)}
        b_cells[30] = 1
        from conftest import make_timeline

        a = make_timeline(grid, user_id="a", slots=a_cells)
        b = make_timeline(grid, user_id="b", slots=b_cells)
        s = similarity(a.cells, b.cells)
        assert s == pytest.approx(0.04)

        # At the tuned slot-of-week the neighbor is always right while the
        # individual lists point elsewhere; the community term enters as
        # the raw similarity-weighted vote.
        truths = [7] * 12
        p_inds = [{3: 1.0}] * 12
        p_coms = [{7: s}] * 12
        beta_hi = tune_beta(truths, p_inds, p_coms)

        beta_lo = tune_beta(truths, [{7: 1.0}] * 12, [{}] * 12)
        ok = beta_hi == 1.0 and beta_lo == 0.0
        report("8 (beta tuning extremes)", ok,
               f"[always-right neighbor -> {beta_hi}; empty community -> {beta_lo}]")
        assert beta_hi == 1.0
        assert beta_lo == 0.0
