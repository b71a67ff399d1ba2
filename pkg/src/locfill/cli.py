"""Command-line entry point: synth, preprocess, run, ablate.

Configuration comes from an optional JSON file plus flags; flags win.
Unknown config keys are rejected.  Exit codes: 0 success, 2 configuration
error, 3 data error.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import io as fio
from .geo import GridError, GridSpec, build_grid_spec
from .ingest import ClockShift, parse_events, parse_timestamp
from .models import MODEL_REGISTRY
from .pipeline import preprocess_cohort, run_models
from .synth import CohortConfig, events_to_csv_lines, make_cohort_events
from .timeline import TimeGrid, read_timelines_csv, write_timelines_csv

DATA_ERROR_EXIT = 3

CONFIG_KEYS = {
    "events": str,
    "out_dir": str,
    "bbox": list,
    "cell_size_miles": (int, float),
    "resolution_hours": int,
    "weeks": int,
    "study_start": str,
    "alpha": (int, float, type(None)),
    "neighbor_count": int,
    "top_k": int,
    "models": list,
    "seed": int,
    "jobs": int,
    "split_ratio": (int, float),
    "tune_beta": bool,
    "utc_offset_hours": (int, float),
    "dst_start": (str, type(None)),
    "exclude_accounts": list,
    "gamma": (int, float),
    "rnn_cmd": (str, type(None)),
}

DEFAULTS = {
    "cell_size_miles": 1.0,
    "resolution_hours": 1,
    "weeks": 26,
    "study_start": "2014-01-06T00:00:00Z",
    "alpha": 0.1,
    "neighbor_count": 50,
    "top_k": 3,
    "models": ["ilc", "homework", "markov0", "markov1", "poi", "nextplace"],
    "seed": 0,
    "jobs": 1,
    "split_ratio": 0.7,
    "tune_beta": True,
    "utc_offset_hours": 0.0,
    "dst_start": None,
    "exclude_accounts": [],
    "gamma": 0.5,
    "rnn_cmd": None,
}


class DataError(click.ClickException):
    """Input data cannot be used (unreadable, empty, out of window)."""

    exit_code = DATA_ERROR_EXIT


def load_config(config_path: str | None, overrides: dict) -> dict:
    cfg = dict(DEFAULTS)
    if config_path:
        try:
            raw = json.loads(Path(config_path).read_text())
        except FileNotFoundError:
            raise click.UsageError(f"config file not found: {config_path}")
        except json.JSONDecodeError as exc:
            raise click.UsageError(f"config file is not valid JSON: {exc}")
        unknown = set(raw) - set(CONFIG_KEYS)
        if unknown:
            raise click.UsageError(f"unknown config keys: {sorted(unknown)}")
        for key, value in raw.items():
            if value is not None and not isinstance(value, CONFIG_KEYS[key]):
                raise click.UsageError(
                    f"config key {key!r} has wrong type {type(value).__name__}"
                )
        cfg.update(raw)
    cfg.update({k: v for k, v in overrides.items() if v is not None})
    return cfg


def _grid_from_config(cfg: dict) -> GridSpec:
    bbox = cfg.get("bbox")
    if not bbox or len(bbox) != 4:
        raise click.UsageError("config needs bbox: [min_lat, min_lon, max_lat, max_lon]")
    try:
        return build_grid_spec(tuple(float(v) for v in bbox), float(cfg["cell_size_miles"]))
    except (GridError, ValueError) as exc:
        raise click.UsageError(f"invalid grid: {exc}")


def _timegrid_from_config(cfg: dict) -> TimeGrid:
    try:
        start = parse_timestamp(cfg["study_start"])
    except ValueError as exc:
        raise click.UsageError(f"invalid study_start: {exc}")
    start_dt = datetime.fromtimestamp(start, tz=timezone.utc)
    if start_dt.weekday() != 0 or start_dt.hour or start_dt.minute or start_dt.second:
        raise click.UsageError("study_start must be a Monday 00:00 (UTC)")
    try:
        return TimeGrid(int(cfg["resolution_hours"]), int(cfg["weeks"]), start)
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _read_events(cfg: dict):
    path = cfg.get("events")
    if not path:
        raise click.UsageError("no events file configured (use --events or config)")
    clock = ClockShift(
        utc_offset_hours=float(cfg["utc_offset_hours"]),
        dst_start_ts=parse_timestamp(cfg["dst_start"]) if cfg["dst_start"] else None,
    )
    try:
        with open(path) as fh:
            events, report = parse_events(fh, clock)
    except OSError as exc:
        raise DataError(f"cannot read events file {path}: {exc}")
    return events, report


@click.group()
def main() -> None:
    """Reconstruct complete location timelines from sparse geo-tagged events."""


@main.command()
@click.option("--out", required=True, type=click.Path(), help="Events CSV to write.")
@click.option("--ground-truth", type=click.Path(), help="Full ground-truth CSV to write.")
@click.option("--users", default=100, show_default=True)
@click.option("--groups", default=10, show_default=True)
@click.option("--weeks", default=26, show_default=True)
@click.option("--resolution", type=click.Choice(["1", "2"]), default="1", show_default=True)
@click.option("--grid-size", default=1.0, show_default=True, help="Cell size in miles.")
@click.option("--epsilon", default=0.15, show_default=True)
@click.option("--keep-rate", default=0.15, show_default=True)
@click.option("--rotate-weekends/--no-rotate-weekends", default=False, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth(out, ground_truth, users, groups, weeks, resolution, grid_size,
          epsilon, keep_rate, rotate_weekends, seed) -> None:
    """Generate a synthetic cohort and write its sparse event stream."""
    try:
        cfg = CohortConfig(
            n_users=users, n_groups=groups, weeks=weeks,
            resolution_hours=int(resolution), cell_size_miles=grid_size,
            epsilon=epsilon, keep_rate=keep_rate,
            weekend_rotation=rotate_weekends, seed=seed,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc))
    events, cohort, spec, grid = make_cohort_events(cfg)

    def body(fh):
        fh.write("user_id,iso8601_ts,lat,lon\n")
        for uid in sorted(events):
            for line in events_to_csv_lines(events[uid]):
                fh.write(line + "\n")

    fio.atomic_write(out, body)
    if ground_truth:
        fio.write_table_csv(
            ground_truth, ["user_id", "q", "cell"],
            ((gt.user_id, q, int(gt.cells[q]))
             for gt in cohort for q in range(grid.n_slots)),
        )
    sidecar = {
        "bbox": [spec.min_lat, spec.min_lon, spec.max_lat, spec.max_lon],
        "cell_size_miles": spec.cell_size_miles,
        "resolution_hours": cfg.resolution_hours,
        "weeks": cfg.weeks,
        "study_start": "2014-01-06T00:00:00Z",
        "seed": seed,
    }
    fio.write_json(str(Path(out).with_suffix(".config.json")), sidecar)
    click.echo(f"wrote {sum(len(v) for v in events.values())} events for {users} users to {out}")


@main.command()
@click.option("--config", "config_path", type=click.Path(), help="JSON config file.")
@click.option("--events", type=click.Path())
@click.option("--out-dir", type=click.Path())
@click.option("--resolution", type=click.Choice(["1", "2"]))
@click.option("--grid-size", type=float)
@click.option("--weeks", type=int)
@click.option("--seed", type=int)
def preprocess(config_path, events, out_dir, resolution, grid_size, weeks, seed) -> None:
    """Filter accounts, build timelines, apply the inclusion criteria."""
    cfg = load_config(config_path, {
        "events": events, "out_dir": out_dir, "seed": seed, "weeks": weeks,
        "resolution_hours": int(resolution) if resolution else None,
        "cell_size_miles": grid_size,
    })
    if not cfg.get("out_dir"):
        raise click.UsageError("no --out-dir configured")
    spec = _grid_from_config(cfg)
    grid = _timegrid_from_config(cfg)
    events_by_user, report = _read_events(cfg)

    result = preprocess_cohort(events_by_user, spec, grid,
                               exclude_ids=cfg["exclude_accounts"])
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    write_timelines_csv(out / "timelines.csv", result.timelines, spec, grid)
    fio.write_table_csv(
        out / "verdicts.csv",
        ["user_id", "total_events", "violating_events", "excluded"],
        ((v.user_id, v.total_events, v.violating_events, int(v.excluded))
         for v in sorted(result.verdicts, key=lambda v: v.user_id)),
    )
    summary = dict(result.summary)
    summary["parse"] = {
        "parsed": report.parsed, "skipped": report.skipped,
        "duplicates": report.duplicates,
    }
    fio.write_json(out / "inclusion_summary.json", summary)
    click.echo(
        f"included {summary['included_users']} users "
        f"(spoofed: {summary['excluded_spoofed']}, "
        f"below inclusion: {summary['excluded_inclusion']})"
    )


@main.command()
@click.option("--config", "config_path", type=click.Path(), help="JSON config file.")
@click.option("--timelines", "timelines_path", type=click.Path(),
              help="Preprocessed timelines CSV (else preprocess inline from events).")
@click.option("--events", type=click.Path())
@click.option("--out-dir", type=click.Path())
@click.option("--models", help="Comma-separated subset of: " + ",".join(MODEL_REGISTRY))
@click.option("--resolution", type=click.Choice(["1", "2"]))
@click.option("--grid-size", type=float)
@click.option("--weeks", type=int)
@click.option("--seed", type=int)
@click.option("--tune-alpha", "tune_alpha_flag", is_flag=True, default=False,
              help="Grid-search the step loss instead of using the configured alpha.")
@click.option("--no-tune-beta", is_flag=True, default=False)
@click.option("--jobs", type=int)
def run(config_path, timelines_path, events, out_dir, models, resolution,
        grid_size, weeks, seed, tune_alpha_flag, no_tune_beta, jobs) -> None:
    """Split, tune, fit the requested models, and write evaluation reports."""
    cfg = load_config(config_path, {
        "events": events, "out_dir": out_dir, "seed": seed, "weeks": weeks,
        "resolution_hours": int(resolution) if resolution else None,
        "cell_size_miles": grid_size, "jobs": jobs,
        "models": models.split(",") if models else None,
        "tune_beta": False if no_tune_beta else None,
    })
    if not cfg.get("out_dir"):
        raise click.UsageError("no --out-dir configured")
    known = set(MODEL_REGISTRY) | {"rnn"}
    bad = [m for m in cfg["models"] if m not in known]
    if bad:
        raise click.UsageError(f"unknown models {bad}; choose from {sorted(known)}")
    native_models = [m for m in cfg["models"] if m in MODEL_REGISTRY]
    want_rnn = "rnn" in cfg["models"]
    if cfg["jobs"] < 1:
        raise click.UsageError("jobs must be >= 1")

    if timelines_path:
        try:
            timelines, spec, grid = read_timelines_csv(timelines_path)
        except OSError as exc:
            raise DataError(f"cannot read timelines: {exc}")
    else:
        spec = _grid_from_config(cfg)
        grid = _timegrid_from_config(cfg)
        events_by_user, _ = _read_events(cfg)
        timelines = preprocess_cohort(
            events_by_user, spec, grid, exclude_ids=cfg["exclude_accounts"]
        ).timelines
    if not timelines:
        raise DataError("no users passed preprocessing; nothing to run")

    result = run_models(
        timelines, spec,
        models=tuple(native_models), seed=int(cfg["seed"]),
        split_ratio=float(cfg["split_ratio"]),
        alpha=None if tune_alpha_flag else float(cfg["alpha"]),
        neighbor_count=int(cfg["neighbor_count"]), top_k=int(cfg["top_k"]),
        tune_beta=bool(cfg["tune_beta"]), gamma=float(cfg["gamma"]),
        jobs=int(cfg["jobs"]),
    )

    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    fio.write_split_csv(out / "split_mask.csv", result.split)
    for name, preds in result.predictions.items():
        fio.write_predictions_csv(out / f"predictions_{name}.csv", preds, model=name)

    report_payload = {
        "alpha": result.alpha,
        "seed": cfg["seed"],
        "models": {name: rep.to_dict() for name, rep in result.reports.items()},
    }
    if want_rnn:
        rnn_report = _run_rnn_companion(cfg, out, timelines, spec, grid, result.split)
        report_payload["models"]["rnn"] = rnn_report
    fio.write_json(out / "report.json", report_payload)
    per_user_rows = []
    distinct_rows = []
    for name, rep in result.reports.items():
        for row in rep.per_user:
            per_user_rows.append((name, row["user_id"], row["n_test"], row["n_filled"],
                                  "" if row["top1"] is None else f"{row['top1']:.4f}",
                                  "" if row["top3"] is None else f"{row['top3']:.4f}"))
        for n_distinct, acc in rep.distinct_pairs:
            distinct_rows.append((name, n_distinct, f"{acc:.4f}"))
    fio.write_table_csv(out / "per_user_accuracy.csv",
                        ["model", "user_id", "n_test", "n_filled", "top1", "top3"],
                        per_user_rows)
    fio.write_table_csv(out / "distinct_location_accuracy.csv",
                        ["model", "distinct_locations", "top1"], distinct_rows)
    for name, rep in result.reports.items():
        click.echo(
            f"{name}: top1={rep.top1_micro:.2f} top3={rep.top3_micro:.2f} "
            f"filled={rep.filled_pct:.2f}%"
        )


def _run_rnn_companion(cfg, out_dir, timelines, spec, grid, split) -> dict:
    """Launch the companion network trainer on the written artifacts.

    The companion is optional: a missing or failing executable is recorded
    in the report without failing the run.
    """
    import shlex
    import subprocess

    from .evaluation import evaluate

    timelines_path = out_dir / "timelines_for_rnn.csv"
    write_timelines_csv(timelines_path, timelines, spec, grid)
    command = cfg.get("rnn_cmd") or "node rnn/dist/cli.js"
    argv = shlex.split(command) + [
        "--timelines", str(timelines_path),
        "--split", str(out_dir / "split_mask.csv"),
        "--out", str(out_dir / "predictions_rnn.csv"),
        "--seed", str(cfg["seed"]),
    ]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=3600)
    except (OSError, subprocess.TimeoutExpired) as exc:
        click.echo(f"rnn: companion not run ({exc})", err=True)
        return {"error": str(exc), "command": command}
    if proc.returncode != 0:
        click.echo(f"rnn: companion failed ({proc.stderr.strip()[-200:]})", err=True)
        return {"error": proc.stderr.strip()[-500:], "command": command}
    preds = fio.read_predictions_csv(out_dir / "predictions_rnn.csv")
    rep = evaluate(preds, timelines, split, model="rnn", top_n=int(cfg["top_k"]))
    click.echo(f"rnn: top1={rep.top1_micro:.2f} top3={rep.top3_micro:.2f} "
               f"filled={rep.filled_pct:.2f}%")
    return rep.to_dict()


ABLATION_AXES = {
    "m": (0, 1, 2, 5, 10, 20, 50),
    "users": (5, 10, 50, 100, 200),
    "grid": (1.0, 0.5, 0.1),
    "r_i": (1, 2),
}


@main.command()
@click.option("--axis", type=click.Choice(sorted(ABLATION_AXES)), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--users", default=50, show_default=True)
@click.option("--groups", default=10, show_default=True)
@click.option("--weeks", default=13, show_default=True)
@click.option("--epsilon", default=0.15, show_default=True)
@click.option("--keep-rate", default=0.15, show_default=True)
@click.option("--rotate-weekends/--no-rotate-weekends", default=False, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--replications", default=10, show_default=True,
              help="Seeded replications averaged on the users axis.")
@click.option("--values", "values_csv", default=None,
              help="Comma-separated subset of the axis values to sweep.")
def ablate(axis, out_dir, users, groups, weeks, epsilon, keep_rate,
           rotate_weekends, seed, replications, values_csv) -> None:
    """Sweep one axis on a synthetic cohort and write the accuracy curve."""
    sweep = ABLATION_AXES[axis]
    if values_csv:
        caster = float if axis == "grid" else int
        try:
            requested = [caster(v) for v in values_csv.split(",")]
        except ValueError as exc:
            raise click.UsageError(f"bad --values: {exc}")
        unknown = [v for v in requested if v not in sweep]
        if unknown:
            raise click.UsageError(f"--values {unknown} not in axis values {sweep}")
        sweep = tuple(requested)
    rows = []
    for value in sweep:
        seeds = range(seed, seed + replications) if axis == "users" else [seed]
        accs = []
        for s in seeds:
            cohort_kwargs = dict(
                n_users=users, n_groups=groups, weeks=weeks, epsilon=epsilon,
                keep_rate=keep_rate, weekend_rotation=rotate_weekends, seed=s,
            )
            run_kwargs: dict = {"models": ("ilc",), "seed": s}
            if axis == "m":
                run_kwargs["neighbor_count"] = int(value)
            elif axis == "users":
                cohort_kwargs["n_users"] = int(value)
                cohort_kwargs["n_groups"] = min(groups, int(value))
                run_kwargs["neighbor_count"] = 0  # individual component only
            elif axis == "r_i":
                cohort_kwargs["resolution_hours"] = int(value)
            try:
                cfg = CohortConfig(**cohort_kwargs)
            except ValueError as exc:
                raise click.UsageError(str(exc))
            events, _, spec, grid = make_cohort_events(cfg)
            if axis == "grid":
                # Same events, re-assigned at the requested cell size.
                spec = build_grid_spec(
                    (spec.min_lat, spec.min_lon, spec.max_lat, spec.max_lon),
                    float(value))
            pre = preprocess_cohort(events, spec, grid)
            if not pre.timelines:
                raise DataError(f"ablation point {axis}={value} produced no usable users")
            res = run_models(pre.timelines, spec, **run_kwargs)
            accs.append(res.reports["ilc"].top1_micro)
        rows.append((value, float(np.mean(accs)), len(accs)))
        click.echo(f"{axis}={value}: top1={rows[-1][1]:.2f} (n={rows[-1][2]})")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fio.write_table_csv(out / f"ablation_{axis}.csv",
                        [axis, "top1_micro", "replications"], rows)


def cli_entry() -> None:
    main()


if __name__ == "__main__":
    cli_entry()
