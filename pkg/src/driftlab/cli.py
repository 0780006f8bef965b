"""Command-line entry point: run experiments, sweep hyperparameters, generate
streams, and serve the interactive session API.

Exit codes: 0 success, 1 runtime failure, 2 config/usage error.
"""

from __future__ import annotations

import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from driftlab.evaluate import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    build_stream,
    emit_report,
    gold_for,
    load_config,
    match_alarms,
    run_experiment,
    run_single,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


@click.group()
def main() -> None:
    """Drift detection under spurious correlations: experiment tooling."""


def _load(config_path: str) -> ExperimentConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


@main.command()
@click.argument("config_path", type=click.Path())
@click.option("--dry-run", is_flag=True, help="Validate and print the resolved config without executing.")
@click.option("--output-dir", default=None, help="Override the config's output directory.")
def run(config_path: str, dry_run: bool, output_dir: str | None) -> None:
    """Run the configured experiment for all seeds and write reports."""
    config = _load(config_path)
    if output_dir is not None:
        config.output_dir = output_dir
    if dry_run:
        click.echo(json.dumps(config.to_dict(), indent=2, sort_keys=True))
        sys.exit(EXIT_OK)
    try:
        result = run_experiment(config)
        written = emit_report(result, config.output_dir)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        click.echo(f"run failed: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    agg = result.aggregate()
    click.echo(
        f"done: detected={agg['mean_detected']:.1f}/{len(result.gold)} "
        f"false={agg['mean_false_alarms']:.1f} queries={agg['mean_query_count']:.1f} "
        f"acc={agg['mean_accuracy']:.3f}"
    )
    for path in written:
        click.echo(f"wrote {path}")
    sys.exit(EXIT_OK)


def _evaluate_candidate(args: tuple[dict, dict, int]) -> tuple[int, int, int]:
    """Worker: score one sweep candidate on the validation prefix.

    Returns (false_alarms+duplicates, -detected, index) so min() picks the
    quietest candidate, then the most detections, then grid order.
    """
    raw, overrides, index = args
    merged = apply_overrides(raw, overrides)
    config = ExperimentConfig.from_dict(merged)
    result = run_single(config, config.seeds[0])
    gold = sorted(gold_for(config.dataset))
    report = match_alarms(result.alarm_steps, gold, config.delay_window)
    return (report.false_alarms + report.duplicates, -report.detected, index)


@main.command()
@click.argument("config_path", type=click.Path())
@click.argument("grid_path", type=click.Path())
@click.option("--prefix", default=5000, show_default=True, help="Validation prefix length in steps.")
@click.option("--workers", default=1, show_default=True, help="Parallel worker processes.")
@click.option("--out", "out_path", default=None, help="Where to write the chosen config (default: stdout).")
def sweep(config_path: str, grid_path: str, prefix: int, workers: int, out_path: str | None) -> None:
    """Select hyperparameters on the confounded validation prefix.

    GRID_PATH is a JSON list of override objects with dotted config paths,
    e.g. [{"exstream.theta": 0.2}, {"exstream.theta": 0.4}]. Candidates are
    scored on the first PREFIX steps: fewest false alarms, then most
    detections, ties resolved by grid order.
    """
    config = _load(config_path)
    try:
        grid = json.loads(Path(grid_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"grid error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if not isinstance(grid, list) or not grid:
        click.echo("grid error: expected a non-empty JSON list of override objects", err=True)
        sys.exit(EXIT_CONFIG)
    raw = config.to_dict()
    # validate on a single-seed prefix of the configured stream
    if config.dataset.id == "stagger":
        segments = max(1, prefix // config.dataset.segment_len) if prefix >= config.dataset.segment_len else 1
        raw["dataset"]["total"] = config.dataset.segment_len * segments
        raw["dataset"]["concepts"] = raw["dataset"]["concepts"][:segments]
    else:
        raw["dataset"]["total"] = min(prefix, config.dataset.total)
        raw["dataset"]["drift_times"] = [d for d in raw["dataset"]["drift_times"] if d < prefix]
    raw["seeds"] = [config.seeds[0]]
    jobs = [(raw, dict(overrides), i) for i, overrides in enumerate(grid)]
    try:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                scores = list(pool.map(_evaluate_candidate, jobs))
        else:
            scores = [_evaluate_candidate(job) for job in jobs]
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    best = min(scores)
    chosen_index = best[2]
    chosen = apply_overrides(config.to_dict(), dict(grid[chosen_index]))
    click.echo(
        f"selected candidate {chosen_index}: {json.dumps(grid[chosen_index], sort_keys=True)} "
        f"(false_alarms={best[0]}, detected={-best[1]})"
    )
    text = json.dumps(chosen, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
        click.echo(f"wrote {out_path}")
    else:
        click.echo(text)
    sys.exit(EXIT_OK)


@main.command()
@click.argument("dataset_id")
@click.argument("out_path", type=click.Path())
@click.option("--confounded", is_flag=True, help="Apply the dataset's confound rule.")
@click.option("--total", default=40000, show_default=True)
@click.option("--seed", default=1, show_default=True)
@click.option("--drift-times", default="", help="Comma-separated drift steps (synthetic only).")
def gen(dataset_id: str, out_path: str, confounded: bool, total: int, seed: int, drift_times: str) -> None:
    """Materialize a generated stream to CSV for inspection."""
    from driftlab.evaluate import DatasetConfig

    dataset_id = dataset_id.lower()
    if dataset_id.startswith("c-"):
        dataset_id = dataset_id[2:]
        confounded = True
    if dataset_id not in ("stagger", "synthetic"):
        click.echo(f"gen: unknown generator {dataset_id!r} (valid: stagger, synthetic, c-stagger, c-synthetic)", err=True)
        sys.exit(EXIT_CONFIG)
    drifts = [int(v) for v in drift_times.split(",") if v.strip()] if drift_times else []
    if dataset_id == "stagger":
        segment = total // 4
        if segment * 4 != total:
            click.echo("gen: stagger total must be divisible by 4 segments", err=True)
            sys.exit(EXIT_CONFIG)
        cfg = DatasetConfig(id="stagger", confounded=confounded, total=total, segment_len=segment)
    else:
        cfg = DatasetConfig(id="synthetic", confounded=confounded, total=total, drift_times=tuple(drifts))
    try:
        stream, schema, _ = build_stream(cfg, seed)
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([*schema.names, "class"])
            for inst in stream:
                writer.writerow([*inst.x, inst.y])
    except OSError as exc:
        click.echo(f"gen failed: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    click.echo(f"wrote {len(stream)} rows to {out_path}")
    sys.exit(EXIT_OK)


@main.command()
@click.argument("config_path", type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(config_path: str, host: str, port: int) -> None:
    """Serve the live annotation session API (and with it, the UI's backend)."""
    config = _load(config_path)
    import uvicorn

    from driftlab.service import create_app

    app = create_app(default_config=config)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
