"""Command-line surface.

Exit codes: 0 success, 1 usage error, 2 input-format error, 3 a simulation
study hit a degenerate case. Logging goes to stderr at the level named by the
LOG_LEVEL environment variable (error, warn, info, debug; default warn), so
stdout carries only command output.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

import click
import numpy as np

from . import coco_io
from .dsat import DEFAULT_SIGMA_CLS, DEFAULT_UPDATE_PERIOD, select_threshold
from .metrics import DEFAULT_MATCH_IOU, GridSpec, pr_curve
from .nms import (
    DEFAULT_IOU_THRESHOLD,
    DEFAULT_SCORE_THRESHOLD,
    INFERENCE_SCORE_THRESHOLD,
    nms_unc_with_diagnostics,
    standard_nms,
)
from .sim import (
    DegenerateStudyError,
    SimConfig,
    run_correlation_study,
    run_dsat_trajectory,
    run_sampling_ratio_study,
)
from .targets import DEFAULT_EMA_RATE, DEFAULT_SIGMA_UNC, build_target_sets

log = logging.getLogger("labelsieve")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}

STUDIES = ("correlation", "dsat-trajectory", "sampling-ratio")

# One row per exposed default; the README table and the defaults command are
# both generated from this list so they cannot drift from the code.
DEFAULTS_TABLE = (
    ("nms-unc --iou-thr", DEFAULT_IOU_THRESHOLD, "cluster-gather IoU threshold"),
    ("nms-unc --score-thr", DEFAULT_SCORE_THRESHOLD, "pre-filter score floor"),
    ("nms --iou-thr", DEFAULT_IOU_THRESHOLD, "suppression IoU threshold"),
    ("nms --score-thr", INFERENCE_SCORE_THRESHOLD, "inference-time score floor"),
    ("f1-curve --match-iou", DEFAULT_MATCH_IOU, "detection/ground-truth match IoU"),
    ("f1-curve --grid", "0.05:0.95:0.05", "confidence grid start:stop:step"),
    ("filter --cls-thr", DEFAULT_SIGMA_CLS, "classification-target score gate"),
    ("filter --unc-thr", DEFAULT_SIGMA_UNC, "regression-target uncertainty gate"),
    ("threshold update period", DEFAULT_UPDATE_PERIOD, "iterations between re-selections"),
    ("teacher EMA rate", DEFAULT_EMA_RATE, "per-update teacher retention"),
)


def _parse_grid(_ctx, _param, value: str) -> GridSpec:
    parts = value.split(":")
    if len(parts) != 3:
        raise click.BadParameter("grid must be start:stop:step")
    try:
        start, stop, step = (float(p) for p in parts)
        return GridSpec(start=start, stop=stop, step=step)
    except ValueError as e:
        raise click.BadParameter(str(e))


@click.group()
def cli() -> None:
    """Pseudo-label selection toolkit for semi-supervised detection."""


@cli.command("nms-unc")
@click.option("--detections", required=True, type=click.Path(), help="COCO results JSON.")
@click.option("--iou-thr", default=DEFAULT_IOU_THRESHOLD, show_default=True, type=float)
@click.option("--score-thr", default=DEFAULT_SCORE_THRESHOLD, show_default=True, type=float)
@click.option("--flat-index", is_flag=True, default=False,
              help="Index the dispersion vector without the coordinate stride.")
@click.option("--out", required=True, type=click.Path())
def nms_unc_cmd(detections, iou_thr, score_thr, flat_index, out) -> None:
    """Suppress redundant boxes and attach cluster dispersion as uncertainty."""
    dets = coco_io.load_detections(detections)
    labels, diag = nms_unc_with_diagnostics(
        dets, iou_thr, score_thr, flat_index=flat_index
    )
    log.info(
        "nms-unc: %d in, %d below score floor, %d singleton drops, %d emitted",
        len(dets), diag.prefiltered, diag.singleton_drops, diag.emitted,
    )
    coco_io.save_pseudo_labels(labels, out)
    click.echo(f"wrote {out}")


@cli.command("nms")
@click.option("--detections", required=True, type=click.Path())
@click.option("--iou-thr", default=DEFAULT_IOU_THRESHOLD, show_default=True, type=float)
@click.option("--score-thr", default=INFERENCE_SCORE_THRESHOLD, show_default=True, type=float)
@click.option("--out", required=True, type=click.Path())
def nms_cmd(detections, iou_thr, score_thr, out) -> None:
    """Plain greedy suppression; keeps the surviving detections."""
    dets = coco_io.load_detections(detections)
    kept = standard_nms(dets, iou_thr, score_thr)
    log.info("nms: %d in, %d kept", len(dets), len(kept))
    coco_io.save_detections(kept, out)
    click.echo(f"wrote {out}")


@cli.command("f1-curve")
@click.option("--detections", required=True, type=click.Path(),
              help="COCO results JSON; pseudo-label files parse too.")
@click.option("--annotations", required=True, type=click.Path())
@click.option("--match-iou", default=DEFAULT_MATCH_IOU, show_default=True, type=float)
@click.option("--grid", default="0.05:0.95:0.05", show_default=True, callback=_parse_grid)
@click.option("--out", required=True, type=click.Path())
def f1_curve_cmd(detections, annotations, match_iou, grid, out) -> None:
    """Precision/recall/F1 over the confidence grid, written as CSV."""
    dets = coco_io.load_detections(detections)
    dataset = coco_io.load_annotations(annotations)
    curve = pr_curve(dets, dataset.ground_truths, grid=grid, match_iou=match_iou)
    coco_io.save_curve(curve.points, out)
    log.info("f1-curve: %d detections vs %d ground truths over %d thresholds",
             len(dets), len(dataset.ground_truths), len(curve.points))
    click.echo(f"wrote {out}")


@cli.command("select-threshold")
@click.option("--curve", required=True, type=click.Path(), help="Curve CSV.")
def select_threshold_cmd(curve) -> None:
    """Print the F1-peak threshold and its F1 (ties go to the higher threshold)."""
    points = coco_io.load_curve(curve)
    threshold, peak = select_threshold(points)
    click.echo(f"{threshold:g} {peak:.6f}")


@cli.command("filter")
@click.option("--pseudo", required=True, type=click.Path(), help="Pseudo-label JSON.")
@click.option("--cls-thr", default=str(DEFAULT_SIGMA_CLS), show_default=True,
              help="Score gate, or 'auto' to take the F1 peak of --curve.")
@click.option("--unc-thr", default=DEFAULT_SIGMA_UNC, show_default=True, type=float)
@click.option("--curve", type=click.Path(), default=None, help="Curve CSV for --cls-thr auto.")
@click.option("--out", required=True, type=click.Path())
def filter_cmd(pseudo, cls_thr, unc_thr, curve, out) -> None:
    """Split pseudo labels into classification and regression target sets."""
    if cls_thr == "auto":
        if curve is None:
            raise click.UsageError("--cls-thr auto requires --curve")
        sigma_cls, _ = select_threshold(coco_io.load_curve(curve))
    else:
        try:
            sigma_cls = float(cls_thr)
        except ValueError:
            raise click.BadParameter("--cls-thr must be a float or 'auto'")
    labels = coco_io.load_pseudo_labels(pseudo)
    ts = build_target_sets(labels, sigma_cls=sigma_cls, sigma_unc=unc_thr)
    log.info("filter: %d labels -> %d cls targets, %d reg targets",
             len(labels), ts.n_cls, ts.n_reg)
    coco_io.save_target_sets(ts, sigma_cls, unc_thr, out)
    click.echo(f"wrote {out}")


def _load_sim_config(path, seed) -> tuple[SimConfig, list | None]:
    cfg = SimConfig()
    schedule = None
    if path is not None:
        doc = coco_io._load_json(path)
        if not isinstance(doc, dict):
            raise coco_io.ParseError(f"{path}: config must be a JSON object")
        schedule = doc.pop("schedule", None)
        if schedule is not None and (
            not isinstance(schedule, list)
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in schedule)
        ):
            raise coco_io.ParseError(f"{path}: 'schedule' must be a list of numbers")
        known = {f.name for f in fields(SimConfig)}
        unknown = set(doc) - known
        if unknown:
            raise coco_io.ParseError(f"{path}: unknown config keys {sorted(unknown)}")
        try:
            cfg = replace(cfg, **doc)
        except (TypeError, ValueError) as e:
            raise coco_io.ParseError(f"{path}: {e}") from e
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return cfg, schedule


@cli.command("simulate")
@click.argument("study", type=click.Choice(STUDIES))
@click.option("--seed", type=int, default=None, help="Overrides the config file's seed.")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON object of scene knobs; may include 'schedule'.")
@click.option("--fixed-sigma", default=0.9, show_default=True, type=float,
              help="Comparison threshold for the sampling-ratio study.")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.pass_context
def simulate_cmd(ctx, study, seed, config_path, fixed_sigma, out_dir) -> None:
    """Run a deterministic study; writes a raw CSV and a JSON summary."""
    cfg, schedule = _load_sim_config(config_path, seed)
    if study == "correlation":
        report = run_correlation_study(cfg)
    elif study == "dsat-trajectory":
        if schedule is None:
            schedule = [float(q) for q in np.linspace(0.3, 0.9, 10)]
        report = run_dsat_trajectory(schedule, cfg)
    else:
        report = run_sampling_ratio_study(cfg, fixed_sigma)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{report.study}_seed{report.seed}"
    raw = out / f"{stem}_raw.csv"
    summary = out / f"{stem}_summary.json"
    raw.write_text(report.table_csv(), encoding="utf-8")
    summary.write_text(report.summary_json(), encoding="utf-8")
    click.echo(f"wrote {raw}")
    click.echo(f"wrote {summary}")
    if report.degenerate:
        click.echo(f"{report.study}: degenerate sample, statistic undefined", err=True)
        ctx.exit(3)


@cli.command("defaults")
def defaults_cmd() -> None:
    """Print the built-in defaults as a markdown table."""
    click.echo("| setting | default | meaning |")
    click.echo("| --- | --- | --- |")
    for name, value, meaning in DEFAULTS_TABLE:
        click.echo(f"| `{name}` | {value} | {meaning} |")


def main(argv=None) -> int:
    raw_level = os.environ.get("LOG_LEVEL", "warn")
    if raw_level not in _LOG_LEVELS:
        click.echo(
            f"error: LOG_LEVEL must be one of {sorted(_LOG_LEVELS)}, got {raw_level!r}",
            err=True,
        )
        return 1
    logging.basicConfig(
        level=_LOG_LEVELS[raw_level],
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    try:
        # Under standalone_mode=False click returns ctx.exit's code instead of
        # calling sys.exit, so the return value is part of the contract here.
        rv = cli.main(args=argv, standalone_mode=False)
        if isinstance(rv, int):
            return rv
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.UsageError as e:
        e.show()
        return 1
    except click.Abort:
        return 1
    except DegenerateStudyError as e:
        click.echo(f"degenerate study: {e}", err=True)
        return 3
    except (coco_io.ParseError, json.JSONDecodeError) as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except (FileNotFoundError, IsADirectoryError, NotADirectoryError, PermissionError) as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except (ValueError, OverflowError) as e:
        click.echo(f"error: {e}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
