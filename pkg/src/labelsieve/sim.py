"""Deterministic synthetic-scene generator and desk-scale study harness.

Scenes model the dense-prediction regime of a single-stage detector: every
ground-truth object spawns a fixed number of redundant boxes whose corners are
the object's corners plus zero-mean Gaussian noise, plus a pool of low-scoring
random background boxes. Each object carries a difficulty multiplier d
drawn uniformly from [0.25, 2] that scales its corner-noise std:

    std = jitter_scale * (1 - quality) * d * extent

so hard objects scatter their redundant boxes more AND land their best box
farther from the truth; that shared cause is what makes cluster dispersion
informative about localization error. Scores couple stochastically to
localization quality:

    score = clip(quality * (0.4 + 0.6 * iou_to_gt)
                 + noise * score_noise * (1 - quality), 0, 1)

so higher teacher quality concentrates scores high and shrinks both jitter and
score noise; a quality-1.0 scene is an exact perfect detector. The quality
knob deliberately conflates calibration and localization sharpness: this is a
study harness, not a detector model.

Randomness comes from the counter-based Philox generator (numpy's
Philox4x64-10) keyed per purpose: key = (seed, kind<<56 | step<<32 | index)
with kind 0 for object layout, 1 for background boxes, and 2+index for each
object's jitter and score draws. Substreams make per-object generation
order-free and every study byte-reproducible for a given (config, seed).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .dsat import select_threshold
from .geometry import BBox, iou
from .metrics import GridSpec, GroundTruth, pr_curve
from .nms import (
    DEFAULT_IOU_THRESHOLD,
    DEFAULT_SCORE_THRESHOLD,
    Detection,
    nms_unc,
    pseudo_label_detections,
)

CANVAS = 4096.0
OBJECT_SIZE_RANGE = (32.0, 128.0)
BACKGROUND_SCORE_RANGE = (0.05, 0.45)
DIFFICULTY_SPAN = (0.25, 2.0)  # multiplier on the corner-noise std

_KIND_LAYOUT = 0
_KIND_BACKGROUND = 1
_KIND_OBJECT = 2


class DegenerateStudyError(RuntimeError):
    """The study's statistic is undefined for the generated sample."""


@dataclass(frozen=True)
class SimConfig:
    """Scene-generation knobs. Fully determines a scene together with the seed."""

    n_objects: int = 1000
    boxes_per_object: int = 8
    jitter_scale: float = 0.2
    score_noise: float = 0.4
    quality: float = 0.7
    n_background_fp: int = 200
    seed: int = 42

    def __post_init__(self) -> None:
        if self.n_objects < 0 or self.boxes_per_object < 0 or self.n_background_fp < 0:
            raise ValueError("counts must be >= 0")
        if self.jitter_scale < 0.0:
            raise ValueError(f"jitter_scale must be >= 0, got {self.jitter_scale!r}")
        if self.score_noise < 0.0:
            raise ValueError(f"score_noise must be >= 0, got {self.score_noise!r}")
        if not (0.0 <= self.quality <= 1.0):
            raise ValueError(f"quality must be in [0, 1], got {self.quality!r}")
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class StudyReport:
    """Named scalar results plus the raw per-sample table they came from."""

    study: str
    seed: int
    config: dict
    results: dict
    table: tuple[dict, ...]
    degenerate: bool = False

    def summary_json(self) -> str:
        payload = {
            "study": self.study,
            "seed": self.seed,
            "config": self.config,
            "results": self.results,
            "degenerate": self.degenerate,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def table_csv(self) -> str:
        if not self.table:
            return "\n"
        columns = list(self.table[0].keys())
        lines = [",".join(columns)]
        for row in self.table:
            lines.append(",".join(_csv_cell(row[c]) for c in columns))
        return "\n".join(lines) + "\n"


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _stream(seed: int, kind: int, step: int, index: int) -> np.random.Generator:
    if not (0 <= step < 2**24 and 0 <= index < 2**32):
        raise ValueError("stream coordinates out of range")
    key = np.array([seed, (kind << 56) | (step << 32) | index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _swap_fix(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.minimum(lo, hi), np.maximum(lo, hi)


def generate_scene(cfg: SimConfig) -> tuple[list[GroundTruth], list[Detection]]:
    """One synthetic image: ground truths plus dense scored detections.

    Fully determined by cfg: two configs differing only in quality share the
    same layout and noise draws, so quality sweeps are paired comparisons.
    All boxes are single-class (class_id 0) on image_id 0.
    """
    layout = _stream(cfg.seed, _KIND_LAYOUT, 0, 0)
    lo, hi = OBJECT_SIZE_RANGE
    w = layout.uniform(lo, hi, cfg.n_objects)
    h = layout.uniform(lo, hi, cfg.n_objects)
    x1 = layout.uniform(0.0, 1.0, cfg.n_objects) * (CANVAS - w)
    y1 = layout.uniform(0.0, 1.0, cfg.n_objects) * (CANVAS - h)

    gts = [
        GroundTruth(bbox=BBox(x1[o], y1[o], x1[o] + w[o], y1[o] + h[o]))
        for o in range(cfg.n_objects)
    ]

    dets: list[Detection] = []
    noise_gain = cfg.jitter_scale * (1.0 - cfg.quality)
    score_gain = cfg.score_noise * (1.0 - cfg.quality)
    d_lo, d_hi = DIFFICULTY_SPAN
    for o, gt in enumerate(gts):
        g = _stream(cfg.seed, _KIND_OBJECT, 0, o)
        b = cfg.boxes_per_object
        difficulty = g.uniform(d_lo, d_hi)
        corner_eps = g.standard_normal((b, 4))
        score_eps = g.standard_normal(b)
        sx = noise_gain * difficulty * w[o]
        sy = noise_gain * difficulty * h[o]
        bx1 = gt.bbox.x1 + corner_eps[:, 0] * sx
        by1 = gt.bbox.y1 + corner_eps[:, 1] * sy
        bx2 = gt.bbox.x2 + corner_eps[:, 2] * sx
        by2 = gt.bbox.y2 + corner_eps[:, 3] * sy
        bx1, bx2 = _swap_fix(bx1, bx2)
        by1, by2 = _swap_fix(by1, by2)
        for i in range(b):
            box = BBox(bx1[i], by1[i], bx2[i], by2[i])
            overlap = iou(box, gt.bbox)
            score = cfg.quality * (0.4 + 0.6 * overlap) + score_eps[i] * score_gain
            dets.append(Detection(bbox=box, score=float(np.clip(score, 0.0, 1.0))))

    bg = _stream(cfg.seed, _KIND_BACKGROUND, 0, 0)
    n = cfg.n_background_fp
    bw = bg.uniform(lo, hi, n)
    bh = bg.uniform(lo, hi, n)
    bx = bg.uniform(0.0, 1.0, n) * (CANVAS - bw)
    by = bg.uniform(0.0, 1.0, n) * (CANVAS - bh)
    bscore = bg.uniform(*BACKGROUND_SCORE_RANGE, n)
    for i in range(n):
        dets.append(
            Detection(
                bbox=BBox(bx[i], by[i], bx[i] + bw[i], by[i] + bh[i]),
                score=float(bscore[i]),
            )
        )
    return gts, dets


def _best_gt_iou(det_box: BBox, gts: Sequence[GroundTruth], class_id: int) -> float:
    best = 0.0
    for g in gts:
        if g.class_id != class_id:
            continue
        v = iou(det_box, g.bbox)
        if v > best:
            best = v
    return best


def run_correlation_study(
    cfg: SimConfig,
    iou_thr: float = DEFAULT_IOU_THRESHOLD,
    score_thr: float = DEFAULT_SCORE_THRESHOLD,
) -> StudyReport:
    """Relation between emitted uncertainty and localization quality.

    For every pseudo label the suppression emits, record (uncertainty, IoU to
    its best-matching ground truth); report the Spearman rank correlation and
    a least-squares fit line. Fewer than two labels raises
    DegenerateStudyError; a constant column yields a degenerate report.
    """
    if cfg.n_objects < 100:
        raise ValueError(f"correlation study needs n_objects >= 100, got {cfg.n_objects}")
    gts, dets = generate_scene(cfg)
    labels = nms_unc(dets, iou_thr, score_thr)
    if len(labels) < 2:
        raise DegenerateStudyError(
            f"only {len(labels)} pseudo labels emitted; need at least 2"
        )

    unc = np.array([l.uncertainty for l in labels])
    ious = np.array([_best_gt_iou(l.bbox, gts, l.class_id) for l in labels])
    table = tuple(
        {
            "uncertainty": float(l.uncertainty),
            "iou": float(ious[i]),
            "score": float(l.score),
            "cluster_size": l.cluster_size,
        }
        for i, l in enumerate(labels)
    )

    base = {"n_labels": len(labels), "mean_uncertainty": float(unc.mean()),
            "mean_iou": float(ious.mean())}
    if np.ptp(unc) == 0.0 or np.ptp(ious) == 0.0:
        results = dict(base, spearman_rho=None, fit_slope=None, fit_intercept=None)
        return StudyReport(
            study="correlation", seed=cfg.seed, config=asdict(cfg),
            results=results, table=table, degenerate=True,
        )

    rho = float(stats.spearmanr(unc, ious).statistic)
    slope, intercept = np.polyfit(unc, ious, 1)
    results = dict(
        base,
        spearman_rho=rho,
        fit_slope=float(slope),
        fit_intercept=float(intercept),
    )
    return StudyReport(
        study="correlation", seed=cfg.seed, config=asdict(cfg),
        results=results, table=table,
    )


def run_dsat_trajectory(
    schedule: Sequence[float],
    cfg: SimConfig,
    iou_thr: float = DEFAULT_IOU_THRESHOLD,
    score_thr: float = DEFAULT_SCORE_THRESHOLD,
) -> StudyReport:
    """Chosen F1-peak threshold across a teacher-quality schedule.

    Each schedule step regenerates the scene at that quality (same layout and
    noise draws, so steps are paired), runs suppression, scores the pseudo
    labels against the scene's ground truth, and records the chosen threshold.
    """
    if not schedule:
        raise ValueError("schedule must be non-empty")
    rows = []
    thresholds = []
    for k, q in enumerate(schedule):
        scene_cfg = replace(cfg, quality=q)
        gts, dets = generate_scene(scene_cfg)
        labels = nms_unc(dets, iou_thr, score_thr)
        curve = pr_curve(pseudo_label_detections(labels), gts)
        threshold, peak = select_threshold(curve)
        thresholds.append(threshold)
        rows.append(
            {
                "step": k,
                "quality": float(q),
                "threshold": threshold,
                "peak_f1": peak,
                "n_labels": len(labels),
            }
        )
    n_changes = sum(1 for a, b in zip(thresholds, thresholds[1:]) if a != b)
    results = {
        "n_steps": len(schedule),
        "n_changes": n_changes,
        "first_threshold": thresholds[0],
        "last_threshold": thresholds[-1],
    }
    return StudyReport(
        study="dsat-trajectory", seed=cfg.seed, config=asdict(cfg),
        results=results, table=tuple(rows),
    )


def run_sampling_ratio_study(
    cfg: SimConfig,
    fixed_sigma: float,
    iou_thr: float = DEFAULT_IOU_THRESHOLD,
    score_thr: float = DEFAULT_SCORE_THRESHOLD,
) -> StudyReport:
    """Pseudo-label retention under the adaptive threshold versus a fixed one.

    Counts labels kept by the F1-peak threshold and by ``fixed_sigma`` on the
    same scene, both as raw counts and as ratios to the ground-truth total.
    """
    if not (0.0 <= fixed_sigma <= 1.0):
        raise ValueError(f"fixed_sigma must be in [0, 1], got {fixed_sigma!r}")
    gts, dets = generate_scene(cfg)
    labels = nms_unc(dets, iou_thr, score_thr)
    curve = pr_curve(pseudo_label_detections(labels), gts)
    dsat_sigma, peak = select_threshold(curve)

    rows = []
    count_dsat = 0
    count_fixed = 0
    for l in labels:
        kept_dsat = l.score >= dsat_sigma
        kept_fixed = l.score >= fixed_sigma
        count_dsat += kept_dsat
        count_fixed += kept_fixed
        rows.append(
            {
                "score": float(l.score),
                "uncertainty": float(l.uncertainty),
                "kept_dsat": bool(kept_dsat),
                "kept_fixed": bool(kept_fixed),
            }
        )
    n_gt = len(gts)
    results = {
        "dsat_threshold": dsat_sigma,
        "dsat_peak_f1": peak,
        "fixed_sigma": float(fixed_sigma),
        "n_labels": len(labels),
        "n_gt": n_gt,
        "count_dsat": int(count_dsat),
        "count_fixed": int(count_fixed),
        "ratio_dsat": count_dsat / n_gt if n_gt else 0.0,
        "ratio_fixed": count_fixed / n_gt if n_gt else 0.0,
    }
    return StudyReport(
        study="sampling-ratio", seed=cfg.seed, config=asdict(cfg),
        results=results, table=tuple(rows),
    )
