"""Detection-to-ground-truth matching and the precision/recall/F1 curve.

Matching is greedy in descending score order per (image_id, class_id) group:
each detection takes the highest-IoU not-yet-matched ground truth provided
that IoU reaches the match threshold; every ground truth matches at most once.
Greedy matching is prefix-stable in score order, so one pass over the full
detection list yields the counts at every confidence threshold.

Counts are micro-aggregated: true/false positives and ground-truth totals are
pooled across all images and classes before precision and recall are formed.
Edge definitions keep the curve total over the grid: precision is 1 with no
predictions, recall is 1 with no ground truth, and F1 is 0 when precision and
recall are both 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .geometry import BBox, area, iou
from .nms import Detection

DEFAULT_MATCH_IOU = 0.5


@dataclass(frozen=True)
class GroundTruth:
    """One annotated object. Requires a positive-area box."""

    bbox: BBox
    class_id: int = 0
    image_id: int = 0

    def __post_init__(self) -> None:
        if area(self.bbox) <= 0.0:
            raise ValueError(f"ground-truth box must have positive area: {self.bbox}")
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id!r}")
        if self.image_id < 0:
            raise ValueError(f"image_id must be >= 0, got {self.image_id!r}")


@dataclass(frozen=True)
class PRPoint:
    """Counts and derived rates at one confidence threshold."""

    threshold: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    n_gt: int

    @classmethod
    def from_counts(cls, threshold: float, tp: int, fp: int, n_gt: int) -> "PRPoint":
        precision = tp / (tp + fp) if tp + fp > 0 else 1.0
        recall = tp / n_gt if n_gt > 0 else 1.0
        return cls(
            threshold=threshold,
            precision=precision,
            recall=recall,
            f1=f1(precision, recall),
            tp=tp,
            fp=fp,
            n_gt=n_gt,
        )


@dataclass(frozen=True)
class GridSpec:
    """Inclusive confidence grid start, stop, step.

    Thresholds are generated by integer index (start + k*step, rounded to 10
    decimals) so repeated step addition cannot drift.
    """

    start: float = 0.05
    stop: float = 0.95
    step: float = 0.05

    def __post_init__(self) -> None:
        if not (0.0 <= self.start <= self.stop <= 1.0):
            raise ValueError(f"need 0 <= start <= stop <= 1, got {self.start}..{self.stop}")
        if self.step <= 0.0:
            raise ValueError(f"step must be > 0, got {self.step!r}")

    def thresholds(self) -> list[float]:
        n = int(np.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + k * self.step, 10) for k in range(n)]


@dataclass(frozen=True)
class F1Curve:
    """PRPoints over a grid, thresholds strictly increasing."""

    points: tuple[PRPoint, ...]
    grid: GridSpec = field(default_factory=GridSpec)
    match_iou: float = DEFAULT_MATCH_IOU

    def __post_init__(self) -> None:
        ts = [p.threshold for p in self.points]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("curve thresholds must be strictly increasing")


@dataclass(frozen=True)
class MatchResult:
    tp: int
    fp: int
    flags: tuple[bool, ...]  # aligned with the input detection order


def f1(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    s = precision + recall
    if s == 0.0:
        return 0.0
    return 2.0 * precision * recall / s


def match_detections(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    match_iou: float = DEFAULT_MATCH_IOU,
) -> MatchResult:
    """Greedy score-ordered matching, grouped by (image_id, class_id).

    IoU ties between candidate ground truths break toward the earliest ground
    truth in input order; detection score ties follow the suppression
    tie-break (coordinates, then input index).
    """
    flags = [False] * len(dets)

    groups: dict[tuple[int, int], list[int]] = {}
    for i, d in enumerate(dets):
        groups.setdefault((d.image_id, d.class_id), []).append(i)
    gt_groups: dict[tuple[int, int], list[int]] = {}
    for j, g in enumerate(gts):
        gt_groups.setdefault((g.image_id, g.class_id), []).append(j)

    for key, det_idx in groups.items():
        gt_idx = gt_groups.get(key, [])
        if not gt_idx:
            continue
        det_idx = sorted(
            det_idx,
            key=lambda i: (-dets[i].score, *dets[i].bbox.as_tuple(), i),
        )
        matched = [False] * len(gt_idx)
        for i in det_idx:
            best_j = -1
            best_iou = 0.0
            for jj, j in enumerate(gt_idx):
                if matched[jj]:
                    continue
                v = iou(dets[i].bbox, gts[j].bbox)
                if v > best_iou:
                    best_iou = v
                    best_j = jj
            if best_j >= 0 and best_iou >= match_iou:
                matched[best_j] = True
                flags[i] = True

    tp = sum(flags)
    return MatchResult(tp=tp, fp=len(dets) - tp, flags=tuple(flags))


def pr_curve(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    grid: GridSpec | None = None,
    match_iou: float = DEFAULT_MATCH_IOU,
    *,
    strict: bool = False,
) -> F1Curve:
    """Precision/recall/F1 at every grid threshold.

    A detection at exactly the threshold counts as retained; pass strict=True
    for the strictly-greater reading.
    """
    grid = grid if grid is not None else GridSpec()
    result = match_detections(dets, gts, match_iou)
    scores = np.array([d.score for d in dets], dtype=np.float64)
    flags = np.array(result.flags, dtype=bool)
    n_gt = len(gts)

    points = []
    for t in grid.thresholds():
        sel = scores > t if strict else scores >= t
        tp = int(np.count_nonzero(flags & sel))
        fp = int(np.count_nonzero(~flags & sel))
        points.append(PRPoint.from_counts(t, tp, fp, n_gt))
    return F1Curve(points=tuple(points), grid=grid, match_iou=match_iou)


CurveLike = Union[F1Curve, Sequence[PRPoint]]


def curve_points(curve: CurveLike) -> tuple[PRPoint, ...]:
    """The PRPoints of an F1Curve or a bare point sequence."""
    if isinstance(curve, F1Curve):
        return curve.points
    return tuple(curve)


CURVE_CSV_HEADER = "threshold,precision,recall,f1,tp,fp,n_gt"


def curve_to_csv(curve: CurveLike) -> str:
    """CSV text for a curve: pinned header, 6-decimal fixed floats."""
    lines = [CURVE_CSV_HEADER]
    for p in curve_points(curve):
        lines.append(
            f"{p.threshold:.6f},{p.precision:.6f},{p.recall:.6f},{p.f1:.6f},"
            f"{p.tp},{p.fp},{p.n_gt}"
        )
    return "\n".join(lines) + "\n"
