"""Greedy non-maximum suppression and its uncertainty-reporting variant.

Both entry points share one greedy kernel. Suppression runs independently per
(image_id, class_id) group: boxes are visited in descending score order, the
current maximum absorbs every remaining box whose IoU with it reaches the IoU
threshold, and the absorbed set forms that maximum's cluster. ``standard_nms``
keeps every cluster maximum; ``nms_unc`` keeps only maxima whose cluster has a
genuine redundant companion (size > 1) and reports the cluster's normalized
coordinate dispersion as the kept box's regression uncertainty:

    uncertainty = (std_x1/w_mean + std_y1/h_mean + std_x2/w_mean + std_y2/h_mean) / 4

using the population standard deviation over cluster members and the cluster's
mean width and height. The value is dimensionless, translation invariant and
scale invariant.

Determinism conventions, pinned so output is bit-identical across runs,
platforms and sharding:

* score ties break by (x1, y1, x2, y2, input index) ascending;
* cluster statistics are computed over members in ascending input order;
* the cluster maximum always joins its own cluster and leaves the pool, even
  when it has zero area (its IoU with itself would be 0 under the union-zero
  guard, which would otherwise wedge the pool scan);
* output is sorted by (image_id, score descending, tie-break).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .geometry import BBox

DEFAULT_IOU_THRESHOLD = 0.6
DEFAULT_SCORE_THRESHOLD = 0.4
INFERENCE_SCORE_THRESHOLD = 0.05


@dataclass(frozen=True)
class Detection:
    """One scored dense prediction."""

    bbox: BBox
    score: float
    class_id: int = 0
    image_id: int = 0
    centerness: Optional[float] = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score!r}")
        if self.centerness is not None and not (0.0 <= self.centerness <= 1.0):
            raise ValueError(f"centerness must be in [0, 1], got {self.centerness!r}")
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id!r}")
        if self.image_id < 0:
            raise ValueError(f"image_id must be >= 0, got {self.image_id!r}")


@dataclass(frozen=True)
class PseudoLabel:
    """A kept box with its final score and cluster regression uncertainty."""

    bbox: BBox
    score: float
    uncertainty: float
    cluster_size: int
    class_id: int = 0
    image_id: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score!r}")
        if self.uncertainty < 0.0 or not math.isfinite(self.uncertainty):
            raise ValueError(f"uncertainty must be finite and >= 0, got {self.uncertainty!r}")
        if self.cluster_size < 2:
            raise ValueError(f"cluster_size must be >= 2, got {self.cluster_size!r}")


@dataclass(frozen=True)
class ClusterStats:
    """Per-coordinate population std (x1, y1, x2, y2) and mean extent of a cluster."""

    std: tuple[float, float, float, float]
    mean_width: float
    mean_height: float
    count: int


@dataclass
class NmsDiagnostics:
    """Tally of what suppression silently dropped."""

    prefiltered: int = 0
    singleton_drops: int = 0
    degenerate_drops: int = 0
    emitted: int = 0
    kept_standard: int = 0
    per_class_singletons: dict[int, int] = field(default_factory=dict)


class DegenerateClusterError(ValueError):
    """Cluster mean width or height is zero; normalization is undefined."""


def cluster_stats(cluster: Sequence[BBox]) -> ClusterStats:
    """Population std per coordinate plus mean width/height, in the given member order."""
    if len(cluster) < 2:
        raise ValueError(f"cluster needs >= 2 boxes, got {len(cluster)}")
    coords = np.array([b.as_tuple() for b in cluster], dtype=np.float64)
    return _cluster_stats_from_coords(coords)


def _cluster_stats_from_coords(coords: np.ndarray) -> ClusterStats:
    # centering on one member leaves the std unchanged mathematically but
    # keeps identical rows at exactly zero dispersion (the raw column mean
    # of n equal floats can round, leaving ulp-scale residue)
    std = (coords - coords[0]).std(axis=0)
    mean_width = float((coords[:, 2] - coords[:, 0]).mean())
    mean_height = float((coords[:, 3] - coords[:, 1]).mean())
    return ClusterStats(
        std=(float(std[0]), float(std[1]), float(std[2]), float(std[3])),
        mean_width=mean_width,
        mean_height=mean_height,
        count=coords.shape[0],
    )


def _uncertainty_from_stats(stats: ClusterStats, flat_index: bool) -> float:
    if stats.mean_width <= 0.0 or stats.mean_height <= 0.0:
        raise DegenerateClusterError(
            f"cluster mean extent degenerate (w={stats.mean_width}, h={stats.mean_height})"
        )
    s = stats.std
    w, h = stats.mean_width, stats.mean_height
    if flat_index:
        # Alternate index reading std[i+j]: double-counts y1, never reads y2.
        # Kept for comparison only.
        return (s[0] / w + s[1] / h + s[1] / w + s[2] / h) / 4.0
    return (s[0] / w + s[1] / h + s[2] / w + s[3] / h) / 4.0


def cluster_uncertainty(cluster: Sequence[BBox], *, flat_index: bool = False) -> float:
    """Normalized coordinate dispersion of a redundant-box cluster.

    Requires >= 2 boxes. Raises DegenerateClusterError when the cluster's mean
    width or height is zero (callers drop such clusters). Statistics are
    computed in the given member order; callers that need bit-stable results
    across permutations should canonicalize the order first.
    """
    return _uncertainty_from_stats(cluster_stats(cluster), flat_index)


def _canonical_perm(
    coords: np.ndarray, scores: np.ndarray, image_ids: np.ndarray
) -> np.ndarray:
    """Sort permutation: image_id asc, score desc, then coords and input index asc."""
    idx = np.arange(coords.shape[0])
    return np.lexsort(
        (idx, coords[:, 3], coords[:, 2], coords[:, 1], coords[:, 0], -scores, image_ids)
    )


def _iou_one_vs_many(
    box: np.ndarray, box_area: float, coords: np.ndarray, areas: np.ndarray
) -> np.ndarray:
    ix1 = np.maximum(box[0], coords[:, 0])
    iy1 = np.maximum(box[1], coords[:, 1])
    ix2 = np.minimum(box[2], coords[:, 2])
    iy2 = np.minimum(box[3], coords[:, 3])
    inter = np.maximum(0.0, ix2 - ix1) * np.maximum(0.0, iy2 - iy1)
    union = box_area + areas - inter
    out = np.zeros_like(union)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def _suppress_group(
    coords: np.ndarray,
    areas: np.ndarray,
    order: np.ndarray,
    iou_thr: float,
) -> Iterator[tuple[int, np.ndarray]]:
    """Greedy suppression over one (image, class) group.

    ``order`` holds original indices in canonical processing order. Yields
    (kept index, cluster member indices) with members in coordinate order
    (x1, y1, x2, y2 ascending), which makes downstream statistics bit-stable
    under any permutation or sharding of the input.
    """
    pool = order
    while pool.size:
        m = pool[0]
        ious = _iou_one_vs_many(coords[m], areas[m], coords[pool], areas[pool])
        mask = ious >= iou_thr
        mask[0] = True  # the maximum always leaves the pool
        members = pool[mask]
        mc = coords[members]
        cluster = members[np.lexsort((members, mc[:, 3], mc[:, 2], mc[:, 1], mc[:, 0]))]
        pool = pool[~mask]
        yield int(m), cluster


def _validate_thresholds(iou_thr: float, score_thr: float) -> None:
    if not (0.0 < iou_thr <= 1.0):
        raise ValueError(f"iou_thr must be in (0, 1], got {iou_thr!r}")
    if not (0.0 <= score_thr <= 1.0):
        raise ValueError(f"score_thr must be in [0, 1], got {score_thr!r}")


def _to_arrays(dets: Sequence[Detection]):
    coords = np.array([d.bbox.as_tuple() for d in dets], dtype=np.float64)
    scores = np.array([d.score for d in dets], dtype=np.float64)
    class_ids = np.array([d.class_id for d in dets], dtype=np.int64)
    image_ids = np.array([d.image_id for d in dets], dtype=np.int64)
    return coords, scores, class_ids, image_ids


def _clusters(
    coords: np.ndarray,
    scores: np.ndarray,
    class_ids: np.ndarray,
    image_ids: np.ndarray,
    iou_thr: float,
    score_thr: float,
    diag: NmsDiagnostics,
) -> list[tuple[int, np.ndarray]]:
    """All (kept index, cluster indices) pairs, in canonical kept order."""
    alive = scores >= score_thr
    diag.prefiltered = int((~alive).sum())
    areas = (coords[:, 2] - coords[:, 0]) * (coords[:, 3] - coords[:, 1])

    kept: list[tuple[int, np.ndarray]] = []
    for cls in np.unique(class_ids[alive]):
        sel = np.flatnonzero(alive & (class_ids == cls))
        perm = _canonical_perm(coords[sel], scores[sel], image_ids[sel])
        order = sel[perm]
        # groups span multiple images only when the caller ignores the
        # one-image precondition; the canonical order keeps images contiguous
        for img in np.unique(image_ids[order]):
            sub = order[image_ids[order] == img]
            kept.extend(_suppress_group(coords, areas, sub, iou_thr))

    def sort_key(item: tuple[int, np.ndarray]):
        i = item[0]
        return (
            image_ids[i], -scores[i],
            coords[i, 0], coords[i, 1], coords[i, 2], coords[i, 3],
            class_ids[i], i,
        )

    kept.sort(key=sort_key)
    return kept


def standard_nms(
    dets: Sequence[Detection],
    iou_thr: float = DEFAULT_IOU_THRESHOLD,
    score_thr: float = INFERENCE_SCORE_THRESHOLD,
) -> list[Detection]:
    """Greedy per-class NMS. Returns kept detections, score descending."""
    _validate_thresholds(iou_thr, score_thr)
    if not dets:
        return []
    diag = NmsDiagnostics()
    coords, scores, class_ids, image_ids = _to_arrays(dets)
    kept = _clusters(coords, scores, class_ids, image_ids, iou_thr, score_thr, diag)
    return [dets[i] for i, _ in kept]


def nms_unc(
    dets: Sequence[Detection],
    iou_thr: float = DEFAULT_IOU_THRESHOLD,
    score_thr: float = DEFAULT_SCORE_THRESHOLD,
    *,
    flat_index: bool = False,
) -> list[PseudoLabel]:
    """Suppression that emits pseudo labels carrying cluster regression uncertainty.

    Singleton clusters emit nothing; clusters whose mean width or height is
    zero are dropped. Use nms_unc_with_diagnostics to see those tallies.
    """
    labels, _ = nms_unc_with_diagnostics(
        dets, iou_thr, score_thr, flat_index=flat_index
    )
    return labels


def nms_unc_with_diagnostics(
    dets: Sequence[Detection],
    iou_thr: float = DEFAULT_IOU_THRESHOLD,
    score_thr: float = DEFAULT_SCORE_THRESHOLD,
    *,
    flat_index: bool = False,
) -> tuple[list[PseudoLabel], NmsDiagnostics]:
    """nms_unc plus the tally of prefiltered, singleton and degenerate drops."""
    _validate_thresholds(iou_thr, score_thr)
    diag = NmsDiagnostics()
    if not dets:
        return [], diag

    coords, scores, class_ids, image_ids = _to_arrays(dets)
    kept = _clusters(coords, scores, class_ids, image_ids, iou_thr, score_thr, diag)
    labels: list[PseudoLabel] = []
    for i, cluster in kept:
        diag.kept_standard += 1
        if cluster.size < 2:
            diag.singleton_drops += 1
            cls = dets[i].class_id
            diag.per_class_singletons[cls] = diag.per_class_singletons.get(cls, 0) + 1
            continue
        stats = _cluster_stats_from_coords(coords[cluster])
        try:
            unc = _uncertainty_from_stats(stats, flat_index)
        except DegenerateClusterError:
            diag.degenerate_drops += 1
            continue
        d = dets[i]
        labels.append(
            PseudoLabel(
                bbox=d.bbox,
                score=d.score,
                uncertainty=unc,
                cluster_size=int(cluster.size),
                class_id=d.class_id,
                image_id=d.image_id,
            )
        )
    diag.emitted = len(labels)
    return labels, diag


def pseudo_label_detections(labels: Sequence[PseudoLabel]) -> list[Detection]:
    """View pseudo labels as plain detections (score is already final)."""
    return [
        Detection(bbox=l.bbox, score=l.score, class_id=l.class_id, image_id=l.image_id)
        for l in labels
    ]
