"""COCO-style JSON ingestion/serialization and curve CSV files.

Boxes are corner-format (x1, y1, x2, y2) everywhere in memory and COCO
(x, y, width, height) at rest; this module is the only place widths and
heights appear. Pseudo-label files are COCO-results records extended with
"uncertainty" and "cluster_size", so stock COCO tooling still reads them.

Saving must lose nothing: floats are emitted in shortest round-trip decimal
form, and the stored width is not simply x2 - x1 (whose re-addition to x1 can
land one ulp off) but the float w for which x1 + w rounds to exactly x2,
found by a short monotone walk around x2 - x1. Same for height.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

from .geometry import BBox
from .metrics import CURVE_CSV_HEADER, PRPoint
from .nms import Detection, PseudoLabel
from .targets import TargetSets, final_score

PathLike = Union[str, Path]


class ParseError(ValueError):
    """Input file violates the expected shape; message names the bad record."""


@dataclass(frozen=True)
class Dataset:
    """Ground truths plus the image/category id universe they reference."""

    ground_truths: tuple
    image_ids: frozenset
    category_ids: frozenset


def _exact_extent(lo: float, hi: float) -> float:
    """Smallest-effort float w such that lo + w rounds to exactly hi."""
    w = hi - lo
    if lo + w == hi:
        return w
    # Monotone in w, so walk ulp by ulp toward the target; the initial
    # subtraction is within half an ulp, so a few steps always suffice for
    # finite same-scale coordinates.
    direction = math.inf if lo + w < hi else -math.inf
    for _ in range(64):
        w = math.nextafter(w, direction)
        s = lo + w
        if s == hi:
            return w
        if (direction == math.inf) != (s < hi):
            break
    raise ValueError(f"extent from {lo!r} to {hi!r} has no exact (x, w) encoding")


def bbox_to_xywh(box: BBox) -> list:
    return [
        box.x1,
        box.y1,
        _exact_extent(box.x1, box.x2),
        _exact_extent(box.y1, box.y2),
    ]


def _num(record: dict, key: str, where: str) -> float:
    v = record.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}: field {key!r} missing or not a number")
    return float(v)


def _int(record: dict, key: str, where: str) -> int:
    v = record.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{where}: field {key!r} missing or not an integer")
    return v


def _bbox(record: dict, where: str) -> BBox:
    raw = record.get("bbox")
    if (
        not isinstance(raw, list)
        or len(raw) != 4
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in raw)
    ):
        raise ParseError(f"{where}: field 'bbox' must be [x, y, width, height]")
    x, y, w, h = (float(v) for v in raw)
    if w < 0 or h < 0:
        raise ParseError(f"{where}: bbox width/height must be >= 0")
    try:
        return BBox(x, y, x + w, y + h)
    except ValueError as e:
        raise ParseError(f"{where}: {e}") from e


def _load_json(path: PathLike):
    with open(path, encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: not valid JSON ({e})") from e


def _dump_json(payload, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def load_annotations(path: PathLike) -> Dataset:
    """Parse a COCO annotation file into corner-format ground truths."""
    from .metrics import GroundTruth

    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    for key in ("images", "annotations", "categories"):
        if not isinstance(doc.get(key), list):
            raise ParseError(f"{path}: missing top-level list {key!r}")

    image_ids = frozenset(
        _int(img, "id", f"images[{i}]") for i, img in enumerate(_dicts(doc["images"], "images"))
    )
    category_ids = frozenset(
        _int(cat, "id", f"categories[{i}]")
        for i, cat in enumerate(_dicts(doc["categories"], "categories"))
    )

    gts = []
    for i, ann in enumerate(_dicts(doc["annotations"], "annotations")):
        where = f"annotations[{i}]"
        image_id = _int(ann, "image_id", where)
        category_id = _int(ann, "category_id", where)
        if image_id not in image_ids:
            raise ParseError(f"{where}: unknown image_id {image_id}")
        if category_id not in category_ids:
            raise ParseError(f"{where}: unknown category_id {category_id}")
        box = _bbox(ann, where)
        try:
            gts.append(GroundTruth(bbox=box, class_id=category_id, image_id=image_id))
        except ValueError as e:
            raise ParseError(f"{where}: {e}") from e
    return Dataset(
        ground_truths=tuple(gts), image_ids=image_ids, category_ids=category_ids
    )


def _dicts(items: list, name: str) -> list:
    for i, it in enumerate(items):
        if not isinstance(it, dict):
            raise ParseError(f"{name}[{i}]: must be a JSON object")
    return items


def load_detections(path: PathLike) -> list:
    """Parse a COCO results array; centerness, when present, is folded into
    the score and not retained."""
    doc = _load_json(path)
    if not isinstance(doc, list):
        raise ParseError(f"{path}: top level must be a JSON array")
    dets = []
    for i, rec in enumerate(_dicts(doc, "results")):
        where = f"results[{i}]"
        score = _num(rec, "score", where)
        if not (0.0 <= score <= 1.0):
            raise ParseError(f"{where}: score {score!r} outside [0, 1]")
        centerness = None
        if "centerness" in rec:
            centerness = _num(rec, "centerness", where)
            if not (0.0 <= centerness <= 1.0):
                raise ParseError(f"{where}: centerness {centerness!r} outside [0, 1]")
        try:
            dets.append(
                Detection(
                    bbox=_bbox(rec, where),
                    score=final_score(score, centerness),
                    class_id=_int(rec, "category_id", where),
                    image_id=_int(rec, "image_id", where),
                )
            )
        except ValueError as e:
            raise ParseError(f"{where}: {e}") from e
    return dets


def save_detections(dets: Sequence[Detection], path: PathLike) -> None:
    _dump_json([_det_record(d) for d in dets], path)


def _det_record(d: Detection) -> dict:
    rec = {
        "image_id": d.image_id,
        "category_id": d.class_id,
        "bbox": bbox_to_xywh(d.bbox),
        "score": d.score,
    }
    if d.centerness is not None:
        rec["centerness"] = d.centerness
    return rec


def _label_record(l: PseudoLabel) -> dict:
    return {
        "image_id": l.image_id,
        "category_id": l.class_id,
        "bbox": bbox_to_xywh(l.bbox),
        "score": l.score,
        "uncertainty": l.uncertainty,
        "cluster_size": l.cluster_size,
    }


def save_pseudo_labels(labels: Sequence[PseudoLabel], path: PathLike) -> None:
    _dump_json([_label_record(l) for l in labels], path)


def _parse_label(rec: dict, where: str) -> PseudoLabel:
    try:
        return PseudoLabel(
            bbox=_bbox(rec, where),
            score=_num(rec, "score", where),
            uncertainty=_num(rec, "uncertainty", where),
            cluster_size=_int(rec, "cluster_size", where),
            class_id=_int(rec, "category_id", where),
            image_id=_int(rec, "image_id", where),
        )
    except ParseError:
        raise
    except ValueError as e:
        raise ParseError(f"{where}: {e}") from e


def load_pseudo_labels(path: PathLike) -> list:
    doc = _load_json(path)
    if not isinstance(doc, list):
        raise ParseError(f"{path}: top level must be a JSON array")
    return [
        _parse_label(rec, f"labels[{i}]") for i, rec in enumerate(_dicts(doc, "labels"))
    ]


def save_target_sets(
    ts: TargetSets, sigma_cls: float, sigma_unc: float, path: PathLike
) -> None:
    _dump_json(
        {
            "sigma_cls": sigma_cls,
            "sigma_unc": sigma_unc,
            "cls_targets": [_label_record(l) for l in ts.cls_targets],
            "reg_targets": [_label_record(l) for l in ts.reg_targets],
        },
        path,
    )


def load_target_sets(path: PathLike) -> tuple:
    """Returns (TargetSets, sigma_cls, sigma_unc)."""
    doc = _load_json(path)
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    sigma_cls = _num(doc, "sigma_cls", str(path))
    sigma_unc = _num(doc, "sigma_unc", str(path))
    sets = {}
    for key in ("cls_targets", "reg_targets"):
        if not isinstance(doc.get(key), list):
            raise ParseError(f"{path}: missing list {key!r}")
        sets[key] = tuple(
            _parse_label(rec, f"{key}[{i}]")
            for i, rec in enumerate(_dicts(doc[key], key))
        )
    return TargetSets(**sets), sigma_cls, sigma_unc


def save_curve(points: Sequence[PRPoint], path: PathLike) -> None:
    from .metrics import curve_to_csv

    Path(path).write_text(curve_to_csv(points), encoding="utf-8")


def load_curve(path: PathLike) -> list:
    """Read a curve CSV back into PRPoints carrying the file's own rounding."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CURVE_CSV_HEADER:
        raise ParseError(f"{path}: first line must be {CURVE_CSV_HEADER!r}")
    points = []
    for i, ln in enumerate(lines[1:]):
        cells = ln.split(",")
        if len(cells) != 7:
            raise ParseError(f"{path}: row {i} must have 7 columns")
        try:
            points.append(
                PRPoint(
                    threshold=float(cells[0]),
                    precision=float(cells[1]),
                    recall=float(cells[2]),
                    f1=float(cells[3]),
                    tp=int(cells[4]),
                    fp=int(cells[5]),
                    n_gt=int(cells[6]),
                )
            )
        except ValueError as e:
            raise ParseError(f"{path}: row {i}: {e}") from e
    return points
