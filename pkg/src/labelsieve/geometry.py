"""Axis-aligned box representation and overlap arithmetic.

Boxes use the corner convention (x1, y1) top-left, (x2, y2) bottom-right in
continuous coordinates: no "+1" pixel term in areas or IoU. Zero-area boxes
are representable; IoU against them is 0 via the union-zero guard.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BBox:
    """Corner-format axis-aligned box. Rejects inverted corners and non-finite coordinates."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for name in ("x1", "y1", "x2", "y2"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"BBox.{name} must be finite, got {v!r}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(
                f"inverted corners: ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def scale(self, s: float) -> "BBox":
        return BBox(self.x1 * s, self.y1 * s, self.x2 * s, self.y2 * s)


def area(box: BBox) -> float:
    """Box area, (x2 - x1) * (y2 - y1). Zero for degenerate boxes."""
    return box.width * box.height


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes, in [0, 1].

    Defined as 0 when the union area is 0 (both boxes degenerate), so
    degenerate boxes never match anything, themselves included.
    """
    ix1 = max(a.x1, b.x1)
    iy1 = max(a.y1, b.y1)
    ix2 = min(a.x2, b.x2)
    iy2 = min(a.y2, b.y2)
    inter = max(0.0, ix2 - ix1) * max(0.0, iy2 - iy1)
    union = area(a) + area(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union
