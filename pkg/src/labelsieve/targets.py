"""Target-set construction from pseudo labels, final-score rule, EMA update.

The classification-target and regression-target sets are filtered
independently from the same pseudo-label pool: score gates classification
targets (inclusive, matching the grid semantics of the threshold controller),
uncertainty gates regression targets (strictly below the gate). The sets may
overlap and in general neither contains the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dsat import DEFAULT_SIGMA_CLS
from .nms import PseudoLabel

DEFAULT_SIGMA_UNC = 0.08
DEFAULT_EMA_RATE = 0.999


@dataclass(frozen=True)
class TargetSets:
    """Label sets a detector's unsupervised loss would consume."""

    cls_targets: tuple[PseudoLabel, ...]
    reg_targets: tuple[PseudoLabel, ...]

    @property
    def n_cls(self) -> int:
        return len(self.cls_targets)

    @property
    def n_reg(self) -> int:
        return len(self.reg_targets)


def final_score(
    cls_score: float, centerness: Optional[float] = None, *, sqrt_mode: bool = False
) -> float:
    """Classification score rescaled by centerness when one is present.

    Plain product by default (anchor-free heads); passthrough without
    centerness (anchor-based heads). sqrt_mode takes the geometric mean
    instead, for experimentation.
    """
    if not (0.0 <= cls_score <= 1.0):
        raise ValueError(f"cls_score must be in [0, 1], got {cls_score!r}")
    if centerness is None:
        return cls_score
    if not (0.0 <= centerness <= 1.0):
        raise ValueError(f"centerness must be in [0, 1], got {centerness!r}")
    if sqrt_mode:
        return math.sqrt(cls_score * centerness)
    return cls_score * centerness


def build_target_sets(
    labels: Sequence[PseudoLabel],
    sigma_cls: float = DEFAULT_SIGMA_CLS,
    sigma_unc: float = DEFAULT_SIGMA_UNC,
) -> TargetSets:
    """Independent score and uncertainty filters over one pseudo-label pool.

    score >= sigma_cls selects classification targets; uncertainty strictly
    below sigma_unc selects regression targets. Labels pass through
    unmodified.
    """
    if not (0.0 <= sigma_cls <= 1.0):
        raise ValueError(f"sigma_cls must be in [0, 1], got {sigma_cls!r}")
    if sigma_unc < 0.0:
        raise ValueError(f"sigma_unc must be >= 0, got {sigma_unc!r}")
    return TargetSets(
        cls_targets=tuple(l for l in labels if l.score >= sigma_cls),
        reg_targets=tuple(l for l in labels if l.uncertainty < sigma_unc),
    )


def ema_update(
    teacher: Sequence[float] | np.ndarray,
    student: Sequence[float] | np.ndarray,
    rate: float = DEFAULT_EMA_RATE,
) -> np.ndarray:
    """Element-wise rate*teacher + (1-rate)*student over flat parameter vectors."""
    if not (0.0 <= rate <= 1.0):
        raise ValueError(f"rate must be in [0, 1], got {rate!r}")
    t = np.asarray(teacher, dtype=np.float64)
    s = np.asarray(student, dtype=np.float64)
    if t.shape != s.shape:
        raise ValueError(f"parameter length mismatch: {t.shape} vs {s.shape}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(s))):
        raise ValueError("parameters must be finite")
    return rate * t + (1.0 - rate) * s
