"""Dynamic self-adaptive threshold control.

Holds the live classification-score gate for pseudo labels and re-selects it
on a fixed iteration cadence as the confidence-grid point with the highest F1
on the caller's evaluation set. Ties on F1 break toward the higher threshold:
when quality and quantity trade off evenly, prefer the smaller, cleaner label
pool. State is an immutable value; updates return a new state.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

from .metrics import (
    DEFAULT_MATCH_IOU,
    CurveLike,
    GridSpec,
    GroundTruth,
    curve_points,
    pr_curve,
)
from .nms import Detection

DEFAULT_SIGMA_CLS = 0.5
DEFAULT_UPDATE_PERIOD = 4000


class HistoryEntry(NamedTuple):
    iteration: int
    threshold: float
    peak_f1: float


@dataclass(frozen=True)
class DsatState:
    """Live filtering threshold plus its update history and grid config.

    Before the first update the threshold sits at the best fixed baseline
    (0.5). After any update it is always a grid value. A state built by
    fixed_threshold_baseline never updates (adaptive=False).
    """

    sigma_cls: float = DEFAULT_SIGMA_CLS
    update_period_iters: int = DEFAULT_UPDATE_PERIOD
    grid: GridSpec = GridSpec()
    match_iou: float = DEFAULT_MATCH_IOU
    history: tuple[HistoryEntry, ...] = ()
    adaptive: bool = True

    def __post_init__(self) -> None:
        if not (0.0 <= self.sigma_cls <= 1.0):
            raise ValueError(f"sigma_cls must be in [0, 1], got {self.sigma_cls!r}")
        if self.update_period_iters <= 0:
            raise ValueError(
                f"update_period_iters must be > 0, got {self.update_period_iters!r}"
            )


def select_threshold(curve: CurveLike) -> tuple[float, float]:
    """Grid threshold with maximal F1; ties go to the highest threshold."""
    points = curve_points(curve)
    if not points:
        raise ValueError("cannot select a threshold from an empty curve")
    best = points[0]
    for p in points[1:]:
        if p.f1 >= best.f1:
            best = p
    return best.threshold, best.f1


def maybe_update(
    state: DsatState,
    iteration: int,
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
) -> DsatState:
    """Re-select the threshold when the iteration hits the update cadence.

    Off-cadence iterations, non-adaptive states, and repeated calls at an
    already-recorded iteration return the state unchanged.
    """
    if iteration < 0:
        raise ValueError(f"iteration must be >= 0, got {iteration!r}")
    if not state.adaptive:
        return state
    if iteration % state.update_period_iters != 0:
        return state
    if state.history and iteration <= state.history[-1].iteration:
        return state
    curve = pr_curve(dets, gts, state.grid, state.match_iou)
    threshold, peak = select_threshold(curve)
    return replace(
        state,
        sigma_cls=threshold,
        history=state.history + (HistoryEntry(iteration, threshold, peak),),
    )


def fixed_threshold_baseline(sigma: float = DEFAULT_SIGMA_CLS) -> DsatState:
    """Ablation-parity state pinned at a fixed threshold; maybe_update is a no-op."""
    return DsatState(sigma_cls=sigma, adaptive=False)


HISTORY_CSV_HEADER = "iteration,threshold,peak_f1"


def history_to_csv(state: DsatState) -> str:
    """Update history as CSV (the threshold-trajectory export)."""
    lines = [HISTORY_CSV_HEADER]
    for entry in state.history:
        lines.append(f"{entry.iteration},{entry.threshold:.6f},{entry.peak_f1:.6f}")
    return "\n".join(lines) + "\n"
