"""Change-point extraction from per-frame probability curves.

Frames at or above the threshold form runs; each run contributes its peak
frame (leftmost on ties) as one candidate instant. Candidates closer than
min_gap are merged, keeping the more probable one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annotations import ChangePoints
from .errors import ShapeError, ValidationError
from .labeling import FrameGrid

DEFAULT_THRESHOLD = 0.35
DEFAULT_MIN_GAP = 0.2


@dataclass(frozen=True)
class DetectionConfig:
    threshold: float = DEFAULT_THRESHOLD
    min_gap: float = DEFAULT_MIN_GAP

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValidationError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.min_gap < 0.0:
            raise ValidationError(f"min_gap must be non-negative, got {self.min_gap}")


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [start, stop) runs of True."""
    padded = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    starts = np.flatnonzero(padded == 1)
    stops = np.flatnonzero(padded == -1)
    return list(zip(starts, stops))


def detect_change_points(
    probs: np.ndarray,
    grid: FrameGrid,
    config: DetectionConfig | None = None,
) -> ChangePoints:
    cfg = config or DetectionConfig()
    probs = np.asarray(probs, dtype=np.float64).ravel()
    if probs.size != grid.num_frames:
        raise ShapeError(
            f"{probs.size} probabilities for a {grid.num_frames}-frame grid"
        )
    if not np.isfinite(probs).all():
        raise ValidationError("probabilities contain non-finite values")
    kept: list[tuple[float, float]] = []  # (time, prob), time increasing
    for start, stop in _runs(probs >= cfg.threshold):
        peak = start + int(np.argmax(probs[start:stop]))
        t = grid.instant(peak)
        p = probs[peak]
        if kept and t - kept[-1][0] < cfg.min_gap:
            if p > kept[-1][1]:
                kept[-1] = (t, p)
        else:
            kept.append((t, p))
    return ChangePoints(tuple(t for t, _ in kept))


def points_to_csv(rows: list[tuple[str, ChangePoints]]) -> str:
    """CSV with one detected instant per line: file_id,time_seconds."""
    lines = ["file_id,time_seconds"]
    for file_id, points in rows:
        for t in points.times:
            lines.append(f"{file_id},{t:.6f}")
    return "\n".join(lines) + "\n"
