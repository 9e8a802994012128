"""Frame-level fuzzy label signals and segment maps.

A change point contributes a triangular ramp that decays linearly to zero
over `FUZZY_RADIUS` seconds on each side; overlapping ramps combine by max
so labels stay in [0, 1]. Segments are the frame runs between change
points and drive contrastive triplet sampling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .annotations import ChangePoints
from .errors import ValidationError

# Linear decay radius of the boundary label, seconds.
FUZZY_RADIUS = 0.2

# Alias: length-T float vector with entries in [0, 1].
LabelSignal = np.ndarray


@dataclass(frozen=True)
class FrameGrid:
    """Uniform frame grid; frame i sits at instant origin + i / frame_rate."""

    num_frames: int
    frame_rate: float = 50.0
    origin: float = 0.0

    def __post_init__(self):
        if self.num_frames < 1:
            raise ValidationError(f"num_frames must be >= 1, got {self.num_frames}")
        if self.frame_rate <= 0:
            raise ValidationError(f"frame_rate must be positive, got {self.frame_rate}")

    def instants(self) -> np.ndarray:
        return self.origin + np.arange(self.num_frames) / self.frame_rate

    def instant(self, frame: int) -> float:
        return self.origin + frame / self.frame_rate

    def nearest_frame(self, t: float) -> int:
        """Round-half-up snap of an instant onto the grid, clamped to range."""
        idx = int(np.floor((t - self.origin) * self.frame_rate + 0.5))
        return min(max(idx, 0), self.num_frames - 1)

    @property
    def duration(self) -> float:
        return self.num_frames / self.frame_rate


@dataclass(frozen=True)
class SegmentMap:
    """Partition of [0, T) into half-open frame ranges between boundaries.

    `boundaries` are the interior boundary frames (strictly inside the
    grid); segment k covers [starts[k], ends[k]).
    """

    num_frames: int
    boundaries: tuple[int, ...]

    def __post_init__(self):
        for b in self.boundaries:
            if not 0 < b < self.num_frames:
                raise ValidationError(f"boundary frame {b} not interior to [0, {self.num_frames})")
        for a, b in zip(self.boundaries, self.boundaries[1:]):
            if b <= a:
                raise ValidationError("boundaries not strictly increasing")

    @property
    def starts(self) -> tuple[int, ...]:
        return (0,) + self.boundaries

    @property
    def ends(self) -> tuple[int, ...]:
        return self.boundaries + (self.num_frames,)

    @property
    def num_segments(self) -> int:
        return len(self.boundaries) + 1

    def segment_of(self, frame: int) -> int:
        """Ordinal of the segment containing the frame."""
        if not 0 <= frame < self.num_frames:
            raise ValidationError(f"frame {frame} outside [0, {self.num_frames})")
        return int(np.searchsorted(np.asarray(self.boundaries), frame, side="right"))

    def segment_ids(self) -> np.ndarray:
        """Length-T vector of segment ordinals."""
        ids = np.zeros(self.num_frames, dtype=np.int64)
        for b in self.boundaries:
            ids[b:] += 1
        return ids


def fuzzy_labels(
    cps: ChangePoints, grid: FrameGrid, radius: float = FUZZY_RADIUS
) -> LabelSignal:
    """Triangular boundary labels: max over change points of 1 - |t - c| / radius.

    Frames farther than `radius` from every change point are exactly 0.
    """
    t = grid.instants()
    if not cps.times:
        return np.zeros(grid.num_frames)
    times = np.asarray(cps.times)
    dist = np.abs(t[:, None] - times[None, :]).min(axis=1)
    return np.maximum(0.0, 1.0 - dist / radius)


def segment_map(cps: ChangePoints, grid: FrameGrid) -> SegmentMap:
    """Snap change points to the grid and cut [0, T) at the interior frames.

    Points snapping onto the same frame collapse to one boundary; points
    snapping onto the grid ends add no boundary.
    """
    snapped = sorted({grid.nearest_frame(c) for c in cps.times})
    interior = tuple(b for b in snapped if 0 < b < grid.num_frames)
    return SegmentMap(grid.num_frames, interior)


def labels_to_csv(values: LabelSignal) -> str:
    """CSV export (`frame_index,value`) for plotting."""
    lines = ["frame_index,value"]
    lines += [f"{i},{v:.6f}" for i, v in enumerate(np.asarray(values))]
    return "".join(line + "\n" for line in lines)
