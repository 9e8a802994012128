"""Triplet sampling over segment maps for the contrastive objective.

Anchors are frames; positives come from the anchor's segment, negatives
from an adjacent segment. When the map has a single segment there is no
adjacent material, and the negative falls back to a random unit vector
(marked by the RANDOM_VECTOR sentinel and materialized at loss time).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .labeling import SegmentMap

# Sentinel negative index: resolve to a fresh random unit vector.
RANDOM_VECTOR = -1


@dataclass(frozen=True)
class Triplet:
    anchor: int
    positive: int
    negative: int  # frame index, or RANDOM_VECTOR

    def __post_init__(self):
        if self.anchor < 0 or self.positive < 0:
            raise ValidationError("triplet anchor/positive must be frame indices")
        if self.positive == self.anchor:
            raise ValidationError("triplet positive must differ from its anchor")
        if self.negative < 0 and self.negative != RANDOM_VECTOR:
            raise ValidationError(f"bad negative index {self.negative}")


@dataclass(frozen=True)
class SamplerConfig:
    rng_seed: int
    min_segment_frames: int = 2

    def __post_init__(self):
        if self.min_segment_frames < 1:
            raise ValidationError("min_segment_frames must be at least 1")

    def make_rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.rng_seed))

    def sample(self, segments: SegmentMap) -> list[Triplet]:
        return sample_triplets(segments, self.make_rng(), self.min_segment_frames)


def eligible_anchor_frames(segments: SegmentMap, min_segment_frames: int = 2) -> np.ndarray:
    """Frames whose segment is long enough to hold a distinct positive.

    A positive must differ from its anchor, so segments under two frames
    are always skipped no matter how small the configured minimum is.
    """
    ids = segments.segment_ids()
    counts = np.bincount(ids, minlength=segments.num_segments)
    return np.flatnonzero(counts[ids] >= max(2, min_segment_frames))


def sample_triplets(
    segments: SegmentMap,
    rng: np.random.Generator,
    min_segment_frames: int = 2,
) -> list[Triplet]:
    """One triplet per eligible anchor frame, in increasing anchor order.

    The positive is uniform over the anchor's segment minus the anchor
    itself. The negative picks a side uniformly among the segments that
    actually exist next to the anchor's (left/right), then a frame
    uniformly inside it; a single-segment map yields RANDOM_VECTOR.
    """
    if min_segment_frames < 1:
        raise ValidationError("min_segment_frames must be at least 1")
    ids = segments.segment_ids()
    starts = segments.starts
    ends = segments.ends
    out: list[Triplet] = []
    for anchor in eligible_anchor_frames(segments, min_segment_frames):
        seg = ids[anchor]
        lo, hi = starts[seg], ends[seg]
        # uniform over the segment minus the anchor: shift the tail by one
        pos = int(rng.integers(lo, hi - 1))
        if pos >= anchor:
            pos += 1
        neighbors = [s for s in (seg - 1, seg + 1) if 0 <= s < segments.num_segments]
        if neighbors:
            nseg = neighbors[int(rng.integers(0, len(neighbors)))]
            neg = int(rng.integers(starts[nseg], ends[nseg]))
        else:
            neg = RANDOM_VECTOR
        out.append(Triplet(int(anchor), pos, neg))
    return out


def random_unit_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Standard normal draw scaled to unit length."""
    v = rng.standard_normal(dim)
    norm = float(np.linalg.norm(v))
    while norm == 0.0:  # pragma: no cover - measure-zero redraw
        v = rng.standard_normal(dim)
        norm = float(np.linalg.norm(v))
    return v / norm


def triplets_to_csv(triplets: list[Triplet]) -> str:
    lines = ["anchor,positive,negative"]
    for t in triplets:
        neg = "RAND" if t.negative == RANDOM_VECTOR else str(t.negative)
        lines.append(f"{t.anchor},{t.positive},{neg}")
    return "\n".join(lines) + "\n"
