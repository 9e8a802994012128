"""Segmentation quality: coverage, purity, and their harmonic mean.

Both scores reduce to one helper. With segment lists A and B,

    best_match(A, B) = sum_a max_b |a n b|  /  sum_a |a|

coverage is best_match(reference, hypothesis) and purity is
best_match(hypothesis, reference), which makes the duality
purity(R, H) == coverage(H, R) exact by construction. Reports keep raw
numerators and denominators so corpus scores micro-average correctly.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .annotations import (
    Annotation,
    ChangePoints,
    DEFAULT_MERGE_TOLERANCE,
    TimeSpan,
    partition_extent,
    reference_segmentation,
)
from .errors import ValidationError


def _best_match(a: Sequence[TimeSpan], b: Sequence[TimeSpan]) -> tuple[float, float]:
    """(matched duration, total duration) of A against its best B segments."""
    num = 0.0
    den = 0.0
    for seg in a:
        den += seg.duration
        best = 0.0
        for other in b:
            ov = seg.overlap(other)
            if ov > best:
                best = ov
        num += best
    return num, den


@dataclass(frozen=True)
class MetricReport:
    coverage_num: float
    coverage_den: float
    purity_num: float
    purity_den: float

    @property
    def coverage(self) -> float:
        return self.coverage_num / self.coverage_den if self.coverage_den > 0 else 1.0

    @property
    def purity(self) -> float:
        return self.purity_num / self.purity_den if self.purity_den > 0 else 1.0

    @property
    def f1(self) -> float:
        p, c = self.purity, self.coverage
        return 2.0 * p * c / (p + c) if p + c > 0 else 0.0

    def to_dict(self) -> dict[str, float]:
        return {"coverage": self.coverage, "purity": self.purity, "f1": self.f1}


def score_segments(reference: Sequence[TimeSpan],
                   hypothesis: Sequence[TimeSpan]) -> MetricReport:
    if reference and hypothesis:
        ref_extent = (reference[0].start, reference[-1].end)
        hyp_extent = (hypothesis[0].start, hypothesis[-1].end)
        if ref_extent != hyp_extent:
            raise ValidationError(
                f"segmentations cover different extents: {ref_extent} vs {hyp_extent}"
            )
    cov_num, cov_den = _best_match(reference, hypothesis)
    pur_num, pur_den = _best_match(hypothesis, reference)
    return MetricReport(cov_num, cov_den, pur_num, pur_den)


def evaluate_annotation(
    reference: Annotation,
    hypothesis_points: ChangePoints,
    merge_tolerance: float = DEFAULT_MERGE_TOLERANCE,
) -> MetricReport:
    """Score detected change points against a reference annotation.

    Both sides are rendered as partitions of the reference extent: the
    reference by its derived change points, the hypothesis by the
    detected ones.
    """
    ref_segs = reference_segmentation(reference, merge_tolerance)
    hyp_segs = partition_extent(hypothesis_points.times, reference.extent)
    return score_segments(ref_segs, hyp_segs)


def aggregate(reports: Sequence[MetricReport]) -> MetricReport:
    """Micro-average: sum matched and total durations across files."""
    return MetricReport(
        sum(r.coverage_num for r in reports),
        sum(r.coverage_den for r in reports),
        sum(r.purity_num for r in reports),
        sum(r.purity_den for r in reports),
    )
