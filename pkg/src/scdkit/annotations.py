"""Speaker annotations: RTTM parsing, change points, reference segmentation.

An annotation is an ordered list of (time span, speaker) entries plus the
recording extent. Change points are the union of all entry onsets and
offsets: voice-activity boundaries count, not only two-speaker handovers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import RttmParseError, ValidationError

# One frame at 50 fps; annotation jitter below frame resolution is collapsed.
DEFAULT_MERGE_TOLERANCE = 0.02


@dataclass(frozen=True, order=True)
class TimeSpan:
    """Half-open interval [start, end) in seconds.

    Entry spans must have positive duration; a zero-length span is legal
    only as the extent of an empty annotation.
    """

    start: float
    end: float

    def __post_init__(self):
        if self.start < 0:
            raise ValidationError(f"span start must be non-negative, got {self.start}")
        if self.end < self.start:
            raise ValidationError(f"span end {self.end} precedes start {self.start}")

    @property
    def duration(self) -> float:
        return self.end - self.start

    def contains(self, other: "TimeSpan") -> bool:
        return self.start <= other.start and other.end <= self.end

    def overlap(self, other: "TimeSpan") -> float:
        """Length of the intersection, 0 if disjoint."""
        return max(0.0, min(self.end, other.end) - max(self.start, other.start))


@dataclass(frozen=True)
class Annotation:
    """Ordered (span, speaker) entries covering a recording.

    Invariants: entries sorted by start, each span inside the extent,
    same-speaker entries never overlap (distinct speakers may).
    """

    entries: tuple[tuple[TimeSpan, str], ...]
    extent: TimeSpan

    def __post_init__(self):
        per_speaker: dict[str, list[TimeSpan]] = {}
        prev_start = None
        for span, speaker in self.entries:
            if span.duration <= 0:
                raise ValidationError(f"entry span {span} has non-positive duration")
            if not self.extent.contains(span):
                raise ValidationError(f"entry span {span} outside extent {self.extent}")
            if prev_start is not None and span.start < prev_start:
                raise ValidationError("entries not sorted by start")
            prev_start = span.start
            per_speaker.setdefault(speaker, []).append(span)
        for speaker, spans in per_speaker.items():
            spans.sort()
            for a, b in zip(spans, spans[1:]):
                if b.start < a.end:
                    raise ValidationError(
                        f"speaker {speaker!r} overlaps itself: {a} and {b}"
                    )

    @staticmethod
    def from_entries(
        entries: Iterable[tuple[TimeSpan, str]], extent: TimeSpan | None = None
    ) -> "Annotation":
        """Build with entries sorted; extent defaults to [0, max end]."""
        ordered = tuple(sorted(entries, key=lambda e: (e[0].start, e[0].end, e[1])))
        if extent is None:
            end = max((span.end for span, _ in ordered), default=0.0)
            extent = TimeSpan(0.0, end)
        return Annotation(ordered, extent)

    @property
    def speakers(self) -> tuple[str, ...]:
        return tuple(sorted({speaker for _, speaker in self.entries}))


@dataclass(frozen=True)
class ChangePoints:
    """Strictly increasing change-point instants in seconds."""

    times: tuple[float, ...]

    def __post_init__(self):
        for a, b in zip(self.times, self.times[1:]):
            if b <= a:
                raise ValidationError(f"change points not strictly increasing: {a}, {b}")


def parse_rttm(text: str, extent: TimeSpan | None = None) -> Annotation:
    """Parse RTTM SPEAKER lines into an Annotation.

    Grammar per line: ``SPEAKER <file-id> <channel> <onset> <duration>
    <NA> <NA> <speaker> <NA> <NA>``; ``#`` lines are comments. Only the
    SPEAKER record type is supported.
    """
    entries: list[tuple[TimeSpan, str]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) < 9:
            raise RttmParseError(lineno, f"expected >= 9 fields, got {len(fields)}")
        if fields[0] != "SPEAKER":
            raise RttmParseError(lineno, f"unsupported record type {fields[0]!r}")
        try:
            onset = float(fields[3])
            duration = float(fields[4])
        except ValueError as exc:
            raise RttmParseError(lineno, f"bad onset/duration: {exc}") from None
        if duration <= 0:
            raise ValidationError(f"line {lineno}: non-positive duration {duration}")
        if onset < 0:
            raise ValidationError(f"line {lineno}: negative onset {onset}")
        entries.append((TimeSpan(onset, onset + duration), fields[7]))
    return Annotation.from_entries(entries, extent)


def format_rttm(annotation: Annotation, file_id: str = "file") -> str:
    """Serialize to RTTM text, onset/duration at millisecond precision."""
    lines = [
        f"SPEAKER {file_id} 1 {span.start:.3f} {span.duration:.3f} "
        f"<NA> <NA> {speaker} <NA> <NA>"
        for span, speaker in annotation.entries
    ]
    return "".join(line + "\n" for line in lines)


def load_rttm(path, extent: TimeSpan | None = None) -> Annotation:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_rttm(fh.read(), extent)


def dump_rttm(annotation: Annotation, path, file_id: str = "file") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_rttm(annotation, file_id))


def derive_change_points(
    annotation: Annotation, merge_tolerance: float = DEFAULT_MERGE_TOLERANCE
) -> ChangePoints:
    """Sorted union of entry onsets/offsets, near-coincident values merged.

    Values chained closer than `merge_tolerance` collapse to their mean;
    cluster means stay at least `merge_tolerance` apart, so the collapse
    is idempotent.
    """
    instants = sorted({span.start for span, _ in annotation.entries}
                      | {span.end for span, _ in annotation.entries})
    merged: list[float] = []
    cluster: list[float] = []
    for t in instants:
        if cluster and t - cluster[-1] >= merge_tolerance:
            merged.append(sum(cluster) / len(cluster))
            cluster = []
        cluster.append(t)
    if cluster:
        merged.append(sum(cluster) / len(cluster))
    for t in merged:
        if t < annotation.extent.start or t > annotation.extent.end:
            raise ValidationError(f"change point {t} outside extent {annotation.extent}")
    return ChangePoints(tuple(merged))


def partition_extent(times: Sequence[float], extent: TimeSpan) -> list[TimeSpan]:
    """Partition of the extent cut at the given interior instants.

    Instants at or outside the extent bounds are ignored; a zero-length
    extent yields the empty partition.
    """
    if extent.duration <= 0:
        return []
    interior = sorted(t for t in times if extent.start < t < extent.end)
    bounds = [extent.start] + interior + [extent.end]
    return [TimeSpan(a, b) for a, b in zip(bounds, bounds[1:])]


def reference_segmentation(
    annotation: Annotation, merge_tolerance: float = DEFAULT_MERGE_TOLERANCE
) -> list[TimeSpan]:
    """Contiguous segments between consecutive change points over the extent."""
    cps = derive_change_points(annotation, merge_tolerance)
    return partition_extent(cps.times, annotation.extent)
