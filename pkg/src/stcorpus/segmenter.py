"""Long-form audio segmentation from per-frame speech activations.

Regions are found by hysteresis thresholding of an activation trace.  Any
region longer than ``t_dur_s`` is re-segmented with raised onset/offset
thresholds until it fits, and split into equal parts once the thresholds are
exhausted.  Short neighbouring segments can then be merged back together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np


class ParameterError(ValueError):
    """Raised for out-of-range segmentation parameters."""


@dataclass(frozen=True)
class TimeSpan:
    """Half-open interval ``[start_s, end_s)`` in seconds."""

    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.start_s >= 0:
            raise ValueError(f"span start must be >= 0, got {self.start_s}")
        if not self.end_s > self.start_s:
            raise ValueError(f"empty or negative span [{self.start_s}, {self.end_s})")

    @property
    def length(self) -> float:
        return self.end_s - self.start_s

    def contains(self, other: "TimeSpan", tol: float = 1e-9) -> bool:
        return self.start_s - tol <= other.start_s and other.end_s <= self.end_s + tol


@dataclass
class FrameTrace:
    """Speech activation per frame; frame ``i`` covers
    ``[start_s + i / frame_rate_hz, start_s + (i + 1) / frame_rate_hz)``."""

    frame_rate_hz: float
    values: np.ndarray
    start_s: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not self.frame_rate_hz > 0:
            raise ParameterError(f"frame_rate_hz must be positive, got {self.frame_rate_hz}")
        if not self.start_s >= 0:
            raise ParameterError(f"start_s must be >= 0, got {self.start_s}")
        if len(self.values) and not (
            np.all(np.isfinite(self.values))
            and self.values.min() >= 0.0
            and self.values.max() <= 1.0
        ):
            raise ParameterError("activation values must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def duration_s(self) -> float:
        return len(self.values) / self.frame_rate_hz

    @property
    def end_s(self) -> float:
        return self.frame_time(len(self.values))

    def frame_time(self, index: int) -> float:
        return self.start_s + index / self.frame_rate_hz



@dataclass(frozen=True)
class SegmenterParams:
    p_on: float = 0.481
    p_off: float = 0.810
    alpha_on: float = 0.1
    alpha_off: float = 0.028
    t_dur_s: float = 43.75
    # thresholds are only raised while one of them is still below this value
    escalation_cap: float = 0.95

    def validate(self) -> None:
        _check_threshold("p_on", self.p_on)
        _check_threshold("p_off", self.p_off)
        _check_threshold("escalation_cap", self.escalation_cap)
        if not self.alpha_on > 0 or not self.alpha_off > 0:
            raise ParameterError(
                f"alpha_on and alpha_off must be positive, got {self.alpha_on}, {self.alpha_off}"
            )
        if not self.t_dur_s > 0:
            raise ParameterError(f"t_dur_s must be positive, got {self.t_dur_s}")


@dataclass(frozen=True)
class MergeParams:
    m_dur_s: float = 30.0
    m_int_s: float = 1.0

    def validate(self) -> None:
        if not self.m_dur_s > 0:
            raise ParameterError(f"m_dur_s must be positive, got {self.m_dur_s}")
        if not self.m_int_s >= 0:
            raise ParameterError(f"m_int_s must be >= 0, got {self.m_int_s}")


def _check_threshold(name: str, value: float) -> None:
    if not 0.0 < value <= 1.0:
        raise ParameterError(f"{name} must be in (0, 1], got {value}")


def hysteresis_frames(values: np.ndarray, p_on: float, p_off: float) -> List[tuple]:
    """Active regions as ``(first_frame, end_frame)`` pairs, end exclusive.

    Per frame, an inactive state turns active when ``value >= p_on``; an
    active state (including one opened on this very frame) turns inactive
    when ``value < p_off``, ending the region at that frame.  A frame below
    ``p_off`` therefore never belongs to a region, which matters when
    ``p_on < p_off``.
    """
    values = np.asarray(values)
    n = len(values)
    onsets = np.flatnonzero((values >= p_on) & (values >= p_off))
    offsets = np.flatnonzero(values < p_off)
    regions = []
    pos = 0
    while pos < n:
        k = np.searchsorted(onsets, pos)
        if k == len(onsets):
            break
        first = int(onsets[k])
        k = np.searchsorted(offsets, first)
        if k == len(offsets):
            regions.append((first, n))
            break
        end = int(offsets[k])
        regions.append((first, end))
        pos = end + 1
    return regions


def hysteresis_regions(trace: FrameTrace, p_on: float, p_off: float) -> List[TimeSpan]:
    """Hysteresis-thresholded speech regions of ``trace`` as time spans."""
    _check_threshold("p_on", p_on)
    _check_threshold("p_off", p_off)
    return [
        TimeSpan(trace.frame_time(a), trace.frame_time(b))
        for a, b in hysteresis_frames(trace.values, p_on, p_off)
    ]


def equal_segment(span: TimeSpan, t_dur_s: float) -> List[TimeSpan]:
    """Split ``span`` into ``ceil(length / t_dur_s)`` equal contiguous parts."""
    if not span.length > t_dur_s:
        raise ValueError(
            f"equal_segment needs a span longer than {t_dur_s} s, got {span.length} s"
        )
    k = math.ceil(span.length / t_dur_s)
    step = span.length / k
    # boundaries computed from the start each time so rounding does not drift
    cuts = [span.start_s + i * step for i in range(k)] + [span.end_s]
    return [TimeSpan(cuts[i], cuts[i + 1]) for i in range(k)]


def segment_audio(trace: FrameTrace, params: SegmenterParams = SegmenterParams()) -> List[TimeSpan]:
    """Segment a trace so that no output span is longer than ``params.t_dur_s``.

    Regions up to ``t_dur_s`` are kept as they are.  Longer regions are
    segmented again on their own frames with both thresholds raised by
    ``alpha_on``/``alpha_off`` (clamped at 1.0) while either threshold is
    still below ``escalation_cap``; past that point they are split into equal
    parts.  If re-segmenting a long region loses it entirely (every frame
    falls below the raised onset), the region is split into equal parts
    instead so no speech is dropped.
    """
    params.validate()
    return _segment(trace, 0, len(trace), params.p_on, params.p_off, params)


def _segment(
    trace: FrameTrace, lo: int, hi: int, p_on: float, p_off: float, params: SegmenterParams
) -> List[TimeSpan]:
    # global frame indices keep every boundary on the original trace's time grid
    out: List[TimeSpan] = []
    for first, end in hysteresis_frames(trace.values[lo:hi], p_on, p_off):
        span = TimeSpan(trace.frame_time(first + lo), trace.frame_time(end + lo))
        if span.length <= params.t_dur_s:
            out.append(span)
            continue
        sub: List[TimeSpan] = []
        if p_on < params.escalation_cap or p_off < params.escalation_cap:
            sub = _segment(
                trace,
                first + lo,
                end + lo,
                min(p_on + params.alpha_on, 1.0),
                min(p_off + params.alpha_off, 1.0),
                params,
            )
        out.extend(sub or equal_segment(span, params.t_dur_s))
    return out


def _check_sorted_disjoint(spans: Sequence[TimeSpan]) -> None:
    for prev, cur in zip(spans, spans[1:]):
        if cur.start_s < prev.end_s:
            raise ValueError(
                f"spans must be sorted and disjoint: [{prev.start_s}, {prev.end_s}) "
                f"is followed by [{cur.start_s}, {cur.end_s})"
            )


def merge_segments(spans: Iterable[TimeSpan], params: MergeParams = MergeParams()) -> List[TimeSpan]:
    """Greedily join neighbouring spans.

    The running span absorbs the next one when the gap between them is
    strictly below ``m_int_s`` and the joined span is at most ``m_dur_s``
    long.  Input spans longer than ``m_dur_s`` pass through untouched.
    """
    params.validate()
    spans = list(spans)
    _check_sorted_disjoint(spans)
    if not spans:
        return []
    merged = []
    start, end = spans[0].start_s, spans[0].end_s
    for span in spans[1:]:
        if span.start_s - end < params.m_int_s and span.end_s - start <= params.m_dur_s:
            end = span.end_s
        else:
            merged.append(TimeSpan(start, end))
            start, end = span.start_s, span.end_s
    merged.append(TimeSpan(start, end))
    return merged
