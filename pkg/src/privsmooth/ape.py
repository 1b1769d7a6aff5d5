"""Attribute privacy expansion analysis over a scalar sensitive attribute.

Builds the baseline inference set (attribute values compatible with an
observed label) on a finite grid, expands it by per-point certified radii,
and measures the empirical expansion of positive predictions below a
decision threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ApeGrid:
    """Uniform closed grid over the sensitive attribute."""

    lo: float
    hi: float
    step: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.step <= 0:
            raise ValueError(f"grid step must be > 0, got {self.step}")

    def points(self) -> np.ndarray:
        n = int(round((self.hi - self.lo) / self.step))
        return self.lo + self.step * np.arange(n + 1)


@dataclass(frozen=True)
class TrajectorySpec:
    """Left-of-threshold evaluation trajectory b - j*s for j = 0..J."""

    threshold_b: float
    step_s: float
    count_j: int

    def __post_init__(self):
        if self.step_s <= 0:
            raise ValueError(f"trajectory step must be > 0, got {self.step_s}")
        if self.count_j < 0:
            raise ValueError(f"trajectory count must be >= 0, got {self.count_j}")
        if not math.isfinite(self.threshold_b - self.count_j * self.step_s):
            raise ValueError("trajectory span is not finite")


def build_trajectory(spec: TrajectorySpec) -> np.ndarray:
    """Strictly decreasing attribute values [b, b - s, ..., b - J*s]."""
    return spec.threshold_b - spec.step_s * np.arange(spec.count_j + 1)


def _merge_closed(intervals) -> tuple[tuple[float, float], ...]:
    pairs = sorted((float(lo), float(hi)) for lo, hi in intervals)
    merged: list[list[float]] = []
    for lo, hi in pairs:
        if hi < lo:
            raise ValueError(f"interval has hi < lo: [{lo}, {hi}]")
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return tuple((lo, hi) for lo, hi in merged)


class IntervalSet:
    """Finite union of closed real intervals, kept sorted and disjoint."""

    def __init__(self, intervals=()):
        self.intervals = _merge_closed(intervals)

    def __eq__(self, other) -> bool:
        return isinstance(other, IntervalSet) and self.intervals == other.intervals

    def __repr__(self) -> str:
        return f"IntervalSet({list(self.intervals)!r})"

    def __bool__(self) -> bool:
        return bool(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def total_length(self) -> float:
        return sum(hi - lo for lo, hi in self.intervals)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + other.intervals)

    def contains_point(self, z: float) -> bool:
        return any(lo <= z <= hi for lo, hi in self.intervals)

    def contains(self, other: "IntervalSet") -> bool:
        """True when every interval of `other` lies inside this set."""
        return all(
            any(slo <= olo and ohi <= shi for slo, shi in self.intervals)
            for olo, ohi in other.intervals
        )

    def to_strings(self) -> list[str]:
        return [f"{lo!r}..{hi!r}" for lo, hi in self.intervals]


def baseline_inference_set(classify, y, grid: ApeGrid) -> IntervalSet:
    """Grid points z with classify(z) == y, merged into maximal runs.

    Each run is reported as the closed interval [first, last] of its grid
    points, so boundaries are resolved to the grid step.
    """
    pts = grid.points()
    hits = np.array([classify(float(z)) == y for z in pts], dtype=bool)
    intervals = []
    i = 0
    n = len(pts)
    while i < n:
        if hits[i]:
            j = i
            while j + 1 < n and hits[j + 1]:
                j += 1
            intervals.append((float(pts[i]), float(pts[j])))
            i = j + 1
        else:
            i += 1
    return IntervalSet(intervals)


def expanded_inference_set(baseline: IntervalSet, radius_at, grid: ApeGrid) -> IntervalSet:
    """Union of [z - R_z, z + R_z] over baseline grid points z.

    R_z must be >= 0 (0 where certification abstains).  The baseline
    intervals are included in the union, so the result is always a
    superset of the baseline regardless of the radii.
    """
    pts = grid.points()
    balls = list(baseline.intervals)
    for lo, hi in baseline.intervals:
        inside = pts[(pts >= lo - 1e-12) & (pts <= hi + 1e-12)]
        for z in inside:
            r = float(radius_at(float(z)))
            if r < 0:
                raise ValueError(f"radius_at({z}) returned negative radius {r}")
            if r > 0:
                balls.append((float(z) - r, float(z) + r))
    return IntervalSet(balls)


def certify_attribute_grid(grid: ApeGrid, certify_at):
    """One certification pass over the grid, memoized per point.

    certify_at maps an attribute value to (label or None, radius >= 0);
    None marks abstention and must carry radius 0.  Returns (labels,
    radius_at, rows): a dict of per-point labels, a zero-on-abstain
    radius lookup suitable for expanded_inference_set, and the per-point
    (z, label, radius) rows in grid order.
    """
    labels: dict[float, object] = {}
    radii: dict[float, float] = {}
    rows = []
    for z in grid.points():
        z = float(z)
        label, radius = certify_at(z)
        radius = float(radius)
        if radius < 0:
            raise ValueError(f"certify_at({z}) returned negative radius {radius}")
        if label is None and radius != 0.0:
            raise ValueError(f"certify_at({z}) abstained but returned radius {radius}")
        labels[z] = label
        radii[z] = radius
        rows.append((z, label, radius))

    def radius_at(z: float) -> float:
        return radii[float(z)]

    return labels, radius_at, rows


def write_point_report(rows, path) -> None:
    """Per-point rows as delimited text: attribute value, label or
    'abstain', certified radius."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("z\tlabel\tradius\n")
        for z, label, radius in rows:
            name = "abstain" if label is None else str(label)
            fh.write(f"{float(z)!r}\t{name}\t{float(radius)!r}\n")


def empirical_expansion(threshold_b: float, positive_attribute_values) -> float:
    """Threshold minus the smallest positively-predicted attribute value,
    floored at zero; zero when nothing was predicted positive."""
    values = list(positive_attribute_values)
    if not values:
        return 0.0
    return max(0.0, float(threshold_b) - float(min(values)))


def empirical_expansion_binned(
    threshold_b: float, positive_attribute_values, bin_width: float = 0.2
) -> float:
    """Histogram-bin variant: distance from the threshold to the left edge
    of the leftmost non-empty bin, with bin edges anchored at the threshold."""
    if bin_width <= 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    values = list(positive_attribute_values)
    if not values:
        return 0.0
    gap = float(threshold_b) - float(min(values))
    if gap <= 0:
        return 0.0
    return bin_width * math.ceil(gap / bin_width - 1e-9)
