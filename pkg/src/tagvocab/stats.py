"""Histograms and post-length distribution measurements.

Linear histograms cover small integer ranges (post lengths); log-binned
histograms cover heavy tails. Tail exponents come from a least-squares
slope on log density versus log size; likelihood-based tail fitting is
out of scope.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, EmptyStreamError, InsufficientDataError


@dataclass
class Histogram:
    """Linear-bin histogram with counts and a proper density view."""

    edges: list[float]
    counts: list[int]
    total: int

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.counts) + 1:
            raise ConfigError("edges must be one longer than counts")
        if sum(self.counts) != self.total:
            raise ConfigError("counts must sum to total")

    @classmethod
    def from_values(cls, values: Iterable[float], edges: Sequence[float]) -> "Histogram":
        edges = list(map(float, edges))
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ConfigError("edges must be strictly increasing")
        counts, _ = np.histogram(np.fromiter(values, dtype=float), bins=edges)
        counts = [int(c) for c in counts]
        return cls(edges, counts, sum(counts))

    @classmethod
    def unit_bins(cls, max_value: int) -> list[float]:
        """Integer-centered unit bins [0.5, 1.5, ..., max+0.5]."""
        return [k + 0.5 for k in range(max_value + 1)]

    def densities(self) -> list[float]:
        if self.total == 0:
            return [0.0] * len(self.counts)
        return [
            c / self.total / (b - a)
            for c, a, b in zip(self.counts, self.edges, self.edges[1:])
        ]

    def merge(self, other: "Histogram") -> "Histogram":
        if other.edges != self.edges:
            raise ConfigError("histograms with different edges cannot merge")
        counts = [a + b for a, b in zip(self.counts, other.counts)]
        return Histogram(self.edges, counts, self.total + other.total)


@dataclass
class LogBinnedHistogram:
    """Histogram whose bin edges grow by a constant ratio."""

    edges: list[float]
    counts: list[int]
    total: int
    bins_per_decade: int

    @classmethod
    def from_values(cls, values: Iterable[float], bins_per_decade: int = 10,
                    min_edge: float = 1.0) -> "LogBinnedHistogram":
        if bins_per_decade < 1:
            raise ConfigError("bins_per_decade must be >= 1")
        arr = np.fromiter((v for v in values if v >= min_edge), dtype=float)
        if arr.size == 0:
            return cls([min_edge], [], 0, bins_per_decade)
        top = float(arr.max())
        n_bins = max(1, math.ceil(bins_per_decade * math.log10(top / min_edge) + 1e-9))
        edges = [min_edge * 10 ** (k / bins_per_decade) for k in range(n_bins + 1)]
        while edges[-1] <= top:
            edges.append(min_edge * 10 ** (len(edges) / bins_per_decade))
        counts, _ = np.histogram(arr, bins=edges)
        counts = [int(c) for c in counts]
        return cls(edges, counts, int(arr.size), bins_per_decade)

    def densities(self) -> list[float]:
        if self.total == 0:
            return []
        return [
            c / self.total / (b - a)
            for c, a, b in zip(self.counts, self.edges, self.edges[1:])
        ]

    def centers(self) -> list[float]:
        # geometric centers suit the constant-ratio spacing
        return [math.sqrt(a * b) for a, b in zip(self.edges, self.edges[1:])]


@dataclass
class PostLengthDistribution:
    """Unit-bin histogram of post lengths plus the exact mean and a tail view."""

    histogram: Histogram
    mean: float
    tail: LogBinnedHistogram


def post_length_distribution(lengths: Iterable[int],
                             bins_per_decade: int = 10) -> PostLengthDistribution:
    """Measure the distribution of tags-per-post. Empty input is an error."""
    lengths = list(lengths)
    if not lengths:
        raise EmptyStreamError("no posts; post-length distribution undefined")
    if min(lengths) < 1:
        raise ConfigError("post lengths must be >= 1")
    max_len = max(lengths)
    hist = Histogram.from_values(lengths, Histogram.unit_bins(max_len))
    mean = sum(lengths) / len(lengths)
    tail = LogBinnedHistogram.from_values(lengths, bins_per_decade)
    return PostLengthDistribution(hist, mean, tail)


@dataclass
class TailFit:
    """Least-squares slope of log density against log size."""

    exponent: float
    n_bins: int
    heavy_tailed: bool
    note: str = ""


def tail_exponent(hist: Histogram | LogBinnedHistogram, n_min: float = 1.0,
                  min_bins: int = 5) -> TailFit:
    """Fit density ~ n^exponent over bins whose left edge is >= n_min.

    Requires at least min_bins non-empty bins in the window. Distinguishes
    an empty tail from a tail with too few occupied bins. Slopes above -1
    are flagged as not heavy-tailed rather than rejected.
    """
    xs: list[float] = []
    ys: list[float] = []
    densities = hist.densities()
    in_window = 0
    for left, right, count, dens in zip(hist.edges, hist.edges[1:], hist.counts,
                                        densities):
        if left < n_min:
            continue
        in_window += 1
        if count == 0:
            continue
        xs.append(math.log(math.sqrt(left * right)))
        ys.append(math.log(dens))
    if in_window == 0 or not xs:
        raise InsufficientDataError(
            f"no occupied bins at or above n_min={n_min:g}; tail is empty"
        )
    if len(xs) < min_bins:
        raise InsufficientDataError(
            f"only {len(xs)} occupied bins at or above n_min={n_min:g}; "
            f"need {min_bins} for a tail fit"
        )
    slope = float(np.polyfit(xs, ys, 1)[0])
    heavy = slope < -1.0
    note = "" if heavy else "slope above -1; distribution is not heavy-tailed"
    return TailFit(slope, len(xs), heavy, note)
