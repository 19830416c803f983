"""Exponent estimation, curve rescaling, and exponent distributions.

Two estimators are always reported side by side: the endpoint exponent
gamma = log N(tau_max) / log tau_max, and a least-squares slope of log N
against log tau over a window. They agree only when a curve is a clean
power law, so no single unqualified gamma is ever emitted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .errors import (
    ConfigError,
    FitConvergenceError,
    InsufficientDataError,
    UndefinedExponentError,
)
from .growth import GrowthCurve
from .ingest import TasRecord
from .stats import Histogram


@dataclass(frozen=True)
class ExponentEstimate:
    """One exponent measurement with the method that produced it."""

    gamma: float
    method: str
    tau_max: int
    n_final: int
    fit_window: tuple[float, float] | None = None
    residual: float | None = None

    def __post_init__(self) -> None:
        if self.method not in ("endpoint", "loglog_regression"):
            raise ConfigError(f"unknown estimation method {self.method!r}")


def endpoint_gamma(tau_max: int, n_final: int) -> float:
    """gamma = log n_final / log tau_max. Undefined below tau_max = 2."""
    if tau_max < 2:
        raise UndefinedExponentError(
            f"tau_max={tau_max}; endpoint exponent needs tau_max >= 2"
        )
    if n_final == 1:
        return 0.0
    return math.log(n_final) / math.log(tau_max)


def endpoint_exponent(curve: GrowthCurve) -> ExponentEstimate:
    return ExponentEstimate(endpoint_gamma(curve.tau_max, curve.n_final),
                            "endpoint", curve.tau_max, curve.n_final)


def loglog_regression_exponent(
    curve: GrowthCurve, window: tuple[float, float] | None = None
) -> ExponentEstimate:
    """Slope of log N vs log tau over the window, with the RMS residual.

    Needs at least five samples inside the window. tau = 1 contributes
    nothing to a log-log fit and is skipped.
    """
    lo, hi = window if window is not None else (1.0, float(curve.tau_max))
    xs = []
    ys = []
    for tau, n in curve.samples:
        if tau < 2 or tau < lo or tau > hi:
            continue
        xs.append(math.log(tau))
        ys.append(math.log(n))
    if len(xs) < 5:
        raise InsufficientDataError(
            f"{len(xs)} samples in window [{lo:g}, {hi:g}]; regression needs 5"
        )
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = np.asarray(xs) * slope + intercept
    residual = float(np.sqrt(np.mean((np.asarray(ys) - pred) ** 2)))
    return ExponentEstimate(float(slope), "loglog_regression", curve.tau_max,
                            curve.n_final, (lo, hi), residual)


def last_decades_window(curve: GrowthCurve, decades: float = 2.0
                        ) -> tuple[float, float]:
    """Window covering the trailing `decades` of tau."""
    hi = float(curve.tau_max)
    return (hi / 10**decades, hi)


@dataclass
class RescaledCurve:
    """Samples divided by their final values; endpoint exactly (1, 1)."""

    samples: list[tuple[float, float]]


def rescale_curve(curve: GrowthCurve) -> RescaledCurve:
    if curve.tau_max < 1:
        raise UndefinedExponentError("empty curve cannot be rescaled")
    t = float(curve.tau_max)
    n = float(curve.n_final)
    out = [(tau / t, cnt / n) for tau, cnt in curve.samples]
    if out[-1] != (1.0, 1.0):
        # guard against float division dust at the endpoint
        out[-1] = (1.0, 1.0)
    return RescaledCurve(out)


def unrescale_curve(rescaled: RescaledCurve, tau_max: int,
                    n_final: int) -> list[tuple[int, int]]:
    """Invert rescale_curve back onto the integer sample grid."""
    return [
        (round(x * tau_max), round(y * n_final)) for x, y in rescaled.samples
    ]


def rate_curve(curve: GrowthCurve) -> list[tuple[float, float]]:
    """Discrete growth rate dN/dtau between consecutive samples.

    Each rate sits at the geometric midpoint of its tau interval. Zero
    rates are kept; log-scale consumers filter them.
    """
    return [
        (math.sqrt(t0 * t1), (n1 - n0) / (t1 - t0))
        for (t0, n0), (t1, n1) in zip(curve.samples, curve.samples[1:])
    ]


def rank_entities(tas: Iterable[TasRecord],
                  kind: str = "resource") -> list[tuple[str, int]]:
    """All entities ordered by post count, descending, ties by first
    appearance. A post is a maximal run of adjacent records sharing
    (user, resource)."""
    if kind not in ("resource", "user"):
        raise ConfigError(f"unknown entity kind {kind!r}")
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    prev_key = None
    for rec in tas:
        key = (rec.user, rec.resource)
        if key != prev_key:
            prev_key = key
            ent = rec.resource if kind == "resource" else rec.user
            counts[ent] = counts.get(ent, 0) + 1
            if ent not in first_seen:
                first_seen[ent] = len(first_seen)
    ordering = sorted(counts, key=lambda e: (-counts[e], first_seen[e]))
    return [(e, counts[e]) for e in ordering]


def select_ranks(ordering: Sequence[tuple[str, int]],
                 ranks: Sequence[int]) -> list[tuple[str, int]]:
    """Pick 1-based ranks out of a rank_entities ordering."""
    out = []
    for r in ranks:
        if r < 1 or r > len(ordering):
            raise InsufficientDataError(
                f"rank {r} out of range; only {len(ordering)} entities present"
            )
        out.append(ordering[r - 1])
    return out


def default_ranks() -> list[int]:
    """Ranks 100 through 1000 in steps of 100."""
    return list(range(100, 1001, 100))


def gamma_histogram(gammas: Iterable[float], bin_width: float = 0.02,
                    gamma_max: float = 1.2) -> tuple[Histogram, list[int]]:
    """Bin exponents on [0, gamma_max] in fixed-width bins.

    Values above gamma_max (possible for tiny curves) land in the last bin
    and their positions are returned so the excess is flagged, not silent.
    """
    # enough whole bins to cover gamma_max; epsilon guards exact divisions
    n_bins = math.ceil(gamma_max / bin_width - 1e-9)
    edges = [i * bin_width for i in range(n_bins + 1)]
    counts = [0] * n_bins
    flagged = []
    total = 0
    for i, gamma in enumerate(gammas):
        if gamma > gamma_max:
            flagged.append(i)
        counts[min(int(gamma / bin_width), n_bins - 1)] += 1
        total += 1
    if total == 0:
        raise InsufficientDataError("no exponents; distribution undefined")
    return Histogram(edges, counts, total), flagged


def exponent_distribution(curves: Iterable[GrowthCurve],
                          bin_width: float = 0.02,
                          gamma_max: float = 1.2
                          ) -> tuple[Histogram, list[str]]:
    """Histogram of endpoint exponents of a curve population."""
    curves = list(curves)
    hist, flagged = gamma_histogram(
        (endpoint_exponent(c).gamma for c in curves), bin_width, gamma_max)
    labels = [
        f"{curves[i].context.kind}:{curves[i].context.id}" for i in flagged
    ]
    return hist, labels


def peak_gamma(hist: Histogram) -> float:
    """Center of the most populated bin; ties go to the lowest center."""
    if hist.total == 0:
        raise InsufficientDataError("empty histogram has no peak")
    best = max(range(len(hist.counts)), key=lambda i: (hist.counts[i], -i))
    return (hist.edges[best] + hist.edges[best + 1]) / 2


@dataclass(frozen=True)
class GaussianFit:
    """Gaussian fitted to a histogram's density view."""

    mean: float
    sigma: float
    amplitude: float
    residual: float

    @property
    def poor_fit(self) -> bool:
        # RMS residual at a tenth of the peak means visibly non-Gaussian
        return self.residual > 0.1 * self.amplitude


def gaussian_fit(hist: Histogram) -> GaussianFit:
    """Nonlinear least squares of a Gaussian on bin densities.

    Fitted on density, not counts, so differently sized populations stay
    comparable. Initialized from sample moments; non-convergence raises
    with the moment estimates attached as fallbacks.
    """
    dens = hist.densities()
    if sum(1 for c in hist.counts if c > 0) < 4:
        raise InsufficientDataError(
            f"{sum(1 for c in hist.counts if c > 0)} non-empty bins; "
            "gaussian fit needs 4"
        )
    x = np.array([(a + b) / 2 for a, b in zip(hist.edges, hist.edges[1:])])
    y = np.asarray(dens)
    mu0 = float(np.sum(x * y) / np.sum(y))
    var0 = float(np.sum((x - mu0) ** 2 * y) / np.sum(y))
    sd0 = math.sqrt(max(var0, 1e-12))
    amp0 = float(y.max())

    def model(t, mu, sd, amp):
        return amp * np.exp(-((t - mu) ** 2) / (2 * sd**2))

    try:
        popt, _ = curve_fit(model, x, y, p0=(mu0, sd0, amp0), maxfev=10000)
    except RuntimeError as exc:
        raise FitConvergenceError(
            f"gaussian fit did not converge: {exc}",
            fallback_mean=mu0, fallback_sigma=sd0, fallback_amplitude=amp0,
        ) from exc
    mu, sd, amp = (float(v) for v in popt)
    residual = float(np.sqrt(np.mean((y - model(x, mu, sd, amp)) ** 2)))
    return GaussianFit(mu, abs(sd), amp, residual)
