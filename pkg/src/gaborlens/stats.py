"""Residual statistics: percentiles, per-layer summaries, histograms, and
the noise-calibration curve."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coremath import GaborParams, gabor_kernel
from .fitting import FitResult, normalize_kernel

__all__ = [
    "LayerSummary",
    "CalibrationPoint",
    "HistogramResult",
    "percentile",
    "layer_summary",
    "histogram",
    "calibration_curve",
]

# full value range of a peak-normalized kernel, [-1, 1]
NORMALIZED_RANGE = 2.0


@dataclass(frozen=True)
class LayerSummary:
    """Five-number summary of the non-degenerate RMS residuals of one layer.

    The statistics are None when the layer has no non-degenerate fits.
    """

    layer_name: str
    count: int
    degenerate_count: int
    median: float | None
    q1: float | None
    q3: float | None
    p5: float | None
    p95: float | None


@dataclass(frozen=True)
class CalibrationPoint:
    noise_fraction: float
    mean_rms: float
    trials: int


@dataclass(frozen=True)
class HistogramResult:
    edges: tuple[float, ...]
    counts: tuple[int, ...]
    underflow: int
    overflow: int

    @property
    def total(self) -> int:
        return sum(self.counts) + self.underflow + self.overflow


def percentile(values, p: float) -> float:
    """Linear-interpolation percentile on the sorted values.

    Rank h = (n - 1) * p / 100; result = v[floor(h)] + frac(h) * (v[floor(h)+1] - v[floor(h)]).
    """
    if not 0.0 <= p <= 100.0:
        raise ValueError(f"percentile must be in [0, 100], got {p}")
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        raise ValueError("percentile of empty data")
    h = (ordered.size - 1) * p / 100.0
    low = int(math.floor(h))
    if low >= ordered.size - 1:
        return float(ordered[-1])
    return float(ordered[low] + (h - low) * (ordered[low + 1] - ordered[low]))


def layer_summary(fits: list[FitResult], layer_name: str) -> LayerSummary:
    """Percentile statistics over the non-degenerate fits of one layer."""
    values = [f.rms for f in fits if not f.degenerate]
    degenerate_count = sum(1 for f in fits if f.degenerate)
    if not values:
        return LayerSummary(layer_name, len(fits), degenerate_count, None, None, None, None, None)
    return LayerSummary(
        layer_name=layer_name,
        count=len(fits),
        degenerate_count=degenerate_count,
        median=percentile(values, 50),
        q1=percentile(values, 25),
        q3=percentile(values, 75),
        p5=percentile(values, 5),
        p95=percentile(values, 95),
    )


def histogram(residuals, bin_edges) -> HistogramResult:
    """Counts per half-open bin [e_i, e_{i+1}), with under/overflow recorded."""
    edges = np.asarray(bin_edges, dtype=float)
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing with length >= 2")
    values = np.asarray(residuals, dtype=float)
    idx = np.searchsorted(edges, values, side="right") - 1
    underflow = int(np.sum(idx < 0))
    overflow = int(np.sum(values >= edges[-1]))
    in_range = idx[(idx >= 0) & (values < edges[-1])]
    counts = np.bincount(in_range, minlength=edges.size - 1) if in_range.size else np.zeros(edges.size - 1, int)
    return HistogramResult(tuple(edges.tolist()), tuple(int(c) for c in counts), underflow, overflow)


def log_spaced_edges(count: int = 50, low: float = 1e-6, high: float = 1.0) -> np.ndarray:
    """Default residual-histogram edges: residuals span several decades."""
    if count < 1 or low <= 0 or high <= low:
        raise ValueError("need count >= 1 and 0 < low < high")
    return np.logspace(math.log10(low), math.log10(high), count + 1)


def calibration_curve(k, truth: GaborParams, noise_fractions, trials, seed) -> list[CalibrationPoint]:
    """Mean RMS deviation caused by i.i.d. uniform corruption of the model.

    For each fraction ``a`` the peak-normalized pointspread is corrupted
    ``trials`` times with noise uniform on [-a*R, a*R], R = 2 being the
    normalized value range, and the RMS against the uncorrupted kernel is
    averaged. Deterministic for a given seed; tends to a*R/sqrt(3).
    """
    fractions = [float(a) for a in noise_fractions]
    if any(a < 0 for a in fractions):
        raise ValueError("noise fractions must be nonnegative")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ValueError("noise fractions must be strictly increasing")
    if trials < 1:
        raise ValueError("trials must be positive")
    kernel, _, _ = normalize_kernel(gabor_kernel(k, truth))
    rng = np.random.default_rng(seed)
    points = []
    for fraction in fractions:
        amplitude = fraction * NORMALIZED_RANGE
        noise = rng.uniform(-amplitude, amplitude, size=(trials,) + kernel.shape)
        rms = np.sqrt(np.mean(noise**2, axis=(1, 2)))
        points.append(CalibrationPoint(fraction, float(np.mean(rms)), trials))
    return points
