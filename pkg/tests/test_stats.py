import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaborlens.coremath import GaborParams
from gaborlens.fitting import FitResult
from gaborlens.stats import (
    calibration_curve,
    histogram,
    layer_summary,
    log_spaced_edges,
    percentile,
)


def percentile_oracle(values, p):
    """Pure-python sort-and-interpolate, same rank convention."""
    ordered = sorted(float(v) for v in values)
    h = (len(ordered) - 1) * p / 100.0
    low = int(math.floor(h))
    if low >= len(ordered) - 1:
        return ordered[-1]
    return ordered[low] + (h - low) * (ordered[low + 1] - ordered[low])


def histogram_oracle(values, edges):
    counts = [0] * (len(edges) - 1)
    underflow = overflow = 0
    for v in values:
        if v < edges[0]:
            underflow += 1
        elif v >= edges[-1]:
            overflow += 1
        else:
            for b in range(len(edges) - 1):
                if edges[b] <= v < edges[b + 1]:
                    counts[b] += 1
                    break
    return counts, underflow, overflow


def make_fit(rms, degenerate=False):
    return FitResult(GaborParams(1.0, 0.0, 0.0, 0.0, 1.0), rms, degenerate, 0, 0)


class TestPercentile:
    def test_even_length_median(self):
        assert percentile([1, 2, 3, 4], 50) == 2.5

    def test_singleton(self):
        for p in (0, 13.7, 50, 100):
            assert percentile([7], p) == 7.0

    def test_matches_oracle_exactly(self):
        rng = np.random.default_rng(17)
        values = rng.standard_normal(1000).tolist()
        for p in (5, 25, 50, 75, 95):
            assert percentile(values, p) == percentile_oracle(values, p)

    def test_empty(self):
        with pytest.raises(ValueError):
            percentile([], 50)

    def test_out_of_range_p(self):
        with pytest.raises(ValueError):
            percentile([1.0], 101)

    @given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=200),
           st.floats(min_value=0, max_value=100))
    def test_oracle_property(self, values, p):
        assert percentile(values, p) == percentile_oracle(values, p)


class TestLayerSummary:
    def test_constant_data(self):
        fits = [make_fit(0.01) for _ in range(5)]
        s = layer_summary(fits, "layer")
        assert (s.p5, s.q1, s.median, s.q3, s.p95) == (0.01,) * 5
        assert s.count == 5 and s.degenerate_count == 0

    def test_degenerate_exclusion(self):
        fits = [make_fit(0.0, degenerate=True)] + [make_fit(v) for v in (0.1, 0.2, 0.3, 0.4)]
        s = layer_summary(fits, "layer")
        assert s.count == 5 and s.degenerate_count == 1
        assert s.median == percentile([0.1, 0.2, 0.3, 0.4], 50)

    def test_adding_degenerate_changes_nothing(self):
        base = [make_fit(v) for v in np.random.default_rng(0).uniform(0, 1, 30)]
        with_degenerate = base + [make_fit(0.0, degenerate=True)]
        a = layer_summary(base, "x")
        b = layer_summary(with_degenerate, "x")
        assert (a.median, a.q1, a.q3, a.p5, a.p95) == (b.median, b.q1, b.q3, b.p5, b.p95)

    def test_matches_oracle(self):
        rng = np.random.default_rng(23)
        values = rng.uniform(0, 0.2, 200).tolist()
        s = layer_summary([make_fit(v) for v in values], "layer")
        assert s.median == percentile_oracle(values, 50)
        assert s.q1 == percentile_oracle(values, 25)
        assert s.q3 == percentile_oracle(values, 75)
        assert s.p5 == percentile_oracle(values, 5)
        assert s.p95 == percentile_oracle(values, 95)

    def test_all_degenerate(self):
        s = layer_summary([make_fit(0.0, degenerate=True)] * 3, "layer")
        assert s.count == 3 and s.degenerate_count == 3
        assert s.median is None and s.p95 is None

    @given(st.lists(st.floats(min_value=0, max_value=10), min_size=1, max_size=100))
    @settings(max_examples=50)
    def test_ordering_invariant(self, values):
        s = layer_summary([make_fit(v) for v in values], "fuzz")
        assert s.p5 <= s.q1 <= s.median <= s.q3 <= s.p95


class TestHistogram:
    def test_one_per_bin(self):
        h = histogram([0.005, 0.05, 0.5], [0, 0.01, 0.1, 1])
        assert h.counts == (1, 1, 1)
        assert h.underflow == 0 and h.overflow == 0

    def test_empty_values(self):
        h = histogram([], [0, 1, 2])
        assert h.counts == (0, 0) and h.total == 0

    def test_overflow_underflow(self):
        h = histogram([-1, 0.5, 1.0, 2.0], [0, 1])
        assert h.counts == (1,)
        assert h.underflow == 1 and h.overflow == 2
        assert h.total == 4

    def test_non_monotone_edges(self):
        with pytest.raises(ValueError):
            histogram([1.0], [0, 2, 1])

    def test_uniform_draws_within_binomial_bound(self):
        rng = np.random.default_rng(31)
        values = rng.uniform(0, 1, 10000)
        h = histogram(values, np.linspace(0, 1, 11))
        sigma = math.sqrt(10000 * 0.1 * 0.9)
        for count in h.counts:
            assert abs(count - 1000) < 5 * sigma
        assert h.total == 10000

    @given(st.lists(st.floats(min_value=-5, max_value=5), max_size=300))
    @settings(max_examples=50)
    def test_matches_oracle(self, values):
        edges = [-4.0, -1.0, 0.0, 0.5, 3.0]
        h = histogram(values, edges)
        counts, underflow, overflow = histogram_oracle(values, edges)
        assert list(h.counts) == counts
        assert h.underflow == underflow and h.overflow == overflow
        assert h.total == len(values)


class TestCalibration:
    TRUTH = GaborParams(1.0, 0.0, math.pi / 2, 0.0, 2.5)

    def test_zero_noise(self):
        points = calibration_curve(11, self.TRUTH, [0.0, 0.05], trials=10, seed=0)
        assert points[0].mean_rms == 0.0

    def test_analytic_limit(self):
        fractions = [0.02, 0.06, 0.1]
        points = calibration_curve(11, self.TRUTH, fractions, trials=500, seed=0)
        for p in points:
            expected = p.noise_fraction * 2.0 / math.sqrt(3)
            assert p.mean_rms == pytest.approx(expected, rel=0.05)

    def test_strictly_increasing(self):
        fractions = [i / 100 for i in range(11)]
        points = calibration_curve(11, self.TRUTH, fractions, trials=200, seed=3)
        values = [p.mean_rms for p in points]
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_deterministic(self):
        a = calibration_curve(9, self.TRUTH, [0.01, 0.05], trials=50, seed=11)
        b = calibration_curve(9, self.TRUTH, [0.01, 0.05], trials=50, seed=11)
        assert a == b

    def test_validation(self):
        with pytest.raises(ValueError):
            calibration_curve(9, self.TRUTH, [0.05, 0.01], trials=10, seed=0)
        with pytest.raises(ValueError):
            calibration_curve(9, self.TRUTH, [-0.1], trials=10, seed=0)
        with pytest.raises(ValueError):
            calibration_curve(9, self.TRUTH, [0.1], trials=0, seed=0)


def test_log_spaced_edges():
    edges = log_spaced_edges(50)
    assert len(edges) == 51
    assert edges[0] == pytest.approx(1e-6)
    assert edges[-1] == pytest.approx(1.0)
    assert np.all(np.diff(edges) > 0)
