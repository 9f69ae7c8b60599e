"""Tests for low-variability period extraction, scaling, and hazards."""

import numpy as np
import pytest

from econokit import mlvp
from econokit.series import CascadeSpec, TimeSeries, generate_binomial_cascade


def make_series(values, interval=1.0, volume=None):
    return TimeSeries(np.asarray(values, dtype=float),
                      sample_interval=interval,
                      volume=None if volume is None else np.asarray(volume, float))


def random_series(rng, length=None):
    n = length or rng.integers(30, 200)
    return make_series(np.cumsum(rng.standard_normal(n)))


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            mlvp.MlvpConfig(delta=0.0, window=2)
        with pytest.raises(ValueError):
            mlvp.MlvpConfig(delta=1.0, window=0)
        with pytest.raises(ValueError):
            mlvp.MlvpConfig(delta=1.0, window=2, mode="median")


class TestExtractPeriods:
    def test_constant_series_single_censored_period(self):
        ser = make_series(np.full(20, 3.0))
        lv = mlvp.extract_periods(ser, mlvp.MlvpConfig(delta=0.1, window=4))
        assert len(lv.periods) == 1
        p = lv.periods[0]
        assert (p.start, p.length, p.censored) == (3, 17, True)

    def test_window_one_degeneracy(self):
        ser = make_series([0, 0, 0, 10, 0, 0, 0])
        lv = mlvp.extract_periods(ser, mlvp.MlvpConfig(delta=0.5, window=1))
        assert len(lv.periods) == 1
        assert lv.periods[0].length == 7

    def test_hand_trace_window_two(self):
        ser = make_series([0, 0, 0, 10, 0, 0, 0])
        lv = mlvp.extract_periods(ser, mlvp.MlvpConfig(delta=0.5, window=2))
        spans = [(p.start, p.length, p.censored) for p in lv.periods]
        assert spans == [(1, 2, False), (5, 2, True)]

    def test_relative_mode_requires_positive_mean(self):
        ser = make_series([1.0, 1.0, -3.0, 1.0, 1.0])
        with pytest.raises(ValueError, match="index"):
            mlvp.extract_periods(ser, mlvp.MlvpConfig(delta=0.5, window=2,
                                                      mode="relative"))

    def test_series_must_exceed_window(self):
        ser = make_series([1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            mlvp.extract_periods(ser, mlvp.MlvpConfig(delta=1.0, window=3))


class TestPeriodInvariants:
    """Maximality, disjointness, completeness, monotonicity, equivariance."""

    def check_maximality(self, ser, cfg, lv):
        dev = mlvp.deviations(ser, cfg)
        quiet = dev <= cfg.delta
        for p in lv.periods:
            assert np.all(quiet[p.start:p.end])
            if p.start > cfg.window - 1:
                assert not quiet[p.start - 1]
            if p.end < len(ser):
                assert not quiet[p.end]
            else:
                assert p.censored

    def test_randomized_invariants(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            ser = random_series(rng)
            w = int(rng.integers(2, 8))
            delta = float(rng.uniform(0.2, 3.0))
            cfg = mlvp.MlvpConfig(delta=delta, window=w)
            lv = mlvp.extract_periods(ser, cfg)
            self.check_maximality(ser, cfg, lv)
            # disjointness and completeness
            covered = np.zeros(len(ser), dtype=int)
            for p in lv.periods:
                covered[p.start:p.end] += 1
            assert covered.max() <= 1
            dev = mlvp.deviations(ser, cfg)
            quiet_idx = np.nonzero(dev <= delta)[0]
            assert np.array_equal(np.nonzero(covered)[0], quiet_idx)

    def test_monotone_in_delta(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            ser = random_series(rng)
            w = int(rng.integers(2, 6))
            small = mlvp.extract_periods(ser, mlvp.MlvpConfig(delta=0.5, window=w))
            large = mlvp.extract_periods(ser, mlvp.MlvpConfig(delta=1.5, window=w))
            for p in small.periods:
                assert any(q.start <= p.start and q.end >= p.end
                           for q in large.periods)

    def test_scale_equivariance_absolute_mode(self):
        rng = np.random.default_rng(8)
        ser = random_series(rng, length=150)
        cfg = mlvp.MlvpConfig(delta=0.75, window=3)
        base = mlvp.extract_periods(ser, cfg)
        scaled = mlvp.extract_periods(
            make_series(4.0 * ser.values),
            mlvp.MlvpConfig(delta=4.0 * 0.75, window=3))
        assert [(p.start, p.length) for p in base.periods] == \
               [(p.start, p.length) for p in scaled.periods]

    def test_shift_invariance_absolute_mode(self):
        rng = np.random.default_rng(9)
        ser = random_series(rng, length=150)
        cfg = mlvp.MlvpConfig(delta=0.75, window=3)
        base = mlvp.extract_periods(ser, cfg)
        shifted = mlvp.extract_periods(make_series(ser.values + 12.5), cfg)
        assert [(p.start, p.length) for p in base.periods] == \
               [(p.start, p.length) for p in shifted.periods]


def periods_from_lengths(lengths, censored=None):
    censored = censored or [False] * len(lengths)
    start = 0
    periods = []
    for length, c in zip(lengths, censored):
        periods.append(mlvp.Period(start, length, c))
        start += length + 2
    return mlvp.LowVarPeriods(periods, series_length=start + 10,
                              config=mlvp.MlvpConfig(delta=1.0, window=2))


class TestSurvivalCurve:
    def test_hand_count(self):
        curve = mlvp.survival_curve(periods_from_lengths([3, 5, 5, 9]))
        lookup = dict(zip(curve.n_values.tolist(), curve.counts.tolist()))
        assert lookup[4] == 3
        assert lookup[6] == 1
        assert lookup[10] == 0

    def test_single_period(self):
        curve = mlvp.survival_curve(periods_from_lengths([6]))
        assert np.all(curve.counts[:6] == 1)

    def test_equal_lengths_step(self):
        curve = mlvp.survival_curve(periods_from_lengths([4] * 10))
        assert np.all(curve.counts[:4] == 10)
        assert curve.counts[4] == 0

    def test_counts_start_at_total_and_decrease(self):
        curve = mlvp.survival_curve(periods_from_lengths([1, 2, 3, 4, 5]))
        assert curve.counts[0] == 5
        assert np.all(np.diff(curve.counts) <= 0)

    def test_censoring_flag(self):
        lv = periods_from_lengths([3, 5], censored=[False, True])
        excl = mlvp.survival_curve(lv, "exclude")
        incl = mlvp.survival_curve(lv, "include")
        assert excl.counts[0] == 1
        assert incl.counts[0] == 2

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mlvp.survival_curve(periods_from_lengths([]))


class TestFitScaling:
    def test_exact_inverse_law(self):
        n = np.arange(1, 201)
        curve = mlvp.SurvivalCurve(n, 100.0 * n ** -1.0)
        fit = mlvp.fit_scaling(curve, n_min=1, n_max=200)
        assert fit.alpha == pytest.approx(1.0, abs=1e-9)
        assert fit.r0 == pytest.approx(100.0, rel=1e-9)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_exact_half_exponent(self):
        n = np.arange(1, 201)
        curve = mlvp.SurvivalCurve(n, 50.0 * n ** -0.5)
        fit = mlvp.fit_scaling(curve, n_min=1, n_max=200)
        assert fit.alpha == pytest.approx(0.5, abs=1e-9)

    def test_exponential_rejected_by_r2(self):
        n = np.arange(1, 21)
        power = mlvp.fit_scaling(mlvp.SurvivalCurve(n, 100.0 * n ** -1.0),
                                 n_min=1, n_max=20)
        expo = mlvp.fit_scaling(mlvp.SurvivalCurve(n, 100.0 * np.exp(-n)),
                                n_min=1, n_max=20)
        assert expo.r_squared < 0.95 < power.r_squared

    def test_insufficient_points(self):
        n = np.arange(1, 5)
        with pytest.raises(ValueError):
            mlvp.fit_scaling(mlvp.SurvivalCurve(n, np.array([5.0, 0, 0, 0])),
                             n_min=1, n_max=4)


class TestCollapse:
    def test_grid_too_small(self):
        ser = generate_binomial_cascade(CascadeSpec(p=0.7, depth=10, seed=0))
        with pytest.raises(mlvp.GridTooSmallError):
            mlvp.collapse_test(ser, [0.01], [2])

    def test_cascade_collapse_structure(self):
        ser = generate_binomial_cascade(CascadeSpec(p=0.7, depth=14, seed=1))
        deltas = mlvp.default_delta_grid(ser, 2, 5)
        result = mlvp.collapse_test(ser, deltas, [2, 4, 8])
        assert result.cells, "expected at least one scaling cell"
        for cell in result.cells:
            assert cell.u == pytest.approx(
                np.log(cell.delta) / np.log(cell.window * ser.sample_interval))
            assert cell.n_periods >= 30
        assert np.isfinite(result.quality)

    def test_dropped_cells_reported(self):
        rng = np.random.default_rng(2)
        ser = make_series(np.cumsum(rng.standard_normal(400)), interval=0.25)
        result = mlvp.collapse_test(ser, [1e-6, 1e-5, 1e-4], [2, 8, 16])
        assert result.dropped
        assert all("reason" in d for d in result.dropped)

    def test_unit_window_time_rejected(self):
        rng = np.random.default_rng(3)
        ser = make_series(np.cumsum(rng.standard_normal(4000)), interval=0.5)
        with pytest.raises(ValueError):
            mlvp.collapse_test(ser, [0.5, 1.0, 2.0], [2, 4, 8])


class TestHazard:
    def test_identity_with_survival(self):
        rng = np.random.default_rng(4)
        lengths = rng.integers(1, 40, size=400).tolist()
        lv = periods_from_lengths(lengths)
        curve = mlvp.survival_curve(lv)
        hz = mlvp.hazard_curve(lv, log_bins=False)
        r = dict(zip(curve.n_values.tolist(), curve.counts.tolist()))
        for length, h in zip(hz.lengths, hz.hazards):
            l = int(length)
            if r.get(l, 0) > 0:
                assert r.get(l + 1, 0) / r[l] == pytest.approx(1.0 - h, abs=1e-12)

    def test_geometric_lengths_flat_hazard(self):
        rng = np.random.default_rng(5)
        lv = periods_from_lengths(rng.geometric(0.2, size=20_000).tolist())
        hz = mlvp.hazard_curve(lv)
        slope = mlvp.hazard_loglog_slope(hz)
        assert abs(slope) < 0.1

    def test_power_law_lengths_inverse_hazard(self):
        rng = np.random.default_rng(6)
        lengths = np.ceil(rng.uniform(size=50_000) ** (-1.0 / 1.2)).astype(int)
        lv = periods_from_lengths(lengths.tolist())
        hz = mlvp.hazard_curve(lv)
        slope = mlvp.hazard_loglog_slope(hz, min_length=4)
        assert slope == pytest.approx(-1.0, abs=0.15)

    def test_sparse_bins_merged_and_reported(self):
        rng = np.random.default_rng(7)
        lengths = np.concatenate([rng.integers(1, 5, 300), [500]])
        lv = periods_from_lengths(lengths.tolist())
        hz = mlvp.hazard_curve(lv)
        assert hz.merged_bins > 0


class TestMultivariate:
    def test_idempotent_on_identical_channels(self):
        rng = np.random.default_rng(8)
        x = np.abs(np.cumsum(rng.standard_normal(120))) + 1.0
        ser = make_series(x, volume=x)
        uni = mlvp.extract_periods(ser, mlvp.MlvpConfig(delta=0.8, window=3))
        multi = mlvp.multivariate_periods(ser, 0.8, 0.8, 3, combine="both_quiet")
        assert [(p.start, p.length) for p in uni.periods] == \
               [(p.start, p.length) for p in multi.periods]

    def test_absorbing_cases(self):
        rng = np.random.default_rng(9)
        x = np.cumsum(rng.standard_normal(120))
        ser = make_series(x, volume=np.full(120, 5.0))
        uni = mlvp.extract_periods(ser, mlvp.MlvpConfig(delta=0.8, window=3))
        both = mlvp.multivariate_periods(ser, 0.8, 0.1, 3, combine="both_quiet")
        either = mlvp.multivariate_periods(ser, 0.8, 0.1, 3, combine="either_quiet")
        assert [(p.start, p.length) for p in uni.periods] == \
               [(p.start, p.length) for p in both.periods]
        assert len(either.periods) == 1
        assert either.periods[0].length == 118

    def test_hand_trace_eight_samples(self):
        ser = make_series([0, 0, 10, 0, 0, 10, 0, 0],
                          volume=[0, 0, 0, 0, 8, 8, 0, 0])
        both = mlvp.multivariate_periods(ser, 1.0, 1.0, 2, combine="both_quiet")
        either = mlvp.multivariate_periods(ser, 1.0, 1.0, 2, combine="either_quiet")
        assert [(p.start, p.length, p.censored) for p in both.periods] == \
               [(1, 1, False), (7, 1, True)]
        assert [(p.start, p.length, p.censored) for p in either.periods] == \
               [(1, 5, False), (7, 1, True)]

    def test_missing_volume_rejected(self):
        ser = make_series(np.arange(50.0))
        with pytest.raises(ValueError):
            mlvp.multivariate_periods(ser, 1.0, 1.0, 2)


class TestDefaultDeltaGrid:
    def test_log_spaced_within_percentiles(self):
        rng = np.random.default_rng(10)
        ser = make_series(np.cumsum(rng.standard_normal(2000)))
        grid = mlvp.default_delta_grid(ser, 4, 6)
        assert len(grid) == 6
        assert np.all(np.diff(np.log(grid)) > 0)
        ratios = np.diff(np.log(grid))
        assert np.allclose(ratios, ratios[0])
