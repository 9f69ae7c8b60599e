"""Tests for the time-series container, CSV round trips, and generators."""

import numpy as np
import pytest

from econokit import series


class TestTimeSeries:
    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            series.TimeSeries(np.array([1.0]), sample_interval=1.0)

    def test_bad_interval_rejected(self):
        with pytest.raises(ValueError):
            series.TimeSeries(np.arange(5.0), sample_interval=0.0)

    def test_volume_length_must_match(self):
        with pytest.raises(ValueError):
            series.TimeSeries(np.arange(5.0), sample_interval=1.0,
                              volume=np.ones(4))


class TestLoadCsv:
    def test_basic_parse(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("t,value\n0,1\n1,2\n2,3\n")
        ser = series.load_csv(path)
        assert ser.values.tolist() == [1.0, 2.0, 3.0]
        assert ser.sample_interval == 1.0

    def test_volume_column(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("t,value,volume\n0,1,10\n1,2,20\n")
        ser = series.load_csv(path)
        assert ser.volume.tolist() == [10.0, 20.0]

    def test_malformed_row_names_line(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("t,value\n0,1\n1,oops\n2,3\n")
        with pytest.raises(ValueError, match="line 3"):
            series.load_csv(path)

    def test_gap_warning(self, tmp_path):
        path = tmp_path / "a.csv"
        path.write_text("t,value\n0,1\n1,2\n2,3\n10,4\n11,5\n")
        ser = series.load_csv(path)
        assert any("gap" in w for w in ser.warnings)

    def test_interval_header_round_trip(self, tmp_path):
        path = tmp_path / "a.csv"
        original = series.TimeSeries(np.array([0.5, 1.5, -0.25]),
                                     sample_interval=0.125)
        series.write_csv(path, original)
        loaded = series.load_csv(path)
        assert loaded.sample_interval == 0.125
        assert np.array_equal(loaded.values, original.values)

    def test_write_is_byte_deterministic(self, tmp_path):
        rng = np.random.default_rng(0)
        ser = series.TimeSeries(rng.standard_normal(100), sample_interval=1.0)
        p1, p2 = tmp_path / "x1.csv", tmp_path / "x2.csv"
        series.write_csv(p1, ser)
        series.write_csv(p2, ser)
        assert p1.read_bytes() == p2.read_bytes()


class TestSlidingMean:
    def test_hand_values(self):
        out = series.sliding_mean(np.array([0.0, 2.0, 4.0]), 2)
        assert np.isnan(out[0])
        assert out[1] == pytest.approx(1.0)
        assert out[2] == pytest.approx(3.0)

    def test_window_one_identity(self):
        x = np.array([3.0, -1.0, 2.0])
        assert np.array_equal(series.sliding_mean(x, 1), x)

    def test_constant_series(self):
        out = series.sliding_mean(np.full(10, 7.0), 4)
        assert np.all(out[3:] == 7.0)
        assert np.all(np.isnan(out[:3]))

    def test_window_too_large(self):
        with pytest.raises(ValueError):
            series.sliding_mean(np.arange(3.0), 4)

    def test_matches_naive_computation(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(200)
        for w in (2, 5, 17):
            out = series.sliding_mean(x, w)
            for i in range(w - 1, len(x)):
                assert out[i] == pytest.approx(x[i - w + 1:i + 1].mean(), abs=1e-12)


class TestBinomialCascade:
    def test_symmetric_multiplier_is_straight_line(self):
        ser = series.generate_binomial_cascade(series.CascadeSpec(p=0.5, depth=6, seed=0))
        expected = np.linspace(0.0, 1.0, 2 ** 6 + 1)
        assert np.allclose(ser.values, expected, atol=1e-12)

    def test_depth_one_hand_construction(self):
        ser = series.generate_binomial_cascade(series.CascadeSpec(p=0.7, depth=1, seed=2))
        assert ser.values == pytest.approx([0.0, 0.7, 1.0])

    def test_mass_conservation(self):
        ser = series.generate_binomial_cascade(series.CascadeSpec(p=0.7, depth=16, seed=9))
        assert ser.values[0] == 0.0
        assert ser.values[-1] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(ser.values) >= 0)

    def test_deterministic_and_length_exact(self):
        spec = series.CascadeSpec(p=0.6, depth=10, seed=4)
        a = series.generate_binomial_cascade(spec)
        b = series.generate_binomial_cascade(spec)
        assert np.array_equal(a.values, b.values)
        assert len(a.values) == 2 ** 10 + 1
        assert a.sample_interval == pytest.approx(2.0 ** -10)

    def test_rejects_bad_spec(self):
        with pytest.raises(ValueError):
            series.CascadeSpec(p=1.0, depth=4, seed=0)
        with pytest.raises(ValueError):
            series.CascadeSpec(p=0.7, depth=0, seed=0)


class TestFgnPath:
    def test_brownian_increments_are_white(self):
        ser = series.generate_fgn_path(0.5, 2 ** 14, seed=3)
        incr = np.diff(ser.values)
        rho = np.corrcoef(incr[:-1], incr[1:])[0, 1]
        assert abs(rho) < 3.0 / np.sqrt(len(incr))

    def test_deterministic(self):
        a = series.generate_fgn_path(0.7, 4096, seed=5)
        b = series.generate_fgn_path(0.7, 4096, seed=5)
        assert np.array_equal(a.values, b.values)

    def test_persistent_increments_correlate(self):
        ser = series.generate_fgn_path(0.8, 2 ** 14, seed=6)
        incr = np.diff(ser.values)
        rho = np.corrcoef(incr[:-1], incr[1:])[0, 1]
        assert rho > 0.1

    def test_rejects_bad_hurst(self):
        with pytest.raises(ValueError):
            series.generate_fgn_path(1.0, 1024, seed=0)
