from datetime import datetime, timedelta

import numpy as np
import pytest

from windcast.diurnal import (
    DiurnalRecord,
    monthly_diurnal_strength,
    windowed_autocorrelation,
)
from windcast.errors import DomainError, SeriesTooShort
from windcast.series import WindSeries

START = datetime(2019, 1, 1)
HOUR = timedelta(hours=1)


def series_of(values, start=START):
    s = np.asarray(values, dtype=float)
    z = np.where(np.isnan(s), np.nan, 0.0)
    return WindSeries(start, HOUR, s.copy(), z, -s)


def sinusoid(n_hours, amplitude=2.0, mean=5.0, period=24.0):
    t = np.arange(n_hours)
    return mean + amplitude * np.sin(2 * np.pi * t / period)


def ar1(n_hours, seed, phi=0.8, sd=0.5):
    rng = np.random.default_rng(seed)
    eps = rng.normal(0, sd, n_hours)
    x = np.zeros(n_hours)
    for i in range(1, n_hours):
        x[i] = phi * x[i - 1] + eps[i]
    return x


class TestWindowedAutocorrelation:
    def test_lag_zero_is_one(self):
        series = series_of(sinusoid(480) + ar1(480, 3))
        for wv in windowed_autocorrelation(series, lag=0):
            assert wv.value == pytest.approx(1.0, abs=1e-12)

    def test_pure_sinusoid_near_one(self):
        series = series_of(sinusoid(1200))
        values = windowed_autocorrelation(series, lag=24)
        assert len(values) == 10
        assert all(wv.value >= 0.99 for wv in values)

    def test_white_noise_small(self):
        rng = np.random.default_rng(42)
        series = series_of(5 + rng.normal(0, 1, 24 * 300))
        values = windowed_autocorrelation(series, lag=24)
        assert np.mean([abs(wv.value) for wv in values]) <= 0.25

    def test_bounded_magnitude(self):
        rng = np.random.default_rng(5)
        for seed in range(5):
            series = series_of(
                np.clip(sinusoid(720) + ar1(720, seed), 0, None))
            for wv in windowed_autocorrelation(series, lag=24):
                assert abs(wv.value) <= 1.0 + 1e-6

    def test_affine_invariance(self):
        base = sinusoid(600) + ar1(600, 9)
        base -= base.min() - 1.0
        original = windowed_autocorrelation(series_of(base), lag=24)
        scaled = windowed_autocorrelation(series_of(3.5 * base + 2.0), lag=24)
        assert len(original) == len(scaled)
        for a, b in zip(original, scaled):
            assert b.value == pytest.approx(a.value, abs=1e-9)

    def test_gap_fraction_threshold(self):
        # 20% gaps is tolerated; more is not.
        s = sinusoid(240)
        keep = s.copy()
        keep[:24] = np.nan                       # exactly 20% of window 0
        kept = windowed_autocorrelation(series_of(keep), lag=24)
        assert len(kept) == 2
        drop = s.copy()
        drop[:25] = np.nan                       # just over the threshold
        dropped = windowed_autocorrelation(series_of(drop), lag=24)
        assert len(dropped) == 1

    def test_pairs_never_cross_windows(self):
        # Window 0 flat, window 1 sinusoidal: flat window is skipped for
        # zero variance and the sinusoid window is untouched by it.
        s = np.concatenate([np.full(120, 5.0), sinusoid(120)])
        values = windowed_autocorrelation(series_of(s), lag=24)
        assert len(values) == 1
        assert values[0].start == START + 120 * HOUR
        assert values[0].value >= 0.99

    def test_validation(self):
        series = series_of(sinusoid(240))
        with pytest.raises(DomainError):
            windowed_autocorrelation(series, lag=120, window=120)
        with pytest.raises(SeriesTooShort):
            windowed_autocorrelation(series_of(sinusoid(100)), lag=24)

    def test_pair_counts(self):
        series = series_of(sinusoid(240))
        values = windowed_autocorrelation(series, lag=24, window=120)
        assert all(wv.n_pairs == 96 for wv in values)


class TestMonthlyStrength:
    def test_sinusoid_month_near_one(self):
        series = series_of(sinusoid(24 * 31))
        records = monthly_diurnal_strength(series)
        assert records[0].month == "2019-01"
        assert records[0].r_ss_24 == pytest.approx(1.0, abs=1e-2)

    def test_amplitude_monotonic(self):
        def with_amplitude(a):
            s = 5 + a * np.sin(2 * np.pi * np.arange(24 * 60) / 24)
            return series_of(np.clip(s + ar1(24 * 60, 11), 0, None))

        means = []
        for a in (0.0, 1.0, 2.0):
            records = monthly_diurnal_strength(with_amplitude(a))
            means.append(np.mean([r.r_ss_24 for r in records]))
        assert means[0] < means[1] < means[2]

    def test_gap_month_absent(self):
        s = np.concatenate([
            sinusoid(24 * 31),               # January
            np.full(24 * 28, np.nan),        # February entirely missing
            sinusoid(24 * 31),               # March
        ])
        records = monthly_diurnal_strength(series_of(s))
        months = [r.month for r in records]
        assert "2019-02" not in months
        assert "2019-01" in months and "2019-03" in months

    def test_constant_series_has_no_usable_window(self):
        with pytest.raises(SeriesTooShort):
            monthly_diurnal_strength(series_of(np.full(600, 3.0)))

    def test_windows_used_counts(self):
        series = series_of(sinusoid(24 * 31))   # 744 h -> 6 windows
        records = monthly_diurnal_strength(series)
        assert records[0].windows_used == 6

    def test_record_validation(self):
        with pytest.raises(DomainError):
            DiurnalRecord("2019-01", 1.5, 3)
        with pytest.raises(DomainError):
            DiurnalRecord("2019-01", 0.5, 0)
