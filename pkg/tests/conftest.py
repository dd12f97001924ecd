"""Shared synthetic-data helpers for the test suite."""

from datetime import datetime, timedelta

import numpy as np
import pytest

from windcast.series import WindSeries

START = datetime(2021, 1, 1, 0, 0)
HOUR = timedelta(hours=1)


def ar1_speeds(n, rng, mean=5.0, phi=0.8, sd=0.5):
    """Positive AR(1) speed track: mean-reverting noise clipped at zero."""
    eps = rng.normal(0.0, sd, size=n)
    x = np.empty(n)
    x[0] = eps[0]
    for t in range(1, n):
        x[t] = phi * x[t - 1] + eps[t]
    return np.clip(mean + x, 0.0, None)


def make_speed_series(n, seed=0, start=START, gaps=()):
    """Speed-only hourly series (z=0, m=-s) with optional gap slots."""
    rng = np.random.default_rng(seed)
    s = ar1_speeds(n, rng)
    s[list(gaps)] = np.nan
    z = np.where(np.isnan(s), np.nan, 0.0)
    return WindSeries(start, HOUR, s.copy(), z, -s)


def make_wind_series(n, seed=0, start=START, gaps=()):
    """Hourly series with genuinely two-dimensional wind components."""
    rng = np.random.default_rng(seed)
    z = ar1_speeds(n, rng, mean=2.0) - 2.0 + rng.normal(0, 1.5, n)
    m = ar1_speeds(n, rng, mean=3.0) * np.cos(np.arange(n) / 40.0)
    s = np.hypot(z, m)
    for i in gaps:
        s[i] = z[i] = m[i] = np.nan
    return WindSeries(start, HOUR, s, z, m)


@pytest.fixture
def speed_series():
    return make_speed_series(400, seed=11)


@pytest.fixture
def wind_series():
    return make_wind_series(400, seed=7)
