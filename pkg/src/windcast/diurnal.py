"""Diurnal-cycle diagnostics: windowed speed autocorrelation by month.

The strength of the daily wind pattern at a site is summarized by the
normalized autocorrelation of speed at a 24-hour lag, estimated over
non-overlapping five-day windows and averaged per calendar month. Windows
keep to themselves: lagged pairs never cross a window edge, and a window
with too many gaps or no variance is skipped rather than biased.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .errors import DomainError, SeriesTooShort
from .series import WindSeries

DEFAULT_WINDOW_HOURS = 120
DEFAULT_LAG_HOURS = 24

# A window with more than this fraction of gaps is skipped.
MAX_GAP_FRACTION = 0.2


@dataclass(frozen=True)
class WindowValue:
    """Autocorrelation estimate from one window."""

    start: datetime
    value: float
    n_pairs: int


@dataclass(frozen=True)
class DiurnalRecord:
    """Monthly mean 24 h autocorrelation; month labeled as YYYY-MM."""

    month: str
    r_ss_24: float
    windows_used: int

    def __post_init__(self) -> None:
        if abs(self.r_ss_24) > 1.0 + 1e-9:
            raise DomainError(f"autocorrelation {self.r_ss_24} outside [-1, 1]")
        if self.windows_used < 1:
            raise DomainError("a record needs at least one window")


def windowed_autocorrelation(
    series: WindSeries,
    lag: int = DEFAULT_LAG_HOURS,
    window: int = DEFAULT_WINDOW_HOURS,
) -> list[WindowValue]:
    """Per-window lagged autocorrelation of speed.

    The series is cut into consecutive complete windows of ``window`` slots.
    In each, the estimate is the mean over in-window pairs (t, t+lag) with
    data at both ends of (s_t - mean)(s_{t+lag} - mean) / variance, with
    mean and variance taken over the window's non-gap samples. Windows with
    more than 20% gaps, no variance, or no valid pair are omitted.
    """
    if lag < 0:
        raise DomainError(f"lag must be >= 0, got {lag}")
    if window <= lag:
        raise DomainError(f"window ({window}) must exceed lag ({lag})")
    n = series.n_slots
    if n < window:
        raise SeriesTooShort(f"series has {n} slots; one window needs {window}")

    values: list[WindowValue] = []
    s = series.s
    for start in range(0, n - window + 1, window):
        block = s[start:start + window]
        valid = ~np.isnan(block)
        if (window - valid.sum()) > MAX_GAP_FRACTION * window:
            continue
        sample = block[valid]
        mean = sample.mean()
        var = sample.var()
        if var == 0.0:
            continue
        left = block[: window - lag] if lag else block
        right = block[lag:]
        pair_ok = ~np.isnan(left) & ~np.isnan(right)
        n_pairs = int(pair_ok.sum())
        if n_pairs == 0:
            continue
        products = (left[pair_ok] - mean) * (right[pair_ok] - mean)
        values.append(WindowValue(
            start=series.instant_at(start),
            value=float(products.mean() / var),
            n_pairs=n_pairs,
        ))
    return values


def monthly_diurnal_strength(
    series: WindSeries,
    lag: int = DEFAULT_LAG_HOURS,
    window: int = DEFAULT_WINDOW_HOURS,
) -> list[DiurnalRecord]:
    """Group window values by the calendar month of the window start and
    average. Months contributing no usable window are absent."""
    values = windowed_autocorrelation(series, lag, window)
    if not values:
        raise SeriesTooShort("no window produced a usable estimate")
    by_month: dict[str, list[float]] = {}
    for wv in values:
        label = f"{wv.start.year:04d}-{wv.start.month:02d}"
        by_month.setdefault(label, []).append(wv.value)
    records = [
        DiurnalRecord(month=label,
                      r_ss_24=float(np.mean(vals)),
                      windows_used=len(vals))
        for label, vals in sorted(by_month.items())
    ]
    return records
