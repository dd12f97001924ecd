"""Anemometer ingestion: raw CSV parsing, wind decomposition, hourly resampling.

The canonical in-memory object is :class:`WindSeries`, a gap-aware hourly grid
of wind samples. Each sample carries the speed ``s`` and the zonal/meridional
components ``(z, m)`` with ``s = sqrt(z**2 + m**2)``. Gaps are explicit: a slot
with no usable observations stays empty rather than being interpolated.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import IO, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from .errors import (
    CutoffNotAligned,
    CutoffOutsideRange,
    DomainError,
    EmptyInput,
    MissingColumn,
    NonMonotonicTimestamps,
)

HOUR = timedelta(hours=1)
_US = timedelta(microseconds=1)

# Relative tolerance for the s = sqrt(z^2 + m^2) consistency check.
_SPEED_RTOL = 1e-9


def _microseconds(delta: timedelta) -> int:
    return delta // _US


def _parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp, tolerating a trailing 'Z'."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


# ---------------------------------------------------------------------------
# raw observations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RawObservation:
    """One anemometer reading as recorded by the sensor.

    ``direction`` is the meteorological bearing the wind blows *from*,
    in degrees clockwise from north, or ``None`` when the row carries
    no direction.
    """

    timestamp: datetime
    speed: float
    direction: Optional[float] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.speed) or self.speed < 0:
            raise DomainError(f"speed must be finite and >= 0, got {self.speed}")
        if self.direction is not None and not 0.0 <= self.direction < 360.0:
            raise DomainError(
                f"direction must lie in [0, 360), got {self.direction}"
            )


@dataclass(frozen=True)
class ColumnSchema:
    """Names of the timestamp, speed and (optional) direction CSV columns."""

    time: str = "timestamp"
    speed: str = "speed"
    direction: Optional[str] = "direction"


@dataclass(frozen=True)
class ParseIssue:
    """One rejected or unparseable row. ``row`` is the 0-based data row index."""

    row: int
    code: str
    reason: str


@dataclass
class ParseReport:
    """Collected row-level problems from one :func:`parse_csv` run."""

    issues: list[ParseIssue] = field(default_factory=list)

    def add(self, row: int, code: str, reason: str) -> None:
        self.issues.append(ParseIssue(row, code, reason))

    def codes(self) -> list[str]:
        return [issue.code for issue in self.issues]

    def __len__(self) -> int:
        return len(self.issues)


def parse_csv(
    source: Union[str, Path, IO[str], IO[bytes]],
    schema: ColumnSchema = ColumnSchema(),
) -> tuple[list[RawObservation], ParseReport]:
    """Read raw observations from CSV with a header row.

    Rows that cannot be interpreted are reported in the returned
    :class:`ParseReport` (with the 0-based data row index) instead of being
    silently dropped. Rows with negative speed are rejected with code
    ``negative_speed``; a missing or empty direction field yields
    ``direction=None``.

    Raises :class:`MissingColumn` if a schema column is absent from the header.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return parse_csv(fh, schema)
    if isinstance(source, io.RawIOBase) or (
        hasattr(source, "read") and isinstance(source.read(0), bytes)
    ):
        source = io.TextIOWrapper(source, encoding="utf-8", newline="")

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInput("CSV source has no header row") from None
    header = [name.strip() for name in header]

    def column(name: str) -> int:
        try:
            return header.index(name)
        except ValueError:
            raise MissingColumn(f"column {name!r} not in header {header}") from None

    time_idx = column(schema.time)
    speed_idx = column(schema.speed)
    dir_idx = column(schema.direction) if schema.direction is not None else None

    observations: list[RawObservation] = []
    report = ParseReport()
    for row_index, row in enumerate(reader):
        if not row or all(not cell.strip() for cell in row):
            continue
        width = max(time_idx, speed_idx, dir_idx if dir_idx is not None else 0)
        if len(row) <= width:
            report.add(row_index, "short_row", f"expected > {width} fields, got {len(row)}")
            continue
        try:
            timestamp = _parse_timestamp(row[time_idx])
        except ValueError as exc:
            report.add(row_index, "bad_timestamp", str(exc))
            continue
        try:
            speed = float(row[speed_idx])
        except ValueError as exc:
            report.add(row_index, "bad_speed", str(exc))
            continue
        if not math.isfinite(speed):
            report.add(row_index, "bad_speed", f"non-finite speed {row[speed_idx]!r}")
            continue
        if speed < 0:
            report.add(row_index, "negative_speed", f"speed {speed} < 0")
            continue
        direction: Optional[float] = None
        if dir_idx is not None and row[dir_idx].strip():
            try:
                direction = float(row[dir_idx])
            except ValueError as exc:
                report.add(row_index, "bad_direction", str(exc))
                continue
            if not math.isfinite(direction) or not 0.0 <= direction < 360.0:
                report.add(
                    row_index, "direction_range", f"direction {direction} outside [0, 360)"
                )
                continue
        observations.append(RawObservation(timestamp, speed, direction))
    return observations, report


# ---------------------------------------------------------------------------
# wind decomposition
# ---------------------------------------------------------------------------

def decompose(speed: float, direction: float) -> tuple[float, float]:
    """Split a (speed, bearing) reading into zonal and meridional components.

    ``direction`` is the bearing the wind blows *from* (0 = north, clockwise,
    degrees), so the velocity vector points the opposite way:
    ``z = -speed * sin(direction)``, ``m = -speed * cos(direction)``.
    The speed is recoverable as ``sqrt(z**2 + m**2)``.
    """
    if not math.isfinite(speed) or speed < 0:
        raise DomainError(f"speed must be finite and >= 0, got {speed}")
    if not math.isfinite(direction) or not 0.0 <= direction < 360.0:
        raise DomainError(f"direction must lie in [0, 360), got {direction}")
    radians = math.radians(direction)
    return -speed * math.sin(radians), -speed * math.cos(radians)


def bearing_from_components(z: float, m: float) -> float:
    """Inverse of :func:`decompose`: the bearing in [0, 360) for (z, m).

    For calm air (z = m = 0) the bearing is reported as 0.
    """
    if z == 0.0 and m == 0.0:
        return 0.0
    return math.degrees(math.atan2(-z, -m)) % 360.0


# ---------------------------------------------------------------------------
# hourly series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WindSample:
    """One hourly wind state: speed plus zonal/meridional components (m/s)."""

    s: float
    z: float
    m: float

    def __post_init__(self) -> None:
        if self.s < 0:
            raise DomainError(f"speed must be >= 0, got {self.s}")
        norm = math.hypot(self.z, self.m)
        if abs(norm - self.s) > _SPEED_RTOL * max(1.0, abs(self.s)):
            raise DomainError(
                f"inconsistent sample: s={self.s} but hypot(z, m)={norm}"
            )

    @classmethod
    def from_components(cls, z: float, m: float) -> "WindSample":
        return cls(math.hypot(z, m), z, m)


@dataclass(frozen=True)
class WindSeries:
    """Uniform hourly wind sequence with explicit gaps.

    Slot ``i`` corresponds to the instant ``start + i * step`` exactly. Gaps
    are encoded as NaN in all three value arrays. Instances are immutable;
    the arrays are marked read-only at construction.
    """

    start: datetime
    step: timedelta
    s: np.ndarray
    z: np.ndarray
    m: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.s, dtype=float)
        z = np.asarray(self.z, dtype=float)
        m = np.asarray(self.m, dtype=float)
        if not (s.shape == z.shape == m.shape) or s.ndim != 1 or s.size == 0:
            raise DomainError("s, z, m must be equal-length 1-D arrays")
        if self.step <= timedelta(0):
            raise DomainError(f"step must be positive, got {self.step}")
        gap = np.isnan(s)
        if not np.array_equal(gap, np.isnan(z)) or not np.array_equal(gap, np.isnan(m)):
            raise DomainError("gap slots must be NaN in s, z and m simultaneously")
        if gap.all():
            raise EmptyInput("a WindSeries needs at least one non-gap slot")
        valid = ~gap
        norm = np.hypot(z[valid], m[valid])
        if not np.allclose(s[valid], norm, rtol=_SPEED_RTOL, atol=1e-12):
            raise DomainError("s must equal hypot(z, m) on every non-gap slot")
        if (s[valid] < 0).any():
            raise DomainError("speeds must be >= 0")
        for name, arr in (("s", s), ("z", z), ("m", m)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # -- construction --------------------------------------------------------

    @classmethod
    def from_samples(
        cls,
        start: datetime,
        samples: Iterable[Optional[WindSample]],
        step: timedelta = HOUR,
    ) -> "WindSeries":
        rows = list(samples)
        n = len(rows)
        s = np.full(n, np.nan)
        z = np.full(n, np.nan)
        m = np.full(n, np.nan)
        for i, sample in enumerate(rows):
            if sample is not None:
                s[i], z[i], m[i] = sample.s, sample.z, sample.m
        return cls(start, step, s, z, m)

    @classmethod
    def from_speeds(
        cls,
        start: datetime,
        speeds: Sequence[float],
        step: timedelta = HOUR,
    ) -> "WindSeries":
        """Build a speed-only series (bearing 0): z = 0, m = -speed.

        Convenient for synthetic data and speed-only workflows; the component
        designs are not meaningful on such a series.
        """
        s = np.asarray(speeds, dtype=float)
        z = np.where(np.isnan(s), np.nan, 0.0)
        return cls(start, step, s.copy(), z, -s)

    # -- accessors -------------------------------------------------------------

    @property
    def n_slots(self) -> int:
        return self.s.size

    @property
    def gap_mask(self) -> np.ndarray:
        return np.isnan(self.s)

    def instant_at(self, index: int) -> datetime:
        if not 0 <= index < self.n_slots:
            raise IndexError(index)
        return self.start + index * self.step

    def instants(self) -> list[datetime]:
        return [self.start + i * self.step for i in range(self.n_slots)]

    def index_of(self, instant: datetime) -> int:
        """Slot index of ``instant``; raises if off-grid or out of range."""
        offset = _microseconds(instant - self.start)
        step = _microseconds(self.step)
        if offset % step != 0:
            raise CutoffNotAligned(f"{instant} is not on the series grid")
        index = offset // step
        if not 0 <= index < self.n_slots:
            raise IndexError(f"{instant} outside the series range")
        return index

    def sample_at(self, index: int) -> Optional[WindSample]:
        if np.isnan(self.s[index]):
            return None
        return WindSample(float(self.s[index]), float(self.z[index]), float(self.m[index]))

    def samples(self) -> Iterator[Optional[WindSample]]:
        for i in range(self.n_slots):
            yield self.sample_at(i)

    def replace_slot(self, index: int, sample: Optional[WindSample]) -> "WindSeries":
        """Return a copy with one slot replaced (None makes it a gap)."""
        s, z, m = self.s.copy(), self.z.copy(), self.m.copy()
        if sample is None:
            s[index] = z[index] = m[index] = np.nan
        else:
            s[index], z[index], m[index] = sample.s, sample.z, sample.m
        return WindSeries(self.start, self.step, s, z, m)


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def resample_hourly(
    observations: Sequence[RawObservation],
    max_gap: timedelta = HOUR,
) -> WindSeries:
    """Average raw observations onto a uniform hourly grid.

    Each hourly slot takes the arithmetic mean of the zonal and meridional
    components of the observations in its centered one-hour window
    ``[T - 30min, T + 30min)``; the slot speed is recomputed from the averaged
    components. Observations sharing an exact timestamp are averaged first.
    A slot with no observation within ``max_gap`` of its center becomes a gap.

    Observations without a direction cannot be decomposed and are skipped.
    """
    if not observations:
        raise EmptyInput("no observations to resample")
    usable = [o for o in observations if o.direction is not None]
    if not usable:
        raise EmptyInput("no observations carry a direction; cannot decompose")
    try:
        usable.sort(key=lambda o: o.timestamp)
    except TypeError as exc:
        raise NonMonotonicTimestamps(
            f"timestamps are not mutually comparable: {exc}"
        ) from None

    # Average exact-duplicate timestamps on the decomposed components.
    times: list[datetime] = []
    z_vals: list[float] = []
    m_vals: list[float] = []
    i = 0
    while i < len(usable):
        j = i
        z_sum = m_sum = 0.0
        while j < len(usable) and usable[j].timestamp == usable[i].timestamp:
            z, m = decompose(usable[j].speed, usable[j].direction)
            z_sum += z
            m_sum += m
            j += 1
        count = j - i
        times.append(usable[i].timestamp)
        z_vals.append(z_sum / count)
        m_vals.append(m_sum / count)
        i = j

    first = times[0]
    step_us = _microseconds(HOUR)
    half_us = step_us // 2
    # Grid anchored at the hour nearest the first observation (ties round up).
    start = (first + timedelta(microseconds=half_us)).replace(
        minute=0, second=0, microsecond=0
    )

    offsets_us = np.array([_microseconds(t - start) for t in times], dtype=np.int64)
    slots = (offsets_us + half_us) // step_us
    n_slots = int(slots[-1]) + 1

    z_sum = np.zeros(n_slots)
    m_sum = np.zeros(n_slots)
    count = np.zeros(n_slots, dtype=np.int64)
    nearest_us = np.full(n_slots, np.inf)
    distance_us = np.abs(offsets_us - slots * step_us).astype(float)
    idx = slots.astype(np.intp)
    np.add.at(z_sum, idx, np.asarray(z_vals))
    np.add.at(m_sum, idx, np.asarray(m_vals))
    np.add.at(count, idx, 1)
    np.minimum.at(nearest_us, idx, distance_us)

    filled = (count > 0) & (nearest_us <= _microseconds(max_gap))
    if not filled.any():
        raise EmptyInput(f"no slot has an observation within {max_gap}")
    z_mean = np.full(n_slots, np.nan)
    m_mean = np.full(n_slots, np.nan)
    z_mean[filled] = z_sum[filled] / count[filled]
    m_mean[filled] = m_sum[filled] / count[filled]
    s_mean = np.where(filled, np.hypot(z_mean, m_mean), np.nan)
    return WindSeries(start, HOUR, s_mean, z_mean, m_mean)


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------

def split_at(series: WindSeries, cutoff: datetime) -> tuple[WindSeries, WindSeries]:
    """Split into (before cutoff, from cutoff on), preserving slot instants.

    The cutoff must fall on the series grid and both sides must retain data.
    """
    offset = _microseconds(cutoff - series.start)
    step = _microseconds(series.step)
    if offset % step != 0:
        raise CutoffNotAligned(f"cutoff {cutoff} is not aligned to the grid")
    index = offset // step
    if index <= 0 or index >= series.n_slots:
        raise CutoffOutsideRange(f"cutoff {cutoff} leaves one side empty")
    try:
        left = WindSeries(series.start, series.step,
                          series.s[:index], series.z[:index], series.m[:index])
        right = WindSeries(cutoff, series.step,
                           series.s[index:], series.z[index:], series.m[index:])
    except EmptyInput:
        raise CutoffOutsideRange(
            f"cutoff {cutoff} leaves one side with no data, only gaps"
        ) from None
    return left, right


# ---------------------------------------------------------------------------
# canonical serialization
# ---------------------------------------------------------------------------

def write_series_csv(series: WindSeries, target: Union[str, Path, IO[str]]) -> None:
    """Write the canonical `timestamp,s,z,m` CSV (empty fields mark gaps)."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            write_series_csv(series, fh)
        return
    writer = csv.writer(target)
    writer.writerow(["timestamp", "s", "z", "m"])
    gap = series.gap_mask
    for i in range(series.n_slots):
        instant = series.instant_at(i).isoformat()
        if gap[i]:
            writer.writerow([instant, "", "", ""])
        else:
            writer.writerow([instant, repr(float(series.s[i])),
                             repr(float(series.z[i])), repr(float(series.m[i]))])


def read_series_csv(source: Union[str, Path, IO[str]]) -> WindSeries:
    """Read a canonical series CSV written by :func:`write_series_csv`."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return read_series_csv(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["timestamp", "s", "z", "m"]:
        raise MissingColumn(f"expected header timestamp,s,z,m, got {header}")
    times: list[datetime] = []
    values: list[tuple[float, float, float]] = []
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        times.append(_parse_timestamp(row[0]))
        if any(cell.strip() for cell in row[1:4]):
            values.append((float(row[1]), float(row[2]), float(row[3])))
        else:
            values.append((np.nan, np.nan, np.nan))
    if not times:
        raise EmptyInput("series CSV has no rows")
    start = times[0]
    step = times[1] - times[0] if len(times) > 1 else HOUR
    if step <= timedelta(0):
        raise NonMonotonicTimestamps("series CSV timestamps must increase")
    for i, t in enumerate(times):
        if t != start + i * step:
            raise NonMonotonicTimestamps(
                f"row {i} at {t} breaks the uniform grid starting {start} step {step}"
            )
    data = np.array(values, dtype=float)
    return WindSeries(start, step, data[:, 0], data[:, 1], data[:, 2])
