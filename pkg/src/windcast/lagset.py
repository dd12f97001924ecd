"""Lag-matrix construction: turn a gap-aware series into supervised datasets.

A row anchored at time t collects the last ``memory`` hours of wind history
and is labeled with the wind ``horizon`` hours ahead. Three designs are
supported: speed history predicting speed (SS), component history predicting
speed (ZM_S), and component history predicting both components (ZM_ZM, whose
speed forecast is reconstructed as the norm of the predicted vector).
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import IO, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DomainError, NoValidSamples
from .series import WindSeries


class Design(enum.Enum):
    """Input/output wiring of the forecasting problem."""

    SS = "ss"          # speed lags -> future speed
    ZM_S = "zm-s"      # component lags -> future speed
    ZM_ZM = "zm-zm"    # component lags -> future components

    @property
    def input_columns(self) -> int:
        """Feature columns contributed per lagged hour (1 or 2)."""
        return 1 if self is Design.SS else 2

    @property
    def target_columns(self) -> int:
        return 2 if self is Design.ZM_ZM else 1


@dataclass(frozen=True)
class DesignSpec:
    """A concrete forecasting problem: design wiring, horizon and memory.

    ``horizon`` is the lead time in hours; ``memory`` the number of lagged
    hours (t - memory + 1 .. t) fed to the model.
    """

    design: Design
    horizon: int
    memory: int

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise DomainError(f"horizon must be >= 1, got {self.horizon}")
        if self.memory < 1:
            raise DomainError(f"memory must be >= 1, got {self.memory}")

    @property
    def n_features(self) -> int:
        return self.memory * self.design.input_columns


@dataclass(frozen=True)
class LagDataset:
    """Supervised view of a series: features X (n, d), targets y (n, q).

    ``anchors[i]`` is the instant t of row i: features are drawn from slots
    t - memory + 1 .. t and the target from t + horizon. All slots touched
    are guaranteed non-gap.
    """

    X: np.ndarray
    y: np.ndarray
    anchors: tuple[datetime, ...]
    spec: DesignSpec

    def __post_init__(self) -> None:
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if X.shape[0] != y.shape[0] or X.shape[0] != len(self.anchors):
            raise DomainError("X, y and anchors must agree on the row count")
        if X.shape[1] != self.spec.n_features:
            raise DomainError(
                f"X has {X.shape[1]} columns, spec implies {self.spec.n_features}"
            )
        if y.shape[1] != self.spec.design.target_columns:
            raise DomainError(
                f"y has {y.shape[1]} columns, design implies "
                f"{self.spec.design.target_columns}"
            )
        for name, arr in (("X", X), ("y", y)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "anchors", tuple(self.anchors))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def target_instants(self) -> tuple[datetime, ...]:
        """The instant each row's label refers to (anchor + horizon hours)."""
        lead = timedelta(hours=self.spec.horizon)
        return tuple(t + lead for t in self.anchors)

    def take(self, indices: np.ndarray) -> "LagDataset":
        """Row subset in the given order (for folds and window selection)."""
        indices = np.asarray(indices, dtype=np.intp)
        anchors = tuple(self.anchors[int(i)] for i in indices)
        return LagDataset(self.X[indices], self.y[indices], anchors, self.spec)


def build(series: WindSeries, spec: DesignSpec) -> LagDataset:
    """Assemble the lag dataset for ``spec`` over all gap-safe anchors.

    A slot t anchors a row iff slots t - memory + 1 .. t and t + horizon are
    all non-gap. Component features are interleaved chronologically as
    (z, m) pairs per lagged hour. Raises NoValidSamples if the gap structure
    admits no row.
    """
    mu, h = spec.memory, spec.horizon
    n_slots = series.n_slots
    if n_slots < mu + h:
        raise NoValidSamples(
            f"series has {n_slots} slots; memory {mu} + horizon {h} needs more"
        )
    valid = ~series.gap_mask
    # window_full[i] says slots i .. i + mu - 1 are all non-gap; the anchor
    # for window i is t = i + mu - 1.
    window_full = sliding_window_view(valid, mu).all(axis=1)
    anchors_t = np.arange(mu - 1, n_slots)
    has_target = anchors_t + h < n_slots
    target_ok = np.zeros(anchors_t.size, dtype=bool)
    target_ok[has_target] = valid[anchors_t[has_target] + h]
    keep = window_full & target_ok
    if not keep.any():
        raise NoValidSamples("gap structure admits no complete (window, target) pair")

    anchor_idx = anchors_t[keep]
    X = _window_features(series, mu, keep, spec.design)
    if spec.design is Design.ZM_ZM:
        y = np.column_stack([series.z[anchor_idx + h], series.m[anchor_idx + h]])
    else:
        y = series.s[anchor_idx + h][:, None]
    anchors = tuple(series.instant_at(int(i)) for i in anchor_idx)
    return LagDataset(X, y, anchors, spec)


def _window_features(series: WindSeries, mu: int, keep: np.ndarray,
                     design: Design) -> np.ndarray:
    """Feature block for the kept length-mu windows, in build()'s layout."""
    if design is Design.SS:
        windows = sliding_window_view(series.s, mu)  # (n_slots - mu + 1, mu)
        X = windows[keep]
    else:
        stacked = np.column_stack([series.z, series.m])  # (n_slots, 2)
        windows = sliding_window_view(stacked, (mu, 2)).squeeze(axis=1)
        X = windows[keep].reshape(int(keep.sum()), 2 * mu)
    return np.ascontiguousarray(X, dtype=float)


def feature_rows(
    series: WindSeries, spec: DesignSpec
) -> tuple[np.ndarray, tuple[datetime, ...]]:
    """Feature matrix over every gap-free window, target availability aside.

    Inference-side counterpart of :func:`build`: row i predicts the instant
    ``anchors[i] + horizon`` hours, which may lie beyond the observed range
    (the last anchor is the newest complete window). Feature layout matches
    build() exactly, so fitted models apply unchanged.
    """
    mu = spec.memory
    if series.n_slots < mu:
        raise NoValidSamples(
            f"series has {series.n_slots} slots; memory {mu} needs more"
        )
    valid = ~series.gap_mask
    window_full = sliding_window_view(valid, mu).all(axis=1)
    if not window_full.any():
        raise NoValidSamples("gap structure admits no complete window")
    anchor_idx = np.arange(mu - 1, series.n_slots)[window_full]
    X = _window_features(series, mu, window_full, spec.design)
    anchors = tuple(series.instant_at(int(i)) for i in anchor_idx)
    return X, anchors


def reconstruct_speed(z_hat, m_hat):
    """Speed implied by predicted components: sqrt(z^2 + m^2), elementwise."""
    return np.hypot(z_hat, m_hat)


def write_dataset_csv(dataset: LagDataset, target: Union[str, Path, IO[str]]) -> None:
    """Dump rows as `anchor, x_0..x_{d-1}, y_0[, y_1]` for inspection."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            write_dataset_csv(dataset, fh)
        return
    writer = csv.writer(target)
    q = dataset.y.shape[1]
    writer.writerow(
        ["anchor"]
        + [f"x_{j}" for j in range(dataset.d)]
        + [f"y_{j}" for j in range(q)]
    )
    for i in range(dataset.n):
        writer.writerow(
            [dataset.anchors[i].isoformat()]
            + [repr(float(v)) for v in dataset.X[i]]
            + [repr(float(v)) for v in dataset.y[i]]
        )
