"""Rolling backtests: four ways of updating a model while walking forward.

The test range is consumed in blocks of ``retrain_period`` predicted rows
(a "week" of valid samples, not of wall-clock hours: gaps would otherwise
desynchronize the policies). Before block k the engine may refit on the rows
whose target instant falls strictly before the block's first predicted
instant:

  STATIC        fit once before the cutoff, never again
  ONLINE        refit each block on the most recent train_size rows
  INCREMENTAL   refit each block on every row available so far
  ONLINE_SHORT  ONLINE with a deliberately small window

Kernel hyperparameters are chosen on the initial training window and frozen
across retrains unless ``retune_each_window`` is set; weekly re-selection
multiplies cost enormously for gains the updating itself rarely delivers.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from datetime import datetime
from typing import Optional

import numpy as np

from .errors import DomainError, InsufficientHistory, WindowFitFailed
from .evaluate import MetricReport, make_report
from .forecaster import ModelConfig, ModelKind, fit_forecaster
from .lagset import DesignSpec, build
from .select import Grid, grid_search
from .series import WindSeries

DEFAULT_RETRAIN_PERIOD = 168      # one week of hourly predictions
DEFAULT_SHORT_WINDOW = 2232       # three months of hourly rows


class PolicyKind(enum.Enum):
    STATIC = "static"
    ONLINE = "online"
    INCREMENTAL = "incremental"
    ONLINE_SHORT = "online-short"


@dataclass(frozen=True)
class UpdatePolicy:
    """Retraining schedule. ``train_size`` counts valid lag rows (gaps make
    row counts and wall-clock hours differ); None lets ONLINE default to the
    initial pre-cutoff row count and ONLINE_SHORT to 2232."""

    kind: PolicyKind
    train_size: Optional[int] = None
    retrain_period: int = DEFAULT_RETRAIN_PERIOD

    def __post_init__(self) -> None:
        if self.retrain_period < 1:
            raise DomainError(f"retrain_period must be >= 1, got {self.retrain_period}")
        if self.train_size is not None and self.train_size < 1:
            raise DomainError(f"train_size must be >= 1, got {self.train_size}")

    @classmethod
    def static(cls) -> "UpdatePolicy":
        return cls(PolicyKind.STATIC)

    @classmethod
    def online(cls, train_size: Optional[int] = None,
               retrain_period: int = DEFAULT_RETRAIN_PERIOD) -> "UpdatePolicy":
        return cls(PolicyKind.ONLINE, train_size, retrain_period)

    @classmethod
    def incremental(cls, retrain_period: int = DEFAULT_RETRAIN_PERIOD) -> "UpdatePolicy":
        return cls(PolicyKind.INCREMENTAL, None, retrain_period)

    @classmethod
    def online_short(cls, train_size: int = DEFAULT_SHORT_WINDOW,
                     retrain_period: int = DEFAULT_RETRAIN_PERIOD) -> "UpdatePolicy":
        return cls(PolicyKind.ONLINE_SHORT, train_size, retrain_period)


@dataclass(frozen=True)
class WindowRecord:
    """One retrain event: its boundary, training-set size, and which slice
    of the prediction sequence it produced."""

    boundary: datetime
    train_rows: int
    first_prediction: int
    n_predictions: int


@dataclass(frozen=True)
class PredictionRecord:
    instant: datetime
    y_true: float
    y_pred: float


@dataclass(frozen=True)
class BacktestReport:
    predictions: tuple[PredictionRecord, ...]
    metrics: MetricReport
    retrain_count: int
    policy: UpdatePolicy
    windows: tuple[WindowRecord, ...]
    params_used: Optional[object] = None   # KernelParams when tuned/kernel


def _window_rows(pool_size: int, policy: UpdatePolicy, initial_pool: int) -> int:
    """How many of the newest pool rows this policy trains on."""
    if policy.kind in (PolicyKind.STATIC, PolicyKind.INCREMENTAL):
        return pool_size
    if policy.kind is PolicyKind.ONLINE:
        size = policy.train_size if policy.train_size is not None else initial_pool
    else:  # ONLINE_SHORT
        size = policy.train_size if policy.train_size is not None else DEFAULT_SHORT_WINDOW
    return min(size, pool_size)


def run_backtest(
    series: WindSeries,
    spec: DesignSpec,
    config: ModelConfig,
    policy: UpdatePolicy,
    cutoff: datetime,
    station_id: str = "",
    grid: Optional[Grid] = None,
    retune_each_window: bool = False,
    cv_folds: int = 5,
) -> BacktestReport:
    """Walk the post-cutoff range, retraining per the policy.

    Kernel configs without params get them from a grid search on the initial
    training window (the exact rows the first fit will use). Every model
    only ever sees rows whose target instant precedes the instants it is
    asked to predict.
    """
    dataset = build(series, spec)
    targets = dataset.target_instants()
    target_arr = np.array(targets, dtype=object)
    test_mask = np.array([t >= cutoff for t in targets])
    train_mask = ~test_mask
    test_idx = np.flatnonzero(test_mask)
    initial_pool = int(train_mask.sum())
    if initial_pool == 0:
        raise InsufficientHistory("no training row has its target before the cutoff")
    if test_idx.size == 0:
        raise InsufficientHistory("no row has its target at or after the cutoff")

    period = policy.retrain_period
    n_test = test_idx.size
    n_blocks = (1 if policy.kind is PolicyKind.STATIC
                else math.ceil(n_test / period))

    # Hyperparameter selection on the rows the first fit will see.
    first_window = _window_rows(initial_pool, policy, initial_pool)
    first_train_idx = np.flatnonzero(train_mask)[-first_window:]
    if config.kind is ModelKind.KRR and config.params is None:
        cv = grid_search(dataset.take(first_train_idx), grid,
                         config.fitter(), k=cv_folds)
        config = config.with_params(cv.best)

    predictions: list[PredictionRecord] = []
    windows: list[WindowRecord] = []
    y_true_all: list[float] = []
    y_pred_all: list[float] = []
    pred_instants: list[datetime] = []

    for k in range(n_blocks):
        if policy.kind is PolicyKind.STATIC:
            block = test_idx
            boundary = cutoff
        else:
            block = test_idx[k * period:(k + 1) * period]
            boundary = targets[int(block[0])] if k > 0 else cutoff
        pool_idx = np.flatnonzero(target_arr < boundary)
        window = _window_rows(pool_idx.size, policy, initial_pool)
        if window == 0:
            raise InsufficientHistory(f"window {k}: empty training pool")
        train_idx = pool_idx[-window:]

        window_config = config
        if (retune_each_window and k > 0
                and config.kind is ModelKind.KRR):
            cv = grid_search(dataset.take(train_idx), grid, config.fitter(),
                             k=cv_folds)
            window_config = config.with_params(cv.best)
        try:
            model = fit_forecaster(dataset.take(train_idx), window_config)
        except Exception as exc:
            raise WindowFitFailed(k, exc) from exc

        y_pred = model.predict_speed(dataset.X[block])
        block_instants = [targets[int(i)] for i in block]
        y_true = np.array([series.s[series.index_of(t)] for t in block_instants])

        windows.append(WindowRecord(boundary, train_idx.size,
                                    len(predictions), block.size))
        for t, yt, yp in zip(block_instants, y_true, y_pred):
            predictions.append(PredictionRecord(t, float(yt), float(yp)))
        y_true_all.extend(y_true.tolist())
        y_pred_all.extend(y_pred.tolist())
        pred_instants.extend(block_instants)

    metrics = make_report(
        np.array(y_true_all), np.array(y_pred_all), spec, station_id,
        config.kind.value, pred_instants,
    )
    return BacktestReport(
        predictions=tuple(predictions),
        metrics=metrics,
        retrain_count=len(windows),
        policy=policy,
        windows=tuple(windows),
        params_used=config.params,
    )
