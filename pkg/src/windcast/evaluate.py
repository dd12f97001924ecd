"""Forecast quality metrics, the persistence baseline, and safe comparisons.

Errors of interest sit around 1e-2 over tens of thousands of points, so the
sums here use compensated (fsum) accumulation. Comparisons between reports
(differences of normalized errors, ratios against persistence) are only
meaningful over identical prediction instants; reports carry a fingerprint
of their evaluation set and refuse to compare across different ones.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    MismatchedEvaluationSets,
    NoValidPairs,
    TooFewSamples,
    ZeroDenominator,
    ZeroPersistence,
)
from .lagset import Design, DesignSpec
from .series import WindSeries


def _paired(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    y_true = np.asarray(y_true, dtype=float).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=float).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise DimensionMismatch(
            f"length mismatch: {y_true.shape[0]} vs {y_pred.shape[0]}"
        )
    if y_true.size == 0:
        raise TooFewSamples("metrics need at least one pair")
    return y_true, y_pred


def rmse(y_true, y_pred) -> float:
    """Root mean squared error, compensated summation."""
    y_true, y_pred = _paired(y_true, y_pred)
    total = math.fsum((t - p) ** 2 for t, p in zip(y_true, y_pred))
    return math.sqrt(total / y_true.size)


def rms(values) -> float:
    """Root mean square of a vector."""
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise TooFewSamples("rms needs at least one value")
    return math.sqrt(math.fsum(v * v for v in values) / values.size)


def nrmse(y_true, y_pred) -> float:
    """Error normalized by the signal's own magnitude:
    sqrt(sum((y - y_hat)^2) / sum(y^2))."""
    y_true, y_pred = _paired(y_true, y_pred)
    denom = math.fsum(t * t for t in y_true)
    if denom == 0.0:
        raise ZeroDenominator("all true values are zero; nrmse undefined")
    num = math.fsum((t - p) ** 2 for t, p in zip(y_true, y_pred))
    return math.sqrt(num / denom)


def gamma_rmse(rmse_alg: float, rmse_persistence: float) -> float:
    """Improvement ratio over persistence; below 1 means better."""
    if rmse_persistence <= 0.0:
        raise ZeroPersistence(
            f"persistence rmse must be positive, got {rmse_persistence}"
        )
    if rmse_alg < 0.0:
        raise DomainError(f"rmse must be >= 0, got {rmse_alg}")
    return rmse_alg / rmse_persistence


# ---------------------------------------------------------------------------
# persistence baseline
# ---------------------------------------------------------------------------

class PersistenceForecast(NamedTuple):
    """Aligned persistence pairs: truth, prediction, and target instants."""

    y_true: np.ndarray
    y_pred: np.ndarray
    target_instants: tuple[datetime, ...]


def persistence_forecast(
    series: WindSeries,
    h: int,
    targets: Optional[Sequence[datetime]] = None,
) -> PersistenceForecast:
    """The frozen-wind baseline: predict s_{t+h} = s_t.

    Emits one chronological pair per instant t+h where both slot t and slot
    t+h hold data. ``targets`` restricts the pairs to the given target
    instants, which is how a model and its baseline are held to the same
    evaluation set.
    """
    if h < 1:
        raise DomainError(f"horizon must be >= 1, got {h}")
    s = series.s
    n = series.n_slots
    if n <= h:
        raise NoValidPairs(f"series has {n} slots; horizon {h} leaves no pair")
    valid = ~series.gap_mask
    keep = valid[:-h] & valid[h:]
    idx = np.flatnonzero(keep)
    instants = [series.instant_at(int(i) + h) for i in idx]
    if targets is not None:
        wanted = set(targets)
        chosen = [j for j, t in enumerate(instants) if t in wanted]
        idx = idx[chosen]
        instants = [instants[j] for j in chosen]
    if idx.size == 0:
        raise NoValidPairs("no instant has both source and target data")
    return PersistenceForecast(
        y_true=s[idx + h].copy(),
        y_pred=s[idx].copy(),
        target_instants=tuple(instants),
    )


# ---------------------------------------------------------------------------
# reports and comparisons
# ---------------------------------------------------------------------------

def fingerprint_instants(instants: Sequence[datetime]) -> str:
    """Stable digest of an evaluation set (order-sensitive)."""
    payload = "|".join(t.isoformat() for t in instants)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class MetricReport:
    """Scores of one model on one evaluation set."""

    nrmse: float
    rmse: float
    n_predictions: int
    design: DesignSpec
    station_id: str
    model: str
    eval_fingerprint: str

    def __post_init__(self) -> None:
        if self.nrmse < 0 or self.rmse < 0:
            raise DomainError("scores must be nonnegative")
        if self.n_predictions < 1:
            raise DomainError("a report needs at least one prediction")

    @property
    def horizon(self) -> int:
        return self.design.horizon


def make_report(
    y_true,
    y_pred,
    design: DesignSpec,
    station_id: str,
    model: str,
    target_instants: Sequence[datetime],
) -> MetricReport:
    """Score aligned vectors and stamp the evaluation-set fingerprint."""
    y_true, y_pred = _paired(y_true, y_pred)
    if len(target_instants) != y_true.size:
        raise DimensionMismatch(
            f"{y_true.size} pairs but {len(target_instants)} instants"
        )
    return MetricReport(
        nrmse=nrmse(y_true, y_pred),
        rmse=rmse(y_true, y_pred),
        n_predictions=y_true.size,
        design=design,
        station_id=station_id,
        model=model,
        eval_fingerprint=fingerprint_instants(target_instants),
    )


def report_to_dict(report: MetricReport) -> dict:
    return {
        "nrmse": report.nrmse,
        "rmse": report.rmse,
        "n_predictions": report.n_predictions,
        "design": report.design.design.value,
        "horizon": report.design.horizon,
        "memory": report.design.memory,
        "station_id": report.station_id,
        "model": report.model,
        "eval_fingerprint": report.eval_fingerprint,
    }


def report_from_dict(payload: dict) -> MetricReport:
    return MetricReport(
        nrmse=float(payload["nrmse"]),
        rmse=float(payload["rmse"]),
        n_predictions=int(payload["n_predictions"]),
        design=DesignSpec(Design(payload["design"]), int(payload["horizon"]),
                          int(payload["memory"])),
        station_id=str(payload["station_id"]),
        model=str(payload["model"]),
        eval_fingerprint=str(payload["eval_fingerprint"]),
    )


def delta_nrmse(a: MetricReport, b: MetricReport) -> float:
    """a.nrmse - b.nrmse, defended against apples-to-oranges comparisons."""
    if a.station_id != b.station_id:
        raise MismatchedEvaluationSets(
            f"stations differ: {a.station_id!r} vs {b.station_id!r}"
        )
    if a.horizon != b.horizon:
        raise MismatchedEvaluationSets(
            f"horizons differ: {a.horizon} vs {b.horizon}"
        )
    if a.eval_fingerprint != b.eval_fingerprint:
        raise MismatchedEvaluationSets(
            "reports were scored on different prediction instants"
        )
    return a.nrmse - b.nrmse
