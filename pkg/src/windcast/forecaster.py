"""Design-aware model wrapper: one place that knows how targets are wired.

A forecaster owns one fitted model per target column (two for the
component-to-component design, one otherwise) and always answers in speed
units, reconstructing the norm when the underlying models predict components.
Hyperparameter selection stays in `select`; this module only fits, predicts,
and serializes.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Optional, Union

import numpy as np

from .errors import DomainError
from .kernel_model import (
    CgOptions,
    KernelParams,
    NystromModel,
    fit_nystrom,
    predict as kernel_predict,
)
from .lagset import Design, DesignSpec, LagDataset, reconstruct_speed
from .linear_model import LinearCoefficients, fit_linear, predict_linear
from .select import Fitter, krr_fitter

FORMAT_NAME = "windcast-forecaster"
FORMAT_VERSION = 1


class ModelKind(enum.Enum):
    LINEAR = "linear"
    KRR = "krr"


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to fit one model family on one dataset.

    ``params`` is required for the kernel family (select it first); linear
    fits use ``ridge`` (None = automatic stabilization) and ``intercept``.
    ``m`` of None means the ceil(10 sqrt(n)) default at fit time.
    """

    kind: ModelKind = ModelKind.KRR
    params: Optional[KernelParams] = None
    m: Optional[int] = None
    cg: CgOptions = CgOptions()
    seed: int = 0
    standardize: bool = True
    ridge: Optional[float] = None
    intercept: bool = True

    def with_params(self, params: KernelParams) -> "ModelConfig":
        return replace(self, params=params)

    def fitter(self) -> Fitter:
        """The CV-compatible fitting callable for this configuration."""
        if self.kind is ModelKind.KRR:
            return krr_fitter(m=self.m, cg=self.cg, seed=self.seed,
                              standardize=self.standardize)

        def fit(X, y, params):
            y = np.asarray(y, dtype=float)
            if y.ndim > 1 and y.shape[1] > 1:
                models = [
                    fit_linear(X, y[:, j], self.ridge, self.intercept)
                    for j in range(y.shape[1])
                ]
                return lambda X_new: np.column_stack(
                    [predict_linear(mod, X_new) for mod in models]
                )
            model = fit_linear(X, y.reshape(-1), self.ridge, self.intercept)
            return lambda X_new: predict_linear(model, X_new)

        return fit


@dataclass(frozen=True)
class SpeedForecaster:
    """Fitted predictor answering in m/s regardless of target wiring."""

    spec: DesignSpec
    kind: ModelKind
    models: tuple

    def predict_targets(self, X_new: np.ndarray) -> np.ndarray:
        """Raw model outputs, one column per target."""
        cols = []
        for model in self.models:
            if self.kind is ModelKind.LINEAR:
                cols.append(predict_linear(model, X_new))
            else:
                cols.append(kernel_predict(model, X_new))
        return np.column_stack(cols)

    def predict_speed(self, X_new: np.ndarray) -> np.ndarray:
        """Speed forecast per row; component designs return the norm of the
        predicted vector, so those are nonnegative by construction."""
        out = self.predict_targets(X_new)
        if self.spec.design is Design.ZM_ZM:
            return reconstruct_speed(out[:, 0], out[:, 1])
        return out[:, 0]


def fit_forecaster(dataset: LagDataset, config: ModelConfig) -> SpeedForecaster:
    """Fit one model per target column of the dataset."""
    if config.kind is ModelKind.KRR and config.params is None:
        raise DomainError("kernel fits need params; run the grid search first")
    models = []
    for j in range(dataset.y.shape[1]):
        y = dataset.y[:, j]
        if config.kind is ModelKind.LINEAR:
            models.append(fit_linear(dataset.X, y, config.ridge, config.intercept))
        else:
            models.append(
                fit_nystrom(dataset.X, y, config.params, m=config.m,
                            cg=config.cg, seed=config.seed,
                            standardize=config.standardize)
            )
    return SpeedForecaster(dataset.spec, config.kind, tuple(models))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def forecaster_to_dict(forecaster: SpeedForecaster) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "design": forecaster.spec.design.value,
        "horizon": forecaster.spec.horizon,
        "memory": forecaster.spec.memory,
        "model": forecaster.kind.value,
        "targets": [m.to_dict() for m in forecaster.models],
    }


def forecaster_from_dict(payload: dict) -> SpeedForecaster:
    if payload.get("format") != FORMAT_NAME:
        raise DomainError(f"not a forecaster document: {payload.get('format')!r}")
    if payload.get("version") != FORMAT_VERSION:
        raise DomainError(f"unsupported version {payload.get('version')!r}")
    spec = DesignSpec(Design(payload["design"]), int(payload["horizon"]),
                      int(payload["memory"]))
    kind = ModelKind(payload["model"])
    if kind is ModelKind.LINEAR:
        models = tuple(LinearCoefficients.from_dict(t) for t in payload["targets"])
    else:
        models = tuple(NystromModel.from_dict(t) for t in payload["targets"])
    expected = spec.design.target_columns
    if len(models) != expected:
        raise DomainError(f"expected {expected} target models, got {len(models)}")
    return SpeedForecaster(spec, kind, models)


def save_forecaster(forecaster: SpeedForecaster,
                    target: Union[str, Path, IO[str]]) -> None:
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8") as fh:
            save_forecaster(forecaster, fh)
        return
    json.dump(forecaster_to_dict(forecaster), target, indent=2)


def load_forecaster(source: Union[str, Path, IO[str]]) -> SpeedForecaster:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            return load_forecaster(fh)
    return forecaster_from_dict(json.load(source))
