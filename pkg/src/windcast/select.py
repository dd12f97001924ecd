"""Hyperparameter selection: blocked five-fold CV and a two-step grid search.

Lag rows overlap in time, so shuffled folds would place near-duplicates of a
validation row in the training side. Folds here are contiguous chronological
blocks instead. The search scores each (sigma, lambda) grid point by mean
validation R^2, then refines a log-spaced grid between the coarse neighbors
of the stage-1 optimum and reports the overall best. Ties prefer smoother
models: larger lambda, then larger sigma.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Callable, Optional, Sequence, Union

import numpy as np

from .errors import (
    DimensionMismatch,
    DomainError,
    NoResults,
    TooFewSamples,
    ZeroVariance,
)
from .kernel_model import CgOptions, KernelParams, fit_nystrom, predict
from .lagset import Design, DesignSpec, LagDataset, build
from .series import WindSeries

# A fitter consumes (X, y, params) and returns a predictor X_new -> y_hat.
Fitter = Callable[[np.ndarray, np.ndarray, KernelParams], Callable[[np.ndarray], np.ndarray]]

DEFAULT_MEMORIES = (2, 6, 24, 48, 72)


@dataclass(frozen=True)
class Grid:
    """Log-spaced candidate values for sigma and lambda."""

    sigma_values: tuple[float, ...]
    lambda_values: tuple[float, ...]

    def __post_init__(self) -> None:
        for attr in ("sigma_values", "lambda_values"):
            values = tuple(float(v) for v in getattr(self, attr))
            if not values:
                raise DomainError(f"{attr} is empty")
            if any(v <= 0 or not math.isfinite(v) for v in values):
                raise DomainError(f"{attr} must be positive and finite")
            if list(values) != sorted(set(values)):
                raise DomainError(f"{attr} must be strictly ascending")
            object.__setattr__(self, attr, values)

    @classmethod
    def default(cls) -> "Grid":
        return cls(
            sigma_values=(0.5, 1.0, 2.0, 4.0, 8.0, 16.0),
            lambda_values=tuple(np.logspace(-7, -1, 7).tolist()),
        )


@dataclass(frozen=True)
class GridPoint:
    """One evaluated (sigma, lambda) cell of the search table."""

    sigma: float
    lam: float
    mu: int
    fold_r2s: tuple[float, ...]
    mean_r2: float
    status: str        # "ok" or "failed: <reason>"
    stage: int         # 1 = coarse pass, 2 = refinement

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class CvResult:
    """Outcome of a grid search: winning parameters plus the full table."""

    best: KernelParams
    table: tuple[GridPoint, ...]
    refinement_stage: int
    best_memory: Optional[int] = None

    def best_row(self) -> GridPoint:
        return max(
            (row for row in self.table if row.ok),
            key=lambda r: (r.mean_r2, r.lam, r.sigma, r.stage),
        )


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------

def kfold_indices(n: int, k: int = 5) -> list[np.ndarray]:
    """Contiguous chronological blocks covering 0..n-1, sizes within 1."""
    if k < 1:
        raise TooFewSamples(f"k must be >= 1, got {k}")
    if n < k:
        raise TooFewSamples(f"cannot split {n} samples into {k} folds")
    return np.array_split(np.arange(n), k)


def r2_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Coefficient of determination 1 - SS_res / SS_tot."""
    y_true = np.asarray(y_true, dtype=float).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=float).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise DimensionMismatch(
            f"length mismatch: {y_true.shape[0]} vs {y_pred.shape[0]}"
        )
    if y_true.size == 0:
        raise TooFewSamples("r2_score needs at least one sample")
    ss_tot = float(np.square(y_true - y_true.mean()).sum())
    if ss_tot == 0.0:
        raise ZeroVariance("y_true is constant; R^2 undefined")
    ss_res = float(np.square(y_true - y_pred).sum())
    return 1.0 - ss_res / ss_tot


def krr_fitter(
    m: Optional[int] = None,
    cg: CgOptions = CgOptions(),
    seed: int = 0,
    standardize: bool = True,
) -> Fitter:
    """Fitter factory for the reduced kernel solver.

    Multi-column targets get one independently fitted model per column,
    sharing the same (sigma, lambda).
    """

    def fit(X: np.ndarray, y: np.ndarray, params: KernelParams):
        y = np.asarray(y, dtype=float)
        if y.ndim == 1 or y.shape[1] == 1:
            model = fit_nystrom(X, y.reshape(-1), params, m=m, cg=cg,
                                seed=seed, standardize=standardize)
            return lambda X_new: predict(model, X_new)
        models = [
            fit_nystrom(X, y[:, j], params, m=m, cg=cg, seed=seed,
                        standardize=standardize)
            for j in range(y.shape[1])
        ]
        return lambda X_new: np.column_stack([predict(mod, X_new) for mod in models])

    return fit


def _fold_score(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Mean R^2 across target columns (plain R^2 for single targets)."""
    y_true = np.asarray(y_true, float)
    if y_true.ndim == 1:
        y_true = y_true[:, None]
    y_pred = np.asarray(y_pred, float).reshape(y_true.shape)
    scores = [
        r2_score(y_true[:, j], y_pred[:, j]) for j in range(y_true.shape[1])
    ]
    return float(np.mean(scores))


def cross_validate(
    dataset: LagDataset,
    params: KernelParams,
    fitter: Fitter,
    k: int = 5,
) -> tuple[float, ...]:
    """Per-fold validation R^2 for one parameter setting."""
    folds = kfold_indices(dataset.n, k)
    scores = []
    for fold in folds:
        mask = np.ones(dataset.n, dtype=bool)
        mask[fold] = False
        train_idx = np.flatnonzero(mask)
        predictor = fitter(dataset.X[train_idx], dataset.y[train_idx], params)
        y_hat = predictor(dataset.X[fold])
        scores.append(_fold_score(dataset.y[fold], y_hat))
    return tuple(scores)


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------

def _evaluate_stage(
    dataset: LagDataset,
    sigmas: Sequence[float],
    lambdas: Sequence[float],
    fitter: Fitter,
    k: int,
    stage: int,
) -> list[GridPoint]:
    rows = []
    mu = dataset.spec.memory
    for sigma in sigmas:
        for lam in lambdas:
            try:
                folds = cross_validate(dataset, KernelParams(sigma, lam), fitter, k)
                rows.append(GridPoint(sigma, lam, mu, folds,
                                      float(np.mean(folds)), "ok", stage))
            except Exception as exc:  # record, never abort the search
                rows.append(GridPoint(sigma, lam, mu, (), float("nan"),
                                      f"failed: {type(exc).__name__}: {exc}", stage))
    return rows


def _refined_axis(values: tuple[float, ...], best: float, factor: int) -> list[float]:
    """Log-spaced points between the coarse neighbors of the optimum.

    The stage-1 optimum is kept in the refined axis so refinement can never
    lose ground. A single-value axis refines to itself.
    """
    idx = min(range(len(values)), key=lambda i: abs(math.log(values[i]) - math.log(best)))
    lo = values[max(idx - 1, 0)]
    hi = values[min(idx + 1, len(values) - 1)]
    if lo == hi:
        return [best]
    refined = set(np.geomspace(lo, hi, factor).tolist())
    refined.add(best)
    return sorted(refined)


def grid_search(
    dataset: LagDataset,
    coarse: Optional[Grid] = None,
    fitter: Optional[Fitter] = None,
    refine_factor: int = 5,
    k: int = 5,
) -> CvResult:
    """Two-step (sigma, lambda) search by mean blocked-CV R^2.

    Stage 1 scores every coarse point; stage 2 re-searches a log-spaced grid
    between the coarse neighbors of the stage-1 winner (skipped when both
    axes are degenerate). Failed points are kept in the table with their
    reason. Ties prefer larger lambda, then larger sigma.
    """
    coarse = coarse or Grid.default()
    fitter = fitter or krr_fitter()
    table = _evaluate_stage(dataset, coarse.sigma_values, coarse.lambda_values,
                            fitter, k, stage=1)
    ok_rows = [row for row in table if row.ok]
    if not ok_rows:
        raise NoResults("every coarse grid point failed")
    stage1_best = max(ok_rows, key=lambda r: (r.mean_r2, r.lam, r.sigma))

    fine_sigmas = _refined_axis(coarse.sigma_values, stage1_best.sigma, refine_factor)
    fine_lambdas = _refined_axis(coarse.lambda_values, stage1_best.lam, refine_factor)
    if len(fine_sigmas) > 1 or len(fine_lambdas) > 1:
        table += _evaluate_stage(dataset, fine_sigmas, fine_lambdas, fitter, k,
                                 stage=2)
        ok_rows = [row for row in table if row.ok]

    best_row = max(ok_rows, key=lambda r: (r.mean_r2, r.lam, r.sigma, r.stage))
    return CvResult(
        best=KernelParams(best_row.sigma, best_row.lam),
        table=tuple(table),
        refinement_stage=best_row.stage,
        best_memory=dataset.spec.memory,
    )


def grid_search_auto_memory(
    series: WindSeries,
    design: Design,
    horizon: int,
    memories: Sequence[int] = DEFAULT_MEMORIES,
    coarse: Optional[Grid] = None,
    fitter: Optional[Fitter] = None,
    refine_factor: int = 5,
    k: int = 5,
) -> CvResult:
    """Treat memory as an outer search axis: run the two-step search per
    candidate memory and keep the best overall. Exact score ties go to the
    smaller (cheaper) memory.
    """
    best: Optional[CvResult] = None
    combined: list[GridPoint] = []
    for mu in memories:
        dataset = build(series, DesignSpec(design, horizon, mu))
        result = grid_search(dataset, coarse, fitter, refine_factor, k)
        combined.extend(result.table)
        if best is None or result.best_row().mean_r2 > best.best_row().mean_r2:
            best = CvResult(result.best, result.table, result.refinement_stage,
                            best_memory=mu)
    assert best is not None
    return CvResult(best.best, tuple(combined), best.refinement_stage,
                    best_memory=best.best_memory)


def write_cv_csv(result: CvResult, target: Union[str, Path, IO[str]], k: int = 5) -> None:
    """Dump the search table as `sigma,lambda,mu,fold_0..,mean_r2,status`."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            write_cv_csv(result, fh, k)
        return
    writer = csv.writer(target)
    writer.writerow(["sigma", "lambda", "mu"]
                    + [f"fold_{i}" for i in range(k)] + ["mean_r2", "status"])
    for row in result.table:
        folds = list(row.fold_r2s) + [""] * (k - len(row.fold_r2s))
        writer.writerow([row.sigma, row.lam, row.mu, *folds,
                         row.mean_r2 if row.ok else "", row.status])
