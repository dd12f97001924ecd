"""The full design sweep: every (station, design, model, horizon, memory).

Cells at a fixed (station, horizon) are all scored on the same prediction
instants: the test targets reachable by the largest memory in the
configuration. A window valid for the largest memory is valid for every
smaller one, so this is the exact intersection of the cells' natural test
sets, and it makes error differences and persistence ratios across cells
comparisons over identical instants rather than near-identical ones.

Per-cell RNG seeds are derived by hashing the experiment seed with the cell
coordinates, so results do not depend on evaluation order and a sweep can be
parallelized or resumed without changing a single number.
"""

from __future__ import annotations

import csv
import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import IO, Optional, Union

import numpy as np

from .errors import NoResults
from .evaluate import (
    fingerprint_instants,
    nrmse as nrmse_of,
    persistence_forecast,
    rmse as rmse_of,
)
from .forecaster import ModelConfig, ModelKind, fit_forecaster
from .kernel_model import CgOptions, KernelParams
from .lagset import Design, DesignSpec, build
from .select import DEFAULT_MEMORIES, Grid, grid_search
from .series import WindSeries, _parse_timestamp, read_series_csv

DEFAULT_HORIZONS = (1, 3, 6, 12, 18, 24)
DEFAULT_MEMORIES = (2, 6, 24, 48, 72)
DEFAULT_DESIGNS = (Design.SS, Design.ZM_S, Design.ZM_ZM)
DEFAULT_MODELS = (ModelKind.LINEAR, ModelKind.KRR)


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one sweep."""

    stations: tuple[tuple[str, str], ...]      # (id, csv path)
    cutoff: datetime
    horizons: tuple[int, ...] = DEFAULT_HORIZONS
    memories: tuple[int, ...] = DEFAULT_MEMORIES
    designs: tuple[Design, ...] = DEFAULT_DESIGNS
    models: tuple[ModelKind, ...] = DEFAULT_MODELS
    seed: int = 0
    output_dir: Optional[str] = None
    grid: Optional[Grid] = None
    m: Optional[int] = None
    cg: CgOptions = CgOptions()
    refine_factor: int = 5
    cv_folds: int = 5
    max_workers: int = 1

    def __post_init__(self) -> None:
        for name in ("stations", "horizons", "memories", "designs", "models"):
            if not getattr(self, name):
                raise NoResults(f"config field {name} is empty")
        if self.cutoff != self.cutoff.replace(minute=0, second=0, microsecond=0):
            raise NoResults(f"cutoff {self.cutoff} is not hourly-aligned")


def config_to_dict(config: ExperimentConfig) -> dict:
    """JSON-ready form; the resolved copy written next to sweep outputs."""
    payload = {
        "stations": [[sid, str(path)] for sid, path in config.stations],
        "cutoff": config.cutoff.isoformat(),
        "horizons": list(config.horizons),
        "memories": list(config.memories),
        "designs": [d.value for d in config.designs],
        "models": [m.value for m in config.models],
        "seed": config.seed,
        "output_dir": config.output_dir,
        "m": config.m,
        "cg": {"max_iters": config.cg.max_iters,
               "tolerance": config.cg.tolerance},
        "refine_factor": config.refine_factor,
        "cv_folds": config.cv_folds,
        "max_workers": config.max_workers,
    }
    if config.grid is not None:
        payload["grid"] = {"sigma": list(config.grid.sigma_values),
                           "lambda": list(config.grid.lambda_values)}
    return payload


def config_from_dict(payload: dict) -> ExperimentConfig:
    grid = None
    if "grid" in payload and payload["grid"] is not None:
        grid = Grid(tuple(payload["grid"]["sigma"]),
                    tuple(payload["grid"]["lambda"]))
    cg = CgOptions()
    if "cg" in payload:
        cg = CgOptions(int(payload["cg"]["max_iters"]),
                       float(payload["cg"]["tolerance"]))
    return ExperimentConfig(
        stations=tuple((str(sid), str(path)) for sid, path in payload["stations"]),
        cutoff=_parse_timestamp(payload["cutoff"]),
        horizons=tuple(int(h) for h in payload.get("horizons", DEFAULT_HORIZONS)),
        memories=tuple(int(m) for m in payload.get("memories", DEFAULT_MEMORIES)),
        designs=tuple(Design(d) for d in payload.get(
            "designs", [d.value for d in DEFAULT_DESIGNS])),
        models=tuple(ModelKind(m) for m in payload.get(
            "models", [m.value for m in DEFAULT_MODELS])),
        seed=int(payload.get("seed", 0)),
        output_dir=payload.get("output_dir"),
        grid=grid,
        m=payload.get("m"),
        cg=cg,
        refine_factor=int(payload.get("refine_factor", 5)),
        cv_folds=int(payload.get("cv_folds", 5)),
        max_workers=int(payload.get("max_workers", 1)),
    )


@dataclass(frozen=True)
class SweepRow:
    """One evaluated cell (or its failure record)."""

    station: str
    design: Design
    model: ModelKind
    horizon: int
    memory: int
    nrmse: float
    rmse: float
    gamma_rmse: float
    params: Optional[KernelParams]
    n_predictions: int
    eval_fingerprint: str
    status: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    @property
    def configuration(self) -> tuple[Design, ModelKind, int]:
        return (self.design, self.model, self.memory)


@dataclass(frozen=True)
class GlobalChoice:
    """Most-frequently-locally-best configuration at one horizon."""

    design: Design
    model: ModelKind
    memory: int
    count: int
    mean_nrmse: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]

    def ok_rows(self) -> list[SweepRow]:
        return [r for r in self.rows if r.ok]

    def failed_rows(self) -> list[SweepRow]:
        return [r for r in self.rows if not r.ok]

    def locally_best(self) -> dict[tuple[str, int], SweepRow]:
        """Per (station, horizon): the lowest-NRMSE successful row."""
        best: dict[tuple[str, int], SweepRow] = {}
        for row in self.ok_rows():
            key = (row.station, row.horizon)
            cur = best.get(key)
            if cur is None or _row_order(row) < _row_order(cur):
                best[key] = row
        return best


def _row_order(row: SweepRow) -> tuple:
    # Deterministic argmin: score first, then cheaper/simpler configurations.
    return (row.nrmse, row.memory, row.design.value, row.model.value)


def cell_seed(seed: int, station: str, design: Design, model: ModelKind,
              horizon: int, memory: int) -> int:
    """Order-independent per-cell seed: a stable hash of the coordinates."""
    text = f"{seed}|{station}|{design.value}|{model.value}|{horizon}|{memory}"
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


# ---------------------------------------------------------------------------
# sweep execution
# ---------------------------------------------------------------------------

def _failed_row(station, design, model, horizon, memory, reason) -> SweepRow:
    return SweepRow(station, design, model, horizon, memory,
                    float("nan"), float("nan"), float("nan"), None, 0, "",
                    f"failed: {reason}")


def _evaluate_cell(
    series: WindSeries,
    station: str,
    design: Design,
    model: ModelKind,
    horizon: int,
    memory: int,
    eval_targets: tuple[datetime, ...],
    pers_rmse: Optional[float],
    config: ExperimentConfig,
) -> SweepRow:
    spec = DesignSpec(design, horizon, memory)
    seed = cell_seed(config.seed, station, design, model, horizon, memory)
    try:
        dataset = build(series, spec)
        targets = dataset.target_instants()
        train_idx = np.array(
            [i for i, t in enumerate(targets) if t < config.cutoff], dtype=np.intp
        )
        wanted = set(eval_targets)
        test_idx = np.array(
            [i for i, t in enumerate(targets) if t in wanted], dtype=np.intp
        )
        if train_idx.size == 0 or test_idx.size == 0:
            raise NoResults("no training rows or no aligned test rows")

        model_config = ModelConfig(kind=model, m=config.m, cg=config.cg,
                                   seed=seed)
        train_ds = dataset.take(train_idx)
        params = None
        if model is ModelKind.KRR:
            cv = grid_search(train_ds, config.grid, model_config.fitter(),
                             config.refine_factor, config.cv_folds)
            params = cv.best
            model_config = model_config.with_params(params)
        forecaster = fit_forecaster(train_ds, model_config)

        y_pred = forecaster.predict_speed(dataset.X[test_idx])
        instants = [targets[int(i)] for i in test_idx]
        y_true = np.array([series.s[series.index_of(t)] for t in instants])
        cell_rmse = rmse_of(y_true, y_pred)
        gamma = (cell_rmse / pers_rmse
                 if pers_rmse and pers_rmse > 0 else float("nan"))
        return SweepRow(
            station, design, model, horizon, memory,
            nrmse_of(y_true, y_pred), cell_rmse, gamma, params,
            int(test_idx.size), fingerprint_instants(instants), "ok",
        )
    except Exception as exc:
        return _failed_row(station, design, model, horizon, memory,
                           f"{type(exc).__name__}: {exc}")


def sweep_station(
    series: WindSeries,
    station: str,
    config: ExperimentConfig,
) -> list[SweepRow]:
    """All cells of one station, evaluation-aligned per horizon."""
    rows: list[SweepRow] = []
    mu_max = max(config.memories)
    for horizon in config.horizons:
        # The shared evaluation set at this horizon, from the largest memory.
        try:
            wide = build(series, DesignSpec(Design.SS, horizon, mu_max))
            eval_targets = tuple(
                t for t in wide.target_instants() if t >= config.cutoff
            )
            if not eval_targets:
                raise NoResults("no test rows reachable at the largest memory")
            pers = persistence_forecast(series, horizon, targets=eval_targets)
            pers_rmse = rmse_of(pers.y_true, pers.y_pred)
        except Exception as exc:
            reason = f"{type(exc).__name__}: {exc}"
            for design in config.designs:
                for model in config.models:
                    for memory in config.memories:
                        rows.append(_failed_row(station, design, model,
                                                horizon, memory, reason))
            continue

        for design in config.designs:
            for model in config.models:
                for memory in config.memories:
                    rows.append(_evaluate_cell(
                        series, station, design, model, horizon, memory,
                        eval_targets, pers_rmse, config,
                    ))
    return rows


def run_sweep(
    config: ExperimentConfig,
    series_by_station: Optional[dict[str, WindSeries]] = None,
) -> SweepResult:
    """Evaluate every cell of the configuration.

    Stations are read from the configured CSV paths unless preloaded series
    are passed in. Failures (unreadable station, impossible cell) become
    failed rows; the sweep itself always completes.
    """
    loaded: dict[str, Optional[WindSeries]] = {}
    reasons: dict[str, str] = {}
    for station, path in config.stations:
        if series_by_station is not None and station in series_by_station:
            loaded[station] = series_by_station[station]
            continue
        try:
            loaded[station] = read_series_csv(path)
        except Exception as exc:
            loaded[station] = None
            reasons[station] = f"{type(exc).__name__}: {exc}"

    def station_rows(item) -> list[SweepRow]:
        station, _ = item
        series = loaded[station]
        if series is None:
            reason = reasons[station]
            return [
                _failed_row(station, design, model, horizon, memory, reason)
                for horizon in config.horizons
                for design in config.designs
                for model in config.models
                for memory in config.memories
            ]
        return sweep_station(series, station, config)

    if config.max_workers > 1:
        with ThreadPoolExecutor(max_workers=config.max_workers) as pool:
            chunks = list(pool.map(station_rows, config.stations))
    else:
        chunks = [station_rows(item) for item in config.stations]
    return SweepResult(tuple(row for chunk in chunks for row in chunk))


# ---------------------------------------------------------------------------
# global selection
# ---------------------------------------------------------------------------

def select_globally_best(result: SweepResult, horizon: int) -> GlobalChoice:
    """The configuration most often locally best at this horizon.

    Frequency ties fall to the lower mean NRMSE over the configuration's
    successful rows at the horizon, then to the smaller memory.
    """
    best = [row for (st, h), row in result.locally_best().items() if h == horizon]
    if not best:
        raise NoResults(f"no station succeeded at horizon {horizon}")
    counts: dict[tuple, int] = {}
    for row in best:
        counts[row.configuration] = counts.get(row.configuration, 0) + 1

    def mean_nrmse(conf: tuple) -> float:
        values = [r.nrmse for r in result.ok_rows()
                  if r.horizon == horizon and r.configuration == conf]
        return float(np.mean(values))

    ranked = sorted(
        counts.items(),
        key=lambda kv: (-kv[1], mean_nrmse(kv[0]), kv[0][2],
                        kv[0][0].value, kv[0][1].value),
    )
    (design, model, memory), count = ranked[0]
    return GlobalChoice(design, model, memory, count,
                        mean_nrmse((design, model, memory)))


def write_sweep_csv(result: SweepResult,
                    target: Union[str, Path, IO[str]]) -> None:
    """Flat table of every cell, failed ones with blank metric fields."""
    if isinstance(target, (str, Path)):
        with open(target, "w", encoding="utf-8", newline="") as fh:
            write_sweep_csv(result, fh)
        return
    writer = csv.writer(target)
    writer.writerow(["station", "design", "model", "horizon", "memory",
                     "nrmse", "rmse", "gamma_rmse", "sigma", "lambda",
                     "n_predictions", "eval_fingerprint", "status"])
    for row in result.rows:
        if row.ok:
            metrics = [repr(row.nrmse), repr(row.rmse),
                       "" if np.isnan(row.gamma_rmse) else repr(row.gamma_rmse)]
        else:
            metrics = ["", "", ""]
        params = (["", ""] if row.params is None
                  else [repr(row.params.sigma), repr(row.params.lam)])
        writer.writerow([row.station, row.design.value, row.model.value,
                         row.horizon, row.memory, *metrics, *params,
                         row.n_predictions, row.eval_fingerprint, row.status])


def global_local_gaps(
    result: SweepResult, horizon: int, choice: Optional[GlobalChoice] = None
) -> list[tuple[str, float]]:
    """Per station: nrmse(globally best config) - nrmse(locally best).

    Nonnegative wherever both exist, since locally best is the argmin.
    Stations whose globally-best cell failed are omitted.
    """
    choice = choice or select_globally_best(result, horizon)
    conf = (choice.design, choice.model, choice.memory)
    local = {st: row for (st, h), row in result.locally_best().items()
             if h == horizon}
    gaps = []
    for row in result.ok_rows():
        if row.horizon == horizon and row.configuration == conf \
                and row.station in local:
            gaps.append((row.station, row.nrmse - local[row.station].nrmse))
    return sorted(gaps)
