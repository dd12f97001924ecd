"""PNG renderings of sweep, backtest, and diurnal tables.

Everything here draws through matplotlib's object-oriented interface, so no
global backend is selected and importing this module is safe in headless
processes; `Figure.savefig` brings its own Agg canvas for PNG output.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import numpy as np
from matplotlib.figure import Figure

from .diurnal import DiurnalRecord
from .errors import NoResults
from .rolling import BacktestReport
from .sweep import SweepResult

_DPI = 150


def _finish(fig: Figure, path: Union[str, Path]) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    return path


def nrmse_by_horizon(result: SweepResult, path: Union[str, Path]) -> Path:
    """One line per station: its lowest NRMSE at each horizon."""
    best = result.locally_best()
    if not best:
        raise NoResults("no successful sweep rows to draw")
    stations = sorted({station for station, _ in best})
    horizons = sorted({h for _, h in best})

    fig = Figure(figsize=(7, 4.5))
    ax = fig.subplots()
    for station in stations:
        points = [(h, best[(station, h)].nrmse)
                  for h in horizons if (station, h) in best]
        ax.plot([p[0] for p in points], [p[1] for p in points],
                marker="o", label=station)
    ax.set_xlabel("horizon [h]")
    ax.set_ylabel("NRMSE (best configuration)")
    ax.set_title("Forecast error growth by horizon")
    ax.grid(True, alpha=0.3)
    if len(stations) <= 12:
        ax.legend(fontsize="small")
    return _finish(fig, path)


def nrmse_by_memory(result: SweepResult, horizon: int,
                    path: Union[str, Path]) -> Path:
    """Mean NRMSE over stations as a function of memory, one line per
    (design, model) pair, at a fixed horizon."""
    rows = [r for r in result.ok_rows() if r.horizon == horizon]
    if not rows:
        raise NoResults(f"no successful rows at horizon {horizon}")

    fig = Figure(figsize=(7, 4.5))
    ax = fig.subplots()
    pairs = sorted({(r.design, r.model) for r in rows},
                   key=lambda p: (p[0].value, p[1].value))
    for design, model in pairs:
        own = [r for r in rows if r.design is design and r.model is model]
        memories = sorted({r.memory for r in own})
        means = [float(np.mean([r.nrmse for r in own if r.memory == mu]))
                 for mu in memories]
        ax.plot(memories, means, marker="o",
                label=f"{design.value} / {model.value}")
    ax.set_xlabel("memory [h]")
    ax.set_ylabel("mean NRMSE over stations")
    ax.set_title(f"Effect of input window length, {horizon} h ahead")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize="small")
    return _finish(fig, path)


def backtest_timeline(report: BacktestReport, path: Union[str, Path],
                      max_points: int = 2000) -> Path:
    """Measured and predicted speeds over the test period, with retraining
    boundaries marked; long series are thinned evenly for legibility."""
    predictions = report.predictions
    if not predictions:
        raise NoResults("backtest produced no predictions")
    stride = max(1, len(predictions) // max_points)
    kept = predictions[::stride]
    instants = [p.instant for p in kept]

    fig = Figure(figsize=(9, 4))
    ax = fig.subplots()
    ax.plot(instants, [p.y_true for p in kept], lw=0.8, label="measured")
    ax.plot(instants, [p.y_pred for p in kept], lw=0.8, label="predicted")
    for window in report.windows[1:]:
        ax.axvline(window.boundary, color="gray", lw=0.5, alpha=0.5)
    ax.set_ylabel("wind speed [m/s]")
    title = f"Backtest, {report.policy.kind.value} policy"
    if report.metrics.station_id:
        title += f", station {report.metrics.station_id}"
    ax.set_title(title)
    ax.legend(fontsize="small")
    fig.autofmt_xdate()
    return _finish(fig, path)


def diurnal_profile(records: Sequence[DiurnalRecord],
                    path: Union[str, Path]) -> Path:
    """Monthly day-scale autocorrelation strength as a bar chart."""
    if not records:
        raise NoResults("no monthly values to draw")
    months = [r.month for r in records]
    values = [r.r_ss_24 for r in records]

    fig = Figure(figsize=(max(6, 0.45 * len(months)), 4))
    ax = fig.subplots()
    ax.bar(range(len(months)), values)
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_xticks(range(len(months)))
    ax.set_xticklabels(months, rotation=60, ha="right", fontsize="small")
    ax.set_ylabel("mean windowed autocorrelation at 24 h")
    ax.set_title("Daily-cycle strength by month")
    ax.grid(True, axis="y", alpha=0.3)
    return _finish(fig, path)


def render_sweep_figures(result: SweepResult, out_dir: Union[str, Path]) -> list[Path]:
    """The standard figure set for one sweep; skips panels with no data."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [nrmse_by_horizon(result, out_dir / "nrmse_by_horizon.png")]
    for horizon in sorted({r.horizon for r in result.ok_rows()}):
        written.append(nrmse_by_memory(
            result, horizon, out_dir / f"nrmse_by_memory_h{horizon:02d}.png"))
    return written
