"""Hourly wind-speed forecasting from lagged observations.

The pipeline: raw observation CSVs are resampled onto a gap-aware hourly
grid (`series`), turned into lag datasets under one of three input/output
designs (`lagset`), and fitted with either a ridge-regularized linear model
(`linear_model`) or a center-reduced Gaussian kernel machine
(`kernel_model`), with blocked cross-validation for hyperparameters
(`select`). Evaluation tooling covers normalized errors and persistence
ratios (`evaluate`), rolling retraining policies (`rolling`), day-scale
autocorrelation diagnostics (`diurnal`), and the full configuration sweep
(`sweep`). `windcast --help` shows the command-line surface.
"""

from .diurnal import monthly_diurnal_strength, windowed_autocorrelation
from .errors import WindcastError
from .evaluate import (
    delta_nrmse,
    gamma_rmse,
    make_report,
    nrmse,
    persistence_forecast,
    rmse,
)
from .forecaster import (
    ModelConfig,
    ModelKind,
    SpeedForecaster,
    fit_forecaster,
    load_forecaster,
    save_forecaster,
)
from .kernel_model import (
    CgOptions,
    KernelParams,
    fit_exact,
    fit_nystrom,
    gaussian_kernel,
    predict,
)
from .lagset import Design, DesignSpec, LagDataset, build, feature_rows
from .linear_model import fit_linear, predict_linear
from .rolling import PolicyKind, UpdatePolicy, run_backtest
from .select import Grid, grid_search, grid_search_auto_memory, krr_fitter
from .series import (
    WindSeries,
    bearing_from_components,
    decompose,
    parse_csv,
    read_series_csv,
    resample_hourly,
    split_at,
    write_series_csv,
)
from .sweep import ExperimentConfig, SweepResult, run_sweep, select_globally_best

__version__ = "0.1.0"

__all__ = [
    "CgOptions",
    "Design",
    "DesignSpec",
    "ExperimentConfig",
    "Grid",
    "KernelParams",
    "LagDataset",
    "ModelConfig",
    "ModelKind",
    "PolicyKind",
    "SpeedForecaster",
    "SweepResult",
    "UpdatePolicy",
    "WindcastError",
    "WindSeries",
    "bearing_from_components",
    "build",
    "decompose",
    "delta_nrmse",
    "feature_rows",
    "fit_exact",
    "fit_forecaster",
    "fit_linear",
    "fit_nystrom",
    "gamma_rmse",
    "gaussian_kernel",
    "grid_search",
    "grid_search_auto_memory",
    "krr_fitter",
    "load_forecaster",
    "make_report",
    "monthly_diurnal_strength",
    "nrmse",
    "parse_csv",
    "persistence_forecast",
    "predict",
    "predict_linear",
    "read_series_csv",
    "resample_hourly",
    "rmse",
    "run_backtest",
    "run_sweep",
    "save_forecaster",
    "select_globally_best",
    "split_at",
    "windowed_autocorrelation",
    "write_series_csv",
    "__version__",
]
