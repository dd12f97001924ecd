import io

import numpy as np
import pytest

from windcast.errors import DomainError
from windcast.forecaster import (
    ModelConfig,
    ModelKind,
    fit_forecaster,
    load_forecaster,
    save_forecaster,
)
from windcast.kernel_model import KernelParams
from windcast.lagset import Design, DesignSpec, build, reconstruct_speed

from conftest import make_speed_series, make_wind_series


class TestLinearForecaster:
    def test_speed_design(self):
        ds = build(make_speed_series(200, seed=1), DesignSpec(Design.SS, 1, 3))
        fc = fit_forecaster(ds, ModelConfig(kind=ModelKind.LINEAR))
        preds = fc.predict_speed(ds.X)
        assert preds.shape == (ds.n,)
        assert np.isfinite(preds).all()

    def test_component_design_reconstructs_norm(self):
        ds = build(make_wind_series(200, seed=2), DesignSpec(Design.ZM_ZM, 1, 2))
        fc = fit_forecaster(ds, ModelConfig(kind=ModelKind.LINEAR))
        raw = fc.predict_targets(ds.X)
        assert raw.shape == (ds.n, 2)
        speeds = fc.predict_speed(ds.X)
        assert np.allclose(speeds, reconstruct_speed(raw[:, 0], raw[:, 1]))
        assert (speeds >= 0).all()

    def test_multi_target_fitter_matches_column_fits(self):
        ds = build(make_wind_series(150, seed=3), DesignSpec(Design.ZM_ZM, 2, 2))
        config = ModelConfig(kind=ModelKind.LINEAR)
        predictor = config.fitter()(ds.X, ds.y, None)
        stacked = predictor(ds.X)
        fc = fit_forecaster(ds, config)
        assert np.allclose(stacked, fc.predict_targets(ds.X), atol=1e-12)


class TestKernelForecaster:
    def test_requires_params(self):
        ds = build(make_speed_series(100, seed=4), DesignSpec(Design.SS, 1, 2))
        with pytest.raises(DomainError):
            fit_forecaster(ds, ModelConfig(kind=ModelKind.KRR))

    def test_fits_and_predicts(self):
        ds = build(make_speed_series(150, seed=5), DesignSpec(Design.SS, 1, 2))
        config = ModelConfig(kind=ModelKind.KRR,
                             params=KernelParams(2.0, 1e-4), m=40, seed=1)
        fc = fit_forecaster(ds, config)
        preds = fc.predict_speed(ds.X)
        # In-sample kernel fit should track the signal reasonably.
        assert np.corrcoef(preds, ds.y[:, 0])[0, 1] > 0.5

    def test_deterministic(self):
        ds = build(make_speed_series(120, seed=6), DesignSpec(Design.SS, 1, 2))
        config = ModelConfig(kind=ModelKind.KRR,
                             params=KernelParams(1.0, 1e-3), m=30, seed=7)
        a = fit_forecaster(ds, config).predict_speed(ds.X)
        b = fit_forecaster(ds, config).predict_speed(ds.X)
        assert np.array_equal(a, b)


class TestSerialization:
    def test_linear_round_trip(self):
        ds = build(make_wind_series(120, seed=8), DesignSpec(Design.ZM_ZM, 1, 2))
        fc = fit_forecaster(ds, ModelConfig(kind=ModelKind.LINEAR))
        buf = io.StringIO()
        save_forecaster(fc, buf)
        buf.seek(0)
        back = load_forecaster(buf)
        assert back.spec == fc.spec
        assert np.array_equal(back.predict_speed(ds.X), fc.predict_speed(ds.X))

    def test_kernel_round_trip(self):
        ds = build(make_wind_series(100, seed=9), DesignSpec(Design.ZM_S, 2, 2))
        config = ModelConfig(kind=ModelKind.KRR,
                             params=KernelParams(2.0, 1e-3), m=25, seed=2)
        fc = fit_forecaster(ds, config)
        buf = io.StringIO()
        save_forecaster(fc, buf)
        buf.seek(0)
        back = load_forecaster(buf)
        assert np.array_equal(back.predict_speed(ds.X), fc.predict_speed(ds.X))

    def test_rejects_foreign_documents(self):
        with pytest.raises(DomainError):
            load_forecaster(io.StringIO('{"format": "something-else"}'))
