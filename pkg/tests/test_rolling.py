from datetime import timedelta

import numpy as np
import pytest

from windcast.errors import DomainError, InsufficientHistory
from windcast.evaluate import nrmse
from windcast.forecaster import ModelConfig, ModelKind, fit_forecaster
from windcast.kernel_model import KernelParams
from windcast.lagset import Design, DesignSpec, build
from windcast.rolling import (
    PolicyKind,
    UpdatePolicy,
    run_backtest,
)
from windcast.select import Grid
from windcast.series import WindSample

from conftest import make_speed_series, make_wind_series

HOUR = timedelta(hours=1)

LINEAR = ModelConfig(kind=ModelKind.LINEAR)
SPEC = DesignSpec(Design.SS, 3, 6)


def small_backtest(policy, n=600, cutoff_slot=400, spec=SPEC, config=LINEAR,
                   seed=3, series=None, **kwargs):
    series = series if series is not None else make_speed_series(n, seed=seed)
    cutoff = series.start + cutoff_slot * HOUR
    return run_backtest(series, spec, config, policy, cutoff,
                        station_id="syn", **kwargs), series, cutoff


class TestPolicyValidation:
    def test_defaults(self):
        assert UpdatePolicy.static().retrain_period == 168
        assert UpdatePolicy.online_short().train_size == 2232
        assert UpdatePolicy.incremental().train_size is None

    def test_rejects_bad_values(self):
        with pytest.raises(DomainError):
            UpdatePolicy(PolicyKind.ONLINE, train_size=0)
        with pytest.raises(DomainError):
            UpdatePolicy(PolicyKind.STATIC, retrain_period=0)


class TestScheduling:
    def test_static_trains_once(self):
        report, _, _ = small_backtest(UpdatePolicy.static())
        assert report.retrain_count == 1
        assert len(report.windows) == 1

    def test_retrain_count_ceiling(self):
        for period, expected in ((100, 2), (168, 2), (200, 1), (50, 4)):
            report, _, _ = small_backtest(
                UpdatePolicy.online(retrain_period=period))
            n_test = report.metrics.n_predictions
            assert report.retrain_count == -(-n_test // period) == expected

    def test_online_sizes_constant(self):
        report, _, _ = small_backtest(
            UpdatePolicy.online(train_size=150, retrain_period=80))
        assert all(w.train_rows == 150 for w in report.windows)

    def test_incremental_sizes_nondecreasing(self):
        report, _, _ = small_backtest(
            UpdatePolicy.incremental(retrain_period=80))
        sizes = [w.train_rows for w in report.windows]
        assert sizes == sorted(sizes)
        assert sizes[-1] > sizes[0]

    def test_online_none_uses_initial_pool(self):
        report, _, _ = small_backtest(
            UpdatePolicy.online(retrain_period=80))
        first = report.windows[0].train_rows
        assert all(w.train_rows == first for w in report.windows)

    def test_short_range_degeneracy(self):
        # Test range below one retrain period: every policy trains once and
        # STATIC equals ONLINE with the full history window.
        static, series, cutoff = small_backtest(
            UpdatePolicy.static(), n=480, cutoff_slot=400)
        online, _, _ = small_backtest(
            UpdatePolicy.online(retrain_period=168), n=480, cutoff_slot=400)
        assert static.retrain_count == online.retrain_count == 1
        a = [p.y_pred for p in static.predictions]
        b = [p.y_pred for p in online.predictions]
        assert a == b

    def test_predictions_chronological(self):
        report, _, cutoff = small_backtest(
            UpdatePolicy.incremental(retrain_period=60))
        instants = [p.instant for p in report.predictions]
        assert instants == sorted(instants)
        assert all(t >= cutoff for t in instants)


class TestCorrectness:
    def test_online_window_matches_external_refit(self):
        # Re-derive each window's training pool independently and refit
        # outside the engine: predictions must agree elementwise.
        policy = UpdatePolicy.online(train_size=120, retrain_period=70)
        report, series, cutoff = small_backtest(policy)
        dataset = build(series, SPEC)
        targets = dataset.target_instants()

        for w in report.windows:
            pool = [i for i, t in enumerate(targets) if t < w.boundary]
            train_idx = np.array(pool[-120:])
            model = fit_forecaster(dataset.take(train_idx), LINEAR)
            rows = report.predictions[
                w.first_prediction:w.first_prediction + w.n_predictions
            ]
            pred_idx = [targets.index(p.instant) for p in rows]
            expected = model.predict_speed(dataset.X[pred_idx])
            assert np.array_equal(expected, [p.y_pred for p in rows])

    def test_no_leakage_under_future_mutation(self):
        # Changing data at or after a prediction's target must not change
        # that prediction, whatever the policy.
        for policy in (UpdatePolicy.static(),
                       UpdatePolicy.online(retrain_period=50),
                       UpdatePolicy.incremental(retrain_period=50),
                       UpdatePolicy.online_short(train_size=80,
                                                 retrain_period=50)):
            report, series, cutoff = small_backtest(policy, n=400,
                                                    cutoff_slot=300)
            probe = report.predictions[20]
            cut_idx = series.index_of(probe.instant)
            mutated = series
            for j in range(cut_idx, series.n_slots):
                mutated = mutated.replace_slot(
                    j, WindSample(9.9, 0.0, -9.9))
            report2 = run_backtest(mutated, SPEC, LINEAR, policy,
                                   series.start + 300 * HOUR,
                                   station_id="syn")
            probe2 = [p for p in report2.predictions
                      if p.instant == probe.instant]
            assert probe2 and probe2[0].y_pred == probe.y_pred

    def test_metrics_match_prediction_rows(self):
        report, _, _ = small_backtest(UpdatePolicy.static())
        y_true = np.array([p.y_true for p in report.predictions])
        y_pred = np.array([p.y_pred for p in report.predictions])
        assert report.metrics.nrmse == pytest.approx(nrmse(y_true, y_pred))
        assert report.metrics.n_predictions == len(report.predictions)

    def test_stationary_series_updating_gains_modest(self):
        # On a stationary generator the static and online strategies should
        # score within a couple of points of each other.
        static, series, cutoff = small_backtest(
            UpdatePolicy.static(), n=2000, cutoff_slot=1400, seed=17)
        online, _, _ = small_backtest(
            UpdatePolicy.online(retrain_period=168), n=2000,
            cutoff_slot=1400, seed=17)
        assert abs(static.metrics.nrmse - online.metrics.nrmse) <= 0.02

    def test_gap_rows_are_skipped_not_predicted(self):
        series = make_speed_series(500, seed=5, gaps=range(420, 440))
        cutoff = series.start + 400 * HOUR
        report = run_backtest(series, SPEC, LINEAR,
                              UpdatePolicy.online(retrain_period=50), cutoff)
        predicted = {p.instant for p in report.predictions}
        for g in range(420, 440):
            assert series.start + g * HOUR not in predicted

    def test_kernel_backtest_with_tuning(self):
        series = make_speed_series(360, seed=7)
        cutoff = series.start + 300 * HOUR
        config = ModelConfig(kind=ModelKind.KRR, m=40, seed=1)
        report = run_backtest(
            series, DesignSpec(Design.SS, 1, 3), config,
            UpdatePolicy.online(retrain_period=40), cutoff,
            grid=Grid((1.0, 4.0), (1e-4, 1e-2)), cv_folds=4,
        )
        assert report.params_used is not None
        assert isinstance(report.params_used, KernelParams)
        assert report.metrics.nrmse < 1.0

    def test_zm_zm_backtest_reports_speed_errors(self):
        series = make_wind_series(400, seed=8)
        cutoff = series.start + 320 * HOUR
        report = run_backtest(series, DesignSpec(Design.ZM_ZM, 1, 2), LINEAR,
                              UpdatePolicy.static(), cutoff)
        assert all(p.y_pred >= 0 for p in report.predictions)
        assert all(p.y_true >= 0 for p in report.predictions)


class TestErrorHandling:
    def test_insufficient_history(self):
        # First valid target sits at slot 30; a cutoff there leaves no
        # training row.
        series = make_speed_series(50, seed=9)
        with pytest.raises(InsufficientHistory):
            run_backtest(series, DesignSpec(Design.SS, 1, 30), LINEAR,
                         UpdatePolicy.static(), series.start + 30 * HOUR)

    def test_cutoff_past_data(self):
        series = make_speed_series(50, seed=10)
        with pytest.raises(InsufficientHistory):
            run_backtest(series, SPEC, LINEAR, UpdatePolicy.static(),
                         series.start + 50 * HOUR)
