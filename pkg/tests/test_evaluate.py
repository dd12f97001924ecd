import math
from datetime import datetime, timedelta

import numpy as np
import pytest

from windcast.errors import (
    DimensionMismatch,
    DomainError,
    MismatchedEvaluationSets,
    NoValidPairs,
    TooFewSamples,
    ZeroDenominator,
    ZeroPersistence,
)
from windcast.evaluate import (
    MetricReport,
    delta_nrmse,
    fingerprint_instants,
    gamma_rmse,
    make_report,
    nrmse,
    persistence_forecast,
    report_from_dict,
    report_to_dict,
    rms,
    rmse,
)
from windcast.lagset import Design, DesignSpec
from windcast.series import WindSeries

T0 = datetime(2021, 1, 1)
HOUR = timedelta(hours=1)


def speed_series(values, gaps=()):
    s = np.asarray(values, dtype=float)
    s[list(gaps)] = np.nan
    z = np.where(np.isnan(s), np.nan, 0.0)
    return WindSeries(T0, HOUR, s.copy(), z, -s)


class TestNrmse:
    def test_perfect(self):
        y = np.array([1.0, 2.0, 3.0])
        assert nrmse(y, y) == 0.0

    def test_zero_predictor(self):
        assert nrmse(np.array([3.0, 4.0]), np.zeros(2)) == pytest.approx(1.0)

    def test_hand_value(self):
        got = nrmse(np.array([1.0, 2.0, 2.0]), np.array([1.0, 1.0, 2.0]))
        assert got == pytest.approx(1.0 / 3.0, rel=1e-12)

    def test_zero_denominator(self):
        with pytest.raises(ZeroDenominator):
            nrmse(np.zeros(3), np.ones(3))

    def test_identity_with_rmse_over_rms(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(1, 300))
            y = rng.uniform(0.1, 12, n)
            y_hat = y + rng.normal(0, 0.5, n)
            assert nrmse(y, y_hat) == pytest.approx(
                rmse(y, y_hat) / rms(y), rel=1e-12
            )

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        y = rng.uniform(1, 5, 40)
        y_hat = y + rng.normal(0, 0.2, 40)
        base = nrmse(y, y_hat)
        for c in (1e-3, 7.0, 1e4):
            assert nrmse(c * y, c * y_hat) == pytest.approx(base, rel=1e-9)


class TestRmse:
    def test_identical(self):
        assert rmse(np.arange(5.0), np.arange(5.0)) == 0.0

    def test_hand_value(self):
        assert rmse(np.zeros(2), np.array([3.0, 4.0])) == pytest.approx(
            5.0 / math.sqrt(2.0), rel=1e-12
        )

    def test_single_element(self):
        assert rmse(np.array([2.0]), np.array([-1.0])) == 3.0

    def test_validation(self):
        with pytest.raises(DimensionMismatch):
            rmse(np.ones(2), np.ones(3))
        with pytest.raises(TooFewSamples):
            rmse(np.array([]), np.array([]))


class TestPersistence:
    def test_constant_series_is_perfect(self):
        series = speed_series(np.full(30, 4.2))
        for h in (1, 3, 6):
            pf = persistence_forecast(series, h)
            assert nrmse(pf.y_true, pf.y_pred) == 0.0

    def test_pairs_by_definition(self):
        pf = persistence_forecast(speed_series([1, 2, 3, 4]), 1)
        assert pf.y_true.tolist() == [2.0, 3.0, 4.0]
        assert pf.y_pred.tolist() == [1.0, 2.0, 3.0]
        assert pf.target_instants == (T0 + HOUR, T0 + 2 * HOUR, T0 + 3 * HOUR)

    def test_gap_blocks_both_roles(self):
        # The gap can serve as neither source nor target, which here kills
        # every candidate pair.
        with pytest.raises(NoValidPairs):
            persistence_forecast(speed_series([1, 2, 3], gaps=[1]), 1)

    def test_gap_partial(self):
        pf = persistence_forecast(speed_series([1, 2, 3, 4, 5], gaps=[1]), 1)
        assert pf.y_pred.tolist() == [3.0, 4.0]
        assert pf.y_true.tolist() == [4.0, 5.0]

    def test_periodic_series_at_period_horizon(self):
        s = np.tile([2.0, 5.0, 3.0, 7.0], 12)
        pf = persistence_forecast(speed_series(s), 4)
        assert nrmse(pf.y_true, pf.y_pred) == 0.0

    def test_target_restriction(self):
        series = speed_series([1, 2, 3, 4, 5, 6])
        wanted = (T0 + 2 * HOUR, T0 + 4 * HOUR)
        pf = persistence_forecast(series, 1, targets=wanted)
        assert pf.target_instants == wanted
        assert pf.y_true.tolist() == [3.0, 5.0]

    def test_too_short(self):
        with pytest.raises(NoValidPairs):
            persistence_forecast(speed_series([1.0, 2.0]), 5)


class TestGammaRmse:
    def test_self_ratio(self):
        assert gamma_rmse(1.37, 1.37) == 1.0

    def test_improvement(self):
        assert gamma_rmse(0.8, 1.0) == pytest.approx(0.8)

    def test_perfect_algorithm(self):
        assert gamma_rmse(0.0, 2.0) == 0.0

    def test_zero_persistence(self):
        with pytest.raises(ZeroPersistence):
            gamma_rmse(1.0, 0.0)

    def test_persistence_against_itself_from_data(self):
        series = speed_series(np.random.default_rng(2).uniform(1, 9, 50))
        pf = persistence_forecast(series, 3)
        r = rmse(pf.y_true, pf.y_pred)
        assert gamma_rmse(r, r) == 1.0


class TestReports:
    def _report(self, station="e01", h=6, seed=0, model="krr", design=Design.SS):
        rng = np.random.default_rng(seed)
        y = rng.uniform(1, 10, 20)
        y_hat = y + rng.normal(0, 0.3, 20)
        instants = tuple(T0 + i * HOUR for i in range(20))
        spec = DesignSpec(design, h, 24)
        return make_report(y, y_hat, spec, station, model, instants)

    def test_fields(self):
        rep = self._report()
        assert rep.n_predictions == 20
        assert rep.horizon == 6
        assert rep.nrmse > 0
        assert len(rep.eval_fingerprint) == 16

    def test_delta_same_report_is_zero(self):
        rep = self._report()
        assert delta_nrmse(rep, rep) == 0.0

    def test_delta_across_designs_allowed(self):
        a = self._report(design=Design.ZM_S)
        b = self._report(design=Design.SS)
        assert delta_nrmse(a, b) == pytest.approx(a.nrmse - b.nrmse)

    def test_delta_sign(self):
        a = self._report(seed=1)
        better = MetricReport(a.nrmse - 0.02, a.rmse, a.n_predictions,
                              a.design, a.station_id, "other",
                              a.eval_fingerprint)
        assert delta_nrmse(better, a) == pytest.approx(-0.02)

    def test_mismatched_station(self):
        with pytest.raises(MismatchedEvaluationSets):
            delta_nrmse(self._report(station="e01"), self._report(station="f99"))

    def test_mismatched_horizon(self):
        with pytest.raises(MismatchedEvaluationSets):
            delta_nrmse(self._report(h=1), self._report(h=6))

    def test_mismatched_instants(self):
        a = self._report()
        moved = MetricReport(a.nrmse, a.rmse, a.n_predictions, a.design,
                             a.station_id, a.model,
                             fingerprint_instants((T0,)))
        with pytest.raises(MismatchedEvaluationSets):
            delta_nrmse(a, moved)

    def test_fingerprint_order_sensitive(self):
        instants = tuple(T0 + i * HOUR for i in range(5))
        assert fingerprint_instants(instants) != fingerprint_instants(
            instants[::-1]
        )

    def test_report_validation(self):
        spec = DesignSpec(Design.SS, 1, 2)
        with pytest.raises(DomainError):
            MetricReport(-0.1, 1.0, 5, spec, "x", "krr", "abc")
        with pytest.raises(DimensionMismatch):
            make_report(np.ones(3), np.ones(3), spec, "x", "krr", (T0,))

    def test_dict_roundtrip(self):
        report = self._report(h=6)
        restored = report_from_dict(report_to_dict(report))
        assert restored == report
        assert report_to_dict(report)["design"] == "ss"
