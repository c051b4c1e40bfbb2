import math

import numpy as np
import pytest

from newswarn.errors import DataError, NumericalError
from newswarn.series import Series
from newswarn.tsstats import (adf_test, difference_until_stationary, f_sf, fit_adl,
                              granger_test, ols, panel_granger, select_features,
                              select_lags_aic, spearman, write_screening_csv)


class TestOls:
    def test_exact_recovery(self):
        rng = np.random.default_rng(0)
        X = rng.normal(0, 1, (40, 4))
        beta = np.array([1.5, -2.0, 0.25, 3.0])
        fit = ols(X, X @ beta)
        assert np.allclose(fit.beta, beta, atol=1e-8)
        assert fit.rss <= 1e-12

    def test_ones_column_gives_mean(self):
        y = np.array([1.0, 2.0, 3.0, 6.0])
        fit = ols(np.ones((4, 1)), y)
        assert fit.beta[0] == pytest.approx(np.mean(y))

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(1)
        X = rng.normal(0, 1, (50, 3))
        y = rng.normal(0, 1, 50)
        fit = ols(X, y)
        oracle = np.linalg.solve(X.T @ X, X.T @ y)
        assert np.allclose(fit.beta, oracle, atol=1e-8)

    def test_rank_deficiency_names_columns(self):
        rng = np.random.default_rng(2)
        x = rng.normal(0, 1, 30)
        X = np.column_stack([np.ones(30), x, x])
        with pytest.raises(NumericalError, match=r"\[2\]"):
            ols(X, rng.normal(0, 1, 30))

    def test_more_params_than_rows_rejected(self):
        with pytest.raises(DataError):
            ols(np.ones((3, 4)), np.ones(3))

    def test_residual_orthogonality(self):
        rng = np.random.default_rng(3)
        X = rng.normal(0, 1, (80, 5))
        y = rng.normal(0, 1, 80)
        fit = ols(X, y)
        r = y - X @ fit.beta
        scale = np.abs(X).max() * np.abs(y).max()
        assert np.abs(X.T @ r).max() <= 1e-8 * max(scale, 1.0)


def test_f_sf_against_known_values():
    # F(2, 10): P(F > 4.102821) ~= 0.05
    assert f_sf(4.102821, 2, 10) == pytest.approx(0.05, abs=1e-4)
    assert f_sf(0.0, 3, 7) == 1.0


class TestAdf:
    def test_white_noise_stationary(self):
        rng = np.random.default_rng(4)
        result = adf_test(rng.normal(0, 1, 200))
        assert result.stationary
        assert result.statistic < result.critical_value

    def test_random_walk_not_stationary(self):
        rng = np.random.default_rng(5)
        walk = np.cumsum(rng.normal(0, 1, 200))
        assert not adf_test(walk).stationary

    def test_constant_series_errors(self):
        with pytest.raises(NumericalError, match="degenerate"):
            adf_test(np.ones(50))

    def test_too_short_errors(self):
        with pytest.raises(DataError):
            adf_test(np.arange(10.0), max_lag=4)


class TestDifferencing:
    def test_stationary_unchanged(self):
        rng = np.random.default_rng(6)
        s = Series(10, rng.normal(0, 1, 150))
        out, d = difference_until_stationary(s)
        assert d == 0
        assert out.start == 10 and np.allclose(out.values, s.values)

    def test_random_walk_needs_one(self):
        rng = np.random.default_rng(7)
        s = Series(0, np.cumsum(rng.normal(0, 1, 200)))
        out, d = difference_until_stationary(s)
        assert d == 1
        assert out.start == 1 and len(out) == 199

    def test_linear_trend_removed(self):
        rng = np.random.default_rng(8)
        s = Series(0, 0.5 * np.arange(200) + rng.normal(0, 1, 200))
        _, d = difference_until_stationary(s)
        assert d == 1

    def test_failure_carries_statistic(self):
        rng = np.random.default_rng(9)
        doubly = np.cumsum(np.cumsum(rng.normal(0, 1, 300)))
        with pytest.raises(NumericalError, match="ADF statistic"):
            difference_until_stationary(doubly, max_d=0)

    def test_d_zero_iff_adf_passes(self):
        rng = np.random.default_rng(10)
        for values in (rng.normal(0, 1, 150), np.cumsum(rng.normal(0, 1, 150))):
            passes = adf_test(values).stationary
            _, d = difference_until_stationary(values)
            assert (d == 0) == passes


class TestLagSelection:
    def simulate_lag2(self, rng, T=200, noise=0.01, effect=0.8):
        x = rng.normal(0, 1, T)
        y = np.zeros(T)
        for t in range(2, T):
            y[t] = 0.5 * y[t - 1] + effect * x[t - 2] + rng.normal(0, noise)
        return y, x

    def test_planted_lag_two(self):
        rng = np.random.default_rng(11)
        y, x = self.simulate_lag2(rng)
        n = select_lags_aic(y, x, n_max=5)
        assert n >= 2
        fit = fit_adl(y, x, n)
        assert fit.b[1] == pytest.approx(0.8, abs=0.05)

    def test_pure_noise_x_small_coefficients(self):
        rng = np.random.default_rng(12)
        T = 400
        x = rng.normal(0, 1, T)
        y = np.zeros(T)
        for t in range(1, T):
            y[t] = 0.5 * y[t - 1] + rng.normal(0, 1)
        n = select_lags_aic(y, x, n_max=4)
        fit = fit_adl(y, x, n)
        assert np.abs(fit.b).max() < 0.2

    def test_single_candidate(self):
        rng = np.random.default_rng(13)
        y, x = rng.normal(0, 1, 50), rng.normal(0, 1, 50)
        assert select_lags_aic(y, x, n_max=1) == 1

    def test_aic_recomputable_from_rss(self):
        rng = np.random.default_rng(14)
        y, x = self.simulate_lag2(rng, noise=0.5)
        for n in range(1, 5):
            fit = fit_adl(y, x, n)
            expected = fit.nobs * math.log(max(fit.rss, 1e-300) / fit.nobs) + 2 * (2 * n + 1)
            assert fit.aic == expected

    def test_insufficient_length_errors(self):
        with pytest.raises(DataError):
            select_lags_aic(np.ones(10), np.ones(10), n_max=6)


class TestGranger:
    def test_planted_causality_detected(self):
        rng = np.random.default_rng(15)
        T = 300
        x = rng.normal(0, 1, T)
        y = np.zeros(T)
        for t in range(2, T):
            y[t] = 0.5 * y[t - 1] + 0.8 * x[t - 2] + rng.normal(0, 1)
        n = select_lags_aic(y, x, n_max=4)
        result = granger_test(y, x, n)
        assert result.decision and result.p_value < 0.01

    def test_null_rejection_rate_near_level(self):
        rng = np.random.default_rng(16)
        rejections = 0
        reps = 100
        for _ in range(reps):
            T = 150
            x = rng.normal(0, 1, T)
            y = np.zeros(T)
            for t in range(1, T):
                y[t] = 0.5 * y[t - 1] + rng.normal(0, 1)
            n = select_lags_aic(y, x, n_max=3)
            rejections += granger_test(y, x, n).decision
        assert rejections / reps <= 0.06

    def test_perfect_predictor_huge_f(self):
        rng = np.random.default_rng(17)
        x = rng.normal(0, 1, 200)
        y = np.roll(x, 1)  # x leads y by one step exactly
        y[0] = 0.0
        y = y + rng.normal(0, 1e-6, 200)
        result = granger_test(y, x, 1)
        assert result.decision and result.f_stat > 1e6

    def test_affine_invariance_of_f(self):
        rng = np.random.default_rng(18)
        T = 200
        x = rng.normal(0, 1, T)
        y = np.zeros(T)
        for t in range(2, T):
            y[t] = 0.4 * y[t - 1] + 0.5 * x[t - 1] + rng.normal(0, 1)
        f1 = granger_test(y, x, 2).f_stat
        f2 = granger_test(y, 7.0 - 3.0 * x, 2).f_stat
        assert f1 == pytest.approx(f2, rel=1e-8)

    def test_panel_granger_pools_districts(self):
        rng = np.random.default_rng(19)
        y_by, x_by = {}, {}
        for d in range(6):
            T = 80
            x = rng.normal(0, 1, T)
            y = np.zeros(T)
            for t in range(1, T):
                y[t] = 0.3 * y[t - 1] + 0.6 * x[t - 1] + rng.normal(0, 1)
            y_by[f"d{d}"] = y
            x_by[f"d{d}"] = x
        result = panel_granger(y_by, x_by, n_max=3)
        assert result.decision


class TestScreening:
    def build_panel(self, rng, districts=6, T=120, cause=True):
        ipc, factors = {}, {}
        for d in range(districts):
            key = f"d{d:02d}"
            z = (rng.random(T) < 0.1).astype(float)
            x = 0.02 + 0.1 * z + rng.normal(0, 0.005, T)
            x = np.clip(x, 0, 1)
            y = np.zeros(T)
            for t in range(3, T):
                y[t] = 2.0 + (1.5 * z[t - 3] if cause else 0.0) + rng.normal(0, 0.2)
            ipc[key] = Series(0, y)
            factors[key] = Series(0, x)
        return ipc, factors

    def test_planted_feature_retained(self):
        rng = np.random.default_rng(20)
        ipc, factors = self.build_panel(rng)
        retained, report = select_features(["planted"], ipc, {"planted": factors})
        assert "planted" in retained
        assert report[0].decision

    def test_all_zero_rejected(self):
        rng = np.random.default_rng(21)
        ipc, _ = self.build_panel(rng)
        zeros = {d: Series(0, np.zeros(120)) for d in ipc}
        retained, report = select_features(["dead"], ipc, {"dead": zeros})
        assert retained == {}
        assert report[0].reason == "all-zero factor"

    def test_transformed_factor_stored(self):
        rng = np.random.default_rng(22)
        ipc, factors = self.build_panel(rng)
        # a trending factor forces differencing; the stored series must carry d
        trended = {d: Series(0, np.cumsum(np.abs(rng.normal(0.2, 0.05, 120))) / 100
                             + s.values)
                   for d, s in factors.items()}
        retained, report = select_features(["trendy"], ipc, {"trendy": trended},
                                           max_d=2)
        if "trendy" in retained:
            d_order = retained["trendy"]["diff_order"]
            assert d_order == report[0].diff_order
            some = next(iter(retained["trendy"]["series"].values()))
            assert some.start == d_order

    def test_per_district_mode_reaches_same_conclusion(self):
        rng = np.random.default_rng(26)
        ipc, factors = self.build_panel(rng, districts=6, T=140)
        retained, report = select_features(["planted"], ipc, {"planted": factors},
                                           mode="per-district")
        assert "planted" in retained
        with pytest.raises(DataError):
            select_features([], {}, {}, mode="sideways")

    def test_pure_noise_set_retains_about_one_percent(self):
        rng = np.random.default_rng(25)
        districts = [f"d{d:02d}" for d in range(6)]
        T = 100
        ipc = {}
        for d in districts:
            y = np.zeros(T)
            for t in range(1, T):
                y[t] = 2.0 + 0.3 * (y[t - 1] - 2.0) + rng.normal(0, 0.3)
            ipc[d] = Series(0, y)
        factors = {
            f"noise{i:03d}": {
                d: Series(0, np.clip(rng.normal(0.03, 0.01, T), 0, 1))
                for d in districts
            }
            for i in range(100)
        }
        retained, report = select_features(sorted(factors), ipc, factors, n_max=3)
        assert len(report) == 100
        assert len(retained) <= 5  # ~1 expected at the 1% level

    def test_screening_csv(self, tmp_path):
        rng = np.random.default_rng(23)
        ipc, factors = self.build_panel(rng)
        _, report = select_features(["planted"], ipc, {"planted": factors})
        path = tmp_path / "screen.csv"
        write_screening_csv(path, report)
        text = path.read_text()
        assert text.splitlines()[0] == "feature,F,p,lag_n,differencing_d,decision,reason"
        assert "planted" in text


class TestSpearman:
    def test_identity(self):
        a = [3.0, 1.0, 4.0, 1.5, 9.0]
        assert spearman(a, a) == pytest.approx(1.0)

    def test_reversal(self):
        a = [1.0, 2.0, 3.0, 4.0]
        assert spearman(a, a[::-1]) == pytest.approx(-1.0)

    def test_ties_frozen_oracle(self):
        # hand ranking: a -> [1, 2.5, 2.5, 4], b -> [1, 2, 3, 4];
        # Pearson of those ranks is sqrt(4.5 / 5).
        a = [1.0, 2.0, 2.0, 3.0]
        b = [10.0, 20.0, 30.0, 40.0]
        assert spearman(a, b) == pytest.approx(0.9486832980505138, abs=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(24)
        a = rng.normal(0, 1, 30)
        b = np.exp(a)  # strictly monotone
        assert spearman(a, b) == pytest.approx(1.0)

    def test_constant_vector_errors(self):
        with pytest.raises(NumericalError):
            spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_length_checks(self):
        with pytest.raises(DataError):
            spearman([1.0, 2.0], [1.0, 2.0])
        with pytest.raises(DataError):
            spearman([1.0, 2.0, 3.0], [1.0, 2.0])
