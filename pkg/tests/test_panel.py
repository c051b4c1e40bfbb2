import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from newswarn.errors import DataError, NumericalError
from newswarn.months import parse_month
from newswarn.panel import (ModelSpec, audit_no_lookahead, build_design,
                            build_design_row, ablate, cross_validate, fit,
                            forward_fill_ipc, lasso_cd, lasso_kkt_residual,
                            load_panel_csv, month_folds, percentile_ranks,
                            spatial_average, validate_factors, write_predictions_csv)
from newswarn.series import Series

from conftest import (grid_districts, make_gazetteer, make_panel,
                      plant_adl_response, planted_coefficients)


class TestForwardFill:
    def test_definition_example(self):
        jan, apr, may = parse_month("2011-01"), parse_month("2011-04"), parse_month("2011-05")
        s = forward_fill_ipc({jan: 2, apr: 3}, end=may)
        assert s.at(parse_month("2011-02")) == 2
        assert s.at(parse_month("2011-03")) == 2
        assert s.at(apr) == 3
        assert s.at(may) == 3

    def test_single_observation_constant_tail(self):
        jan = parse_month("2011-01")
        s = forward_fill_ipc({jan: 4}, end=jan + 5)
        assert np.all(s.values == 4.0)

    def test_cadence_change(self):
        # quarterly through 2015 (Jan Apr Jul Oct), triannual after (Feb Jun Oct)
        obs = {parse_month("2015-10"): 2, parse_month("2016-02"): 3,
               parse_month("2016-06"): 2}
        s = forward_fill_ipc(obs, end=parse_month("2016-07"))
        assert s.at(parse_month("2015-12")) == 2
        assert s.at(parse_month("2016-01")) == 2
        assert s.at(parse_month("2016-02")) == 3
        assert s.at(parse_month("2016-05")) == 3
        assert s.at(parse_month("2016-06")) == 2

    def test_months_before_first_absent(self):
        jan = parse_month("2011-01")
        s = forward_fill_ipc({jan: 2}, end=jan + 2)
        assert s.start == jan

    def test_empty_errors(self):
        with pytest.raises(DataError):
            forward_fill_ipc({})


class TestBuildDesign:
    def test_combined_column_count_three_features(self):
        panel = make_panel(n_districts=5, features=("alpha", "beta", "gamma"))
        design = build_design(panel, ModelSpec(kind="combined"))
        expected = 5 + 6 + 9 * 6 + 5 + 3 * 18
        assert design.X.shape[1] == expected
        assert len(design.columns) == expected

    def test_baseline_has_no_news_columns(self):
        panel = make_panel(n_districts=5)
        design = build_design(panel, ModelSpec(kind="baseline"))
        assert all(c.group != "news" for c in design.columns)
        assert design.X.shape[1] == 5 + 6 + 54 + 5

    def test_news_has_no_traditional_columns(self):
        panel = make_panel(n_districts=5)
        design = build_design(panel, ModelSpec(kind="news"))
        groups = {c.group for c in design.columns}
        assert "traditional" not in groups and "static" not in groups

    def test_column_blocks_disjoint_and_combined_is_union(self):
        panel = make_panel(n_districts=5)
        names = {
            kind: {c.name for c in build_design(panel, ModelSpec(kind=kind)).columns}
            for kind in ("baseline", "news", "combined")
        }
        shared = {c.name for c in build_design(panel, ModelSpec(kind="baseline")).columns
                  if c.group in ("intercept", "y_lag")}
        assert names["baseline"] & names["news"] == shared
        assert names["combined"] == names["baseline"] | names["news"]

    def test_early_months_skipped_with_audit(self):
        panel = make_panel(n_districts=5)
        design = build_design(panel, ModelSpec(kind="combined"))
        first_row_month = min(m for _, m in design.rows)
        assert first_row_month == panel.start + 18
        reasons = {r for _, m, r in design.skipped if m < panel.start + 18}
        assert reasons and all("lag" in r for r in reasons)

    def test_single_row_interface(self):
        panel = make_panel(n_districts=5)
        spec = ModelSpec(kind="combined")
        t = panel.start + 20
        row, columns = build_design_row(panel, spec, "d00", t)
        design = build_design(panel, spec)
        idx = design.rows.index(("d00", t))
        assert np.allclose(row, design.X[idx])
        with pytest.raises(DataError):
            build_design_row(panel, spec, "d00", panel.start)

    def test_ablated_clusters_remove_columns(self):
        panel = make_panel(n_districts=5, features=("alpha", "beta", "gamma"),
                           n_clusters=3)
        spec = ModelSpec(kind="combined", ablated_clusters=frozenset({1}))
        design = build_design(panel, spec)
        ablated_features = {w for w, c in panel.clusters.items() if c == 1}
        assert not any(c.feature in ablated_features for c in design.columns)

    def test_unknown_ablated_cluster_rejected(self):
        from newswarn.errors import ConfigError
        panel = make_panel(n_districts=5, features=("alpha",), n_clusters=1)
        spec = ModelSpec(kind="combined", ablated_clusters=frozenset({99}))
        with pytest.raises(ConfigError, match="99"):
            build_design(panel, spec)

    def test_no_lookahead_audit_clean(self):
        panel = make_panel(n_districts=5)
        design = build_design(panel, ModelSpec(kind="combined"))
        violations, records = audit_no_lookahead(design)
        assert violations == []
        assert all(latest <= t - 3 for _, t, latest in records)


class TestSpatial:
    def test_average_of_identical_series(self):
        panel = make_panel(n_districts=6)
        s = Series(panel.start, np.linspace(0, 1, panel.end - panel.start + 1))
        series = {d: s for d in panel.districts}
        out = spatial_average(panel, "d00", series)
        assert np.allclose(out.values, s.values)

    def test_hand_computed_neighbor_sets(self):
        from newswarn.corpus import District
        from newswarn.panel import PanelDataset

        spots = {
            "center": (0.0, 0.0), "north": (1.0, 0.0), "south": (-1.0, 0.0),
            "east": (0.0, 1.0), "west": (0.0, -1.0), "faraway": (20.0, 20.0),
        }
        districts = {
            name: District(name, name, (), "p0", "AA", lat, lon,
                           dict(population=1, area_km2=1, ruggedness=0,
                                cropland_share=0, pasture_share=0))
            for name, (lat, lon) in spots.items()
        }
        panel = PanelDataset(districts=districts, start=0, end=1,
                             publication_months=(0,), ipc={}, ipc_observed={},
                             traditional={}, factors={}, factors_raw={})
        assert set(panel.neighbors("center")) == {"north", "south", "east", "west"}
        assert "center" not in panel.neighbors("center")
        assert "faraway" not in panel.neighbors("center")

    def test_fewer_than_four_candidates_errors(self):
        panel = make_panel(n_districts=3)
        with pytest.raises(DataError):
            panel.neighbors("d00")

    def test_spatial_design_appends_columns(self):
        panel = make_panel(n_districts=6, features=("alpha",))
        plain = build_design(panel, ModelSpec(kind="combined"))
        spatial = build_design(panel, ModelSpec(kind="combined", spatial=True))
        extra = spatial.X.shape[1] - plain.X.shape[1]
        assert extra == 6 + 54 + 5 + 1 * 6
        assert any(c.group == "sp_news" for c in spatial.columns)


class TestFit:
    def test_noise_free_recovery(self):
        rng = np.random.default_rng(30)
        panel = make_panel(n_districts=6, months=96, features=("alpha", "beta"))
        spec = ModelSpec(kind="combined")
        coef = planted_coefficients(panel, spec, rng)
        plant_adl_response(panel, spec, coef)
        result = fit(spec, panel, on_collinear="prune")
        fitted = result.coefficients()
        for name, value in coef.items():
            if name.startswith("static"):
                assert fitted[name] == 0.0  # dropped as collinear, truly zero
            else:
                assert fitted[name] == pytest.approx(value, abs=1e-6)
        assert result.rss <= 1e-10

    def test_statics_dropped_as_collinear_with_intercepts(self):
        panel = make_panel(n_districts=5)
        result = fit(ModelSpec(kind="baseline"), panel, on_collinear="prune")
        assert set(result.dropped) == {f"static[{s}]" for s in panel.static_names}

    def test_error_mode_raises_on_collinearity(self):
        panel = make_panel(n_districts=5)
        with pytest.raises(NumericalError):
            fit(ModelSpec(kind="baseline"), panel, on_collinear="error")


class TestLasso:
    def fixture(self, seed=31, n=20, p=5):
        rng = np.random.default_rng(seed)
        X = rng.normal(0, 1, (n, p))
        beta = np.array([2.0, -1.0, 0.0, 0.0, 0.5])
        y = X @ beta + rng.normal(0, 0.1, n)
        return X, y

    def test_lambda_zero_equals_ols(self):
        from newswarn.tsstats import ols
        X, y = self.fixture()
        beta, _, _ = lasso_cd(X, y, 0.0, np.ones(X.shape[1], bool))
        assert np.allclose(beta, ols(X, y).beta, atol=1e-6)

    def test_kkt_residual_small(self):
        X, y = self.fixture()
        penalized = np.ones(X.shape[1], bool)
        for lam in (0.01, 0.1, 0.5):
            beta, _, _ = lasso_cd(X, y, lam, penalized)
            assert lasso_kkt_residual(X, y, beta, lam, penalized) <= 1e-5

    def test_huge_lambda_zeroes_penalized(self):
        X, y = self.fixture()
        penalized = np.array([False, True, True, True, True])
        beta, _, _ = lasso_cd(X, y, 1e6, penalized)
        assert np.allclose(beta[1:], 0.0)
        assert abs(beta[0]) > 0  # unpenalized coordinate still fits

    def test_nonconvergence_raises(self):
        X, y = self.fixture()
        with pytest.raises(NumericalError):
            lasso_cd(X, y, 0.0, np.ones(X.shape[1], bool), max_sweeps=1)

    def test_lasso_spec_through_fit(self):
        panel = make_panel(n_districts=5, features=("alpha",))
        spec = ModelSpec(kind="combined", lasso=1e6)
        result = fit(spec, panel)
        coefs = result.coefficients()
        news = [v for k, v in coefs.items() if k.startswith("news")]
        assert np.allclose(news, 0.0)


class TestCrossValidate:
    def test_month_folds_partition(self):
        blocks = month_folds(0, 63, 10)
        assert len(blocks) == 10
        assert [m for b in blocks for m in b] == list(range(64))
        assert len(blocks[-1]) == 6 + 4  # remainder joins the last fold

    def test_perfect_fit_gives_zero_rmse(self):
        rng = np.random.default_rng(32)
        panel = make_panel(n_districts=6, months=120, features=("alpha",))
        spec = ModelSpec(kind="combined")
        coef = planted_coefficients(panel, spec, rng)
        plant_adl_response(panel, spec, coef)
        report = cross_validate(spec, panel, folds=8)
        scored = [r for r in report.fold_rmse if r is not None]
        assert scored and all(r == pytest.approx(0.0, abs=1e-6) for r in scored)

    def test_constant_phase_intercept_only_zero_rmse(self):
        panel = make_panel(n_districts=5, months=96)
        for d in list(panel.ipc):
            panel.ipc[d] = Series(panel.start,
                                  np.full(panel.end - panel.start + 1, 2.0))
        report = cross_validate(ModelSpec(kind="baseline"), panel, folds=8)
        scored = [r for r in report.fold_rmse if r is not None]
        assert scored and all(r == pytest.approx(0.0, abs=1e-8) for r in scored)

    def test_nested_spec_no_degradation_on_noise_free_data(self):
        rng = np.random.default_rng(33)
        panel = make_panel(n_districts=6, months=96, features=("alpha", "beta"))
        baseline = ModelSpec(kind="baseline")
        coef = planted_coefficients(panel, baseline, rng)
        plant_adl_response(panel, baseline, coef)
        rep_base = cross_validate(baseline, panel, folds=8)
        rep_comb = cross_validate(ModelSpec(kind="combined"), panel, folds=8)
        assert rep_comb.mean_rmse <= rep_base.mean_rmse + 1e-6

    def test_predictions_only_after_training_window(self):
        panel = make_panel(n_districts=5, months=96)
        report = cross_validate(ModelSpec(kind="baseline"), panel, folds=8)
        blocks = month_folds(panel.start, panel.end, 8)
        for p in report.predictions:
            train_max = max(m for b in blocks[: p.fold - 1] for m in b)
            assert p.month > train_max

    def test_per_country_breakdown(self):
        panel = make_panel(n_districts=6, months=96, countries=2)
        report = cross_validate(ModelSpec(kind="baseline"), panel, folds=8)
        assert set(report.country_rmse) == {"AA", "AB"}

    def test_predictions_csv(self, tmp_path):
        panel = make_panel(n_districts=5, months=96)
        report = cross_validate(ModelSpec(kind="baseline"), panel, folds=8)
        path = tmp_path / "pred.csv"
        write_predictions_csv(path, {"baseline": report})
        header = path.read_text().splitlines()[0]
        assert header == "district_id,month,y_true,y_pred,model"


class TestAblate:
    def test_removing_all_clusters_reproduces_baseline(self):
        panel = make_panel(n_districts=5, months=96,
                           features=("alpha", "beta"), n_clusters=2)
        combined, results = ablate(panel, ModelSpec(kind="combined"), folds=8)
        # removing every cluster by hand: design equals the baseline design
        from newswarn.panel import DesignMatrix, cross_validate_design
        spec = ModelSpec(kind="combined")
        design = __import__("newswarn.panel", fromlist=["build_design"]).build_design(
            panel, spec)
        keep = [i for i, c in enumerate(design.columns) if c.feature is None]
        stripped = design.subset_columns(keep)
        rep_all_removed = cross_validate_design(stripped, spec, panel, folds=8)
        rep_baseline = cross_validate(ModelSpec(kind="baseline"), panel, folds=8)
        assert rep_all_removed.fold_rmse == rep_baseline.fold_rmse
        assert rep_all_removed.mean_rmse == rep_baseline.mean_rmse

    def test_zero_factor_cluster_has_no_effect(self):
        panel = make_panel(n_districts=5, months=96,
                           features=("alpha", "dead"), n_clusters=2)
        dead_cluster = panel.clusters["dead"]
        for level in panel.factors["dead"]:
            for loc, s in panel.factors["dead"][level].items():
                panel.factors["dead"][level][loc] = Series(
                    s.start, np.zeros(len(s)))
        combined, results = ablate(panel, ModelSpec(kind="combined"), folds=8)
        by_cluster = {r.cluster_id: r for r in results}
        assert by_cluster[dead_cluster].mean_delta == pytest.approx(0.0, abs=1e-9)


class TestValidateFactors:
    def test_monotone_transform_selected_with_r1(self):
        panel = make_panel(n_districts=10, features=("alpha", "beta"))
        rng = np.random.default_rng(34)
        months = panel.end - panel.start + 1
        for i, d in enumerate(sorted(panel.districts)):
            peak = 1.0 + i * 0.7 + rng.uniform(0, 0.1)
            vals = np.zeros(months)
            vals[rng.integers(0, months)] = peak
            panel.traditional["conflict_events"][d] = Series(panel.start, vals)
            fvals = np.zeros(months)
            fvals[rng.integers(0, months)] = peak / (1.0 + peak)  # monotone map
            panel.factors_raw["alpha"]["district"][d] = Series(panel.start, fvals)
        rows, percentiles = validate_factors(panel)
        row = next(r for r in rows if r.indicator == "conflict_events")
        assert row.feature == "alpha"
        assert row.spearman_r == pytest.approx(1.0)
        assert "conflict_events" in percentiles["traditional"]

    def test_independent_factors_stay_weak(self):
        panel = make_panel(n_districts=50, features=("alpha", "beta"), seed=35)
        rows, _ = validate_factors(panel)
        assert rows and all(abs(r.spearman_r) < 0.5 for r in rows)

    def test_replica_threshold(self):
        # a news factor that is a noisy monotone transform of a traditional
        # factor across 50 districts must be picked up with high correlation
        panel = make_panel(n_districts=50, features=("conflictish", "other"),
                           seed=36)
        rng = np.random.default_rng(37)
        months = panel.end - panel.start + 1
        for i, d in enumerate(sorted(panel.districts)):
            level = rng.uniform(0.5, 5.0)
            vals = np.abs(rng.normal(0, 0.2, months))
            vals[rng.integers(0, months)] = level
            panel.traditional["conflict_fatalities"][d] = Series(panel.start, vals)
            news_peak = (level ** 1.3) / 10.0 + rng.normal(0, 0.02)
            fvals = np.abs(rng.normal(0, 0.002, months))
            fvals[rng.integers(0, months)] = np.clip(news_peak, 0.001, 1.0)
            panel.factors_raw["conflictish"]["district"][d] = Series(panel.start, fvals)
        rows, _ = validate_factors(panel)
        row = next(r for r in rows if r.indicator == "conflict_fatalities")
        assert row.feature == "conflictish"
        assert row.spearman_r >= 0.89


class TestPercentiles:
    def test_monotone_series_evenly_spaced(self):
        pct = percentile_ranks([3.0, 5.0, 9.0, 11.0, 20.0])
        assert np.allclose(pct, [0.0, 0.25, 0.5, 0.75, 1.0])

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(38)
        v = rng.normal(0, 1, 40)
        assert np.allclose(percentile_ranks(v), percentile_ranks(np.exp(v)))

    @settings(max_examples=150, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=40))
    def test_bounds_and_order_preservation(self, values):
        pct = percentile_ranks(values)
        assert np.all((pct >= 0.0) & (pct <= 1.0))
        v = np.asarray(values)
        if np.unique(v).size == v.size:  # ties average, shifting the extremes
            assert pct.min() == 0.0 and pct.max() == 1.0
        for i in range(len(values)):
            for j in range(len(values)):
                if v[i] < v[j]:
                    assert pct[i] < pct[j]
                elif v[i] == v[j]:
                    assert pct[i] == pct[j]


class TestPanelCsv:
    def write_fixture(self, tmp_path, gaz):
        path = tmp_path / "panel.csv"
        months = ["2011-01", "2011-02", "2011-03", "2011-04"]
        with open(path, "w") as fh:
            fh.write("district_id,month,ipc_phase,conflict_events,conflict_fatalities,"
                     "price_index,price_yoy,evapotranspiration,rain_mean,"
                     "rain_deviation,ndvi_mean,ndvi_deviation\n")
            for d in sorted(gaz.districts):
                for i, m in enumerate(months):
                    phase = "2" if m in ("2011-01", "2011-04") else ""
                    cells = [d, m, phase] + [f"{0.1 * (i + 1):.3f}"] * 9
                    fh.write(",".join(cells) + "\n")
        return path

    def test_load_round_trip(self, tmp_path):
        gaz = make_gazetteer()
        path = self.write_fixture(tmp_path, gaz)
        ipc, obs, trad, (start, end) = load_panel_csv(path, gaz)
        assert start == parse_month("2011-01") and end == parse_month("2011-04")
        assert ipc["so-jam"].at(parse_month("2011-03")) == 2.0
        assert trad["rain_mean"]["so-jam"].at(parse_month("2011-02")) == pytest.approx(0.2)

    def test_non_integer_phase_rejected(self, tmp_path):
        gaz = make_gazetteer()
        path = tmp_path / "panel.csv"
        path.write_text("district_id,month,ipc_phase\nso-jam,2011-01,2.5\n")
        with pytest.raises(DataError, match="integer"):
            load_panel_csv(path, gaz)

    def test_unknown_district_rejected(self, tmp_path):
        gaz = make_gazetteer()
        path = tmp_path / "panel.csv"
        path.write_text("district_id,month,ipc_phase\nnowhere,2011-01,2\n")
        with pytest.raises(DataError, match="unknown district"):
            load_panel_csv(path, gaz)
