"""District-month panel assembly and distributed-lag forecasting.

The design of the phase regression: district intercepts, six quarterly lags
of the forward-filled phase, six monthly lags (behind a two-month publication
delay) of each traditional indicator and of each retained news factor at
district, province, and country level, plus time-invariant district factors.
Baseline, news-based, and combined variants differ only in which blocks they
keep; the spatial variant appends four-nearest-neighbour averages.

Every dated regressor sits at least three months behind the predicted month,
which is what makes the forecasts issuable three months ahead.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .corpus import District, Gazetteer, STATIC_FACTOR_NAMES
from .errors import ConfigError, DataError, NumericalError
from .months import DEFAULT_PUBLICATION_SCHEDULE, format_month, parse_month, publication_months
from .series import Series
from .tsstats import ols, spearman, _average_ranks

TRADITIONAL_INDICATORS = (
    "conflict_events", "conflict_fatalities", "price_index", "price_yoy",
    "evapotranspiration", "rain_mean", "rain_deviation", "ndvi_mean", "ndvi_deviation",
)

MODEL_KINDS = ("baseline", "news", "combined")


def forward_fill_ipc(observations, end: int | None = None) -> Series:
    """Monthly series carrying the latest published phase at or before each month."""
    obs = sorted(dict(observations).items())
    if not obs:
        raise DataError("no IPC observations to fill")
    start = obs[0][0]
    end = obs[-1][0] if end is None else end
    if end < start:
        raise DataError("fill end precedes first observation")
    values = np.empty(end - start + 1)
    pos = 0
    current = obs[0][1]
    for t in range(start, end + 1):
        while pos < len(obs) and obs[pos][0] <= t:
            current = obs[pos][1]
            pos += 1
        values[t - start] = current
    return Series(start, values)


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "combined"
    spatial: bool = False
    ablated_clusters: frozenset[int] = frozenset()
    lasso: float | None = None
    y_lags: int = 6          # quarterly lags of the phase: t-3m, m=1..y_lags
    factor_lags: int = 6     # monthly lags: t-delay-n, n=1..factor_lags
    delay: int = 2           # publication delay of factors

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.lasso is not None and self.lasso < 0:
            raise ConfigError("lasso penalty must be non-negative")

    @property
    def uses_traditional(self) -> bool:
        return self.kind in ("baseline", "combined")

    @property
    def uses_news(self) -> bool:
        return self.kind in ("news", "combined")


@dataclass
class PanelDataset:
    districts: dict[str, District]
    start: int
    end: int
    publication_months: tuple[int, ...]
    ipc: dict[str, Series]                       # forward-filled monthly phase
    ipc_observed: dict[str, dict[int, float]]    # publication-month phases
    traditional: dict[str, dict[str, Series]]
    factors: dict[str, dict[str, dict[str, Series]]]      # feature -> level -> loc
    factors_raw: dict[str, dict[str, dict[str, Series]]]
    feature_order: tuple[str, ...] = ()
    clusters: dict[str, int] = field(default_factory=dict)
    cluster_labels: dict[int, str] = field(default_factory=dict)
    static_names: tuple[str, ...] = STATIC_FACTOR_NAMES
    _neighbor_cache: dict = field(default_factory=dict, repr=False)

    def country_of(self, district_id: str) -> str:
        return self.districts[district_id].country

    def province_of(self, district_id: str) -> str:
        return self.districts[district_id].province_id

    def neighbors(self, district_id: str, k: int = 4) -> tuple[str, ...]:
        """The k nearest other districts by great-circle centroid distance."""
        key = (district_id, k)
        cached = self._neighbor_cache.get(key)
        if cached is not None:
            return cached
        home = self.districts[district_id]
        ranked = []
        for other_id, other in self.districts.items():
            if other_id == district_id:
                continue
            ranked.append((_haversine_km(home.lat, home.lon, other.lat, other.lon), other_id))
        if len(ranked) < k:
            raise DataError(f"district {district_id!r} has fewer than {k} potential neighbors")
        ranked.sort()
        out = tuple(d for _, d in ranked[:k])
        self._neighbor_cache[key] = out
        return out


def _haversine_km(lat1, lon1, lat2, lon2) -> float:
    rad = math.radians
    dlat = rad(lat2 - lat1)
    dlon = rad(lon2 - lon1)
    a = math.sin(dlat / 2) ** 2 + math.cos(rad(lat1)) * math.cos(rad(lat2)) * math.sin(dlon / 2) ** 2
    return 2.0 * 6371.0088 * math.asin(min(1.0, math.sqrt(a)))


def spatial_average(panel: PanelDataset, district_id: str, series_by_district,
                    k: int = 4) -> Series:
    """Unweighted mean over the district's k nearest neighbours' series."""
    ids = panel.neighbors(district_id, k)
    missing = [d for d in ids if d not in series_by_district]
    if missing:
        raise DataError(f"no series for neighbors {missing} of {district_id!r}")
    series = [series_by_district[d] for d in ids]
    t0 = max(s.start for s in series)
    t1 = min(s.end for s in series)
    if t1 < t0:
        raise DataError(f"neighbor series of {district_id!r} do not overlap")
    stacked = np.stack([s.window(t0, t1) for s in series])
    return Series(t0, stacked.mean(axis=0))


@dataclass(frozen=True)
class Column:
    name: str
    group: str
    offset: int | None = None   # regressor month = t - offset; None for undated
    feature: str | None = None  # news feature behind the column, for ablation


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    columns: tuple[Column, ...]
    rows: tuple[tuple[str, int], ...]      # (district, month) per row
    skipped: tuple[tuple[str, int, str], ...]

    def subset_rows(self, idx) -> "DesignMatrix":
        idx = np.asarray(idx, dtype=int)
        return DesignMatrix(self.X[idx], self.y[idx], self.columns,
                            tuple(self.rows[i] for i in idx), self.skipped)

    def subset_columns(self, idx) -> "DesignMatrix":
        idx = list(idx)
        return DesignMatrix(self.X[:, idx], self.y, tuple(self.columns[i] for i in idx),
                            self.rows, self.skipped)


def _columns_for_spec(panel: PanelDataset, spec: ModelSpec) -> list[Column]:
    cols: list[Column] = []
    for d in sorted(panel.districts):
        cols.append(Column(f"intercept[{d}]", "intercept"))
    for m in range(1, spec.y_lags + 1):
        cols.append(Column(f"y_lag[m={m}]", "y_lag", offset=3 * m))
    if spec.uses_traditional:
        for k in TRADITIONAL_INDICATORS:
            for n in range(1, spec.factor_lags + 1):
                cols.append(Column(f"trad[{k},n={n}]", "traditional", offset=spec.delay + n))
        for s in panel.static_names:
            cols.append(Column(f"static[{s}]", "static"))
    if spec.uses_news:
        for w in panel.feature_order:
            if panel.clusters.get(w) in spec.ablated_clusters:
                continue
            for level in ("district", "province", "country"):
                for n in range(1, spec.factor_lags + 1):
                    cols.append(Column(f"news[{w},{level},n={n}]", "news",
                                       offset=spec.delay + n, feature=w))
    if spec.spatial:
        for m in range(1, spec.y_lags + 1):
            cols.append(Column(f"sp_y[m={m}]", "sp_y", offset=3 * m))
        if spec.uses_traditional:
            for k in TRADITIONAL_INDICATORS:
                for n in range(1, spec.factor_lags + 1):
                    cols.append(Column(f"sp_trad[{k},n={n}]", "sp_traditional",
                                       offset=spec.delay + n))
            for s in panel.static_names:
                cols.append(Column(f"sp_static[{s}]", "sp_static"))
        if spec.uses_news:
            for w in panel.feature_order:
                if panel.clusters.get(w) in spec.ablated_clusters:
                    continue
                for n in range(1, spec.factor_lags + 1):
                    cols.append(Column(f"sp_news[{w},n={n}]", "sp_news",
                                       offset=spec.delay + n, feature=w))
    return cols


def _district_series_requirements(panel: PanelDataset, spec: ModelSpec, d: str):
    """(series, max_offset, min_offset, label) coverage requirements for district d."""
    reqs = [(panel.ipc[d], 3 * spec.y_lags, 0, "ipc")]
    lag_hi = spec.delay + spec.factor_lags
    lag_lo = spec.delay + 1
    if spec.uses_traditional:
        for k in TRADITIONAL_INDICATORS:
            s = panel.traditional.get(k, {}).get(d)
            if s is None:
                return None, f"missing traditional indicator {k}"
            reqs.append((s, lag_hi, lag_lo, f"trad:{k}"))
    if spec.uses_news:
        prov, country = panel.province_of(d), panel.country_of(d)
        for w in panel.feature_order:
            if panel.clusters.get(w) in spec.ablated_clusters:
                continue
            for level, loc in (("district", d), ("province", prov), ("country", country)):
                s = panel.factors.get(w, {}).get(level, {}).get(loc)
                if s is None:
                    return None, f"missing news factor {w}@{level}"
                reqs.append((s, lag_hi, lag_lo, f"news:{w}:{level}"))
    if spec.spatial:
        reqs.append((spatial_average(panel, d, panel.ipc), 3 * spec.y_lags, 0, "sp_ipc"))
        if spec.uses_traditional:
            for k in TRADITIONAL_INDICATORS:
                reqs.append((spatial_average(panel, d, panel.traditional[k]),
                             lag_hi, lag_lo, f"sp_trad:{k}"))
        if spec.uses_news:
            for w in panel.feature_order:
                if panel.clusters.get(w) in spec.ablated_clusters:
                    continue
                reqs.append((spatial_average(panel, d, panel.factors[w]["district"]),
                             lag_hi, lag_lo, f"sp_news:{w}"))
    return reqs, None


def build_design(panel: PanelDataset, spec: ModelSpec, months=None) -> DesignMatrix:
    """Design matrix over all districts and months with complete lag coverage.

    Months lacking any required lag are skipped with an audit record naming
    the blocking series.
    """
    unknown = spec.ablated_clusters - set(panel.clusters.values())
    if unknown:
        raise ConfigError(f"ablated clusters {sorted(unknown)} do not exist")
    cols = _columns_for_spec(panel, spec)
    col_index = {c.name: i for i, c in enumerate(cols)}
    month_filter = None if months is None else set(months)
    blocks, row_keys, skipped = [], [], []
    district_ids = sorted(panel.districts)

    for d in district_ids:
        reqs, err = _district_series_requirements(panel, spec, d)
        if reqs is None:
            skipped.append((d, -1, err))
            continue
        t_lo = panel.start
        t_hi = panel.end
        binding = {}
        for s, max_off, min_off, label in reqs:
            lo, hi = s.start + max_off, s.end + min_off
            if lo > t_lo:
                t_lo, binding["lo"] = lo, label
            if hi < t_hi:
                t_hi, binding["hi"] = hi, label
        t_hi = min(t_hi, panel.ipc[d].end)
        month_list = [t for t in range(panel.start, panel.end + 1)
                      if (month_filter is None or t in month_filter)]
        valid = [t for t in month_list if t_lo <= t <= t_hi]
        for t in month_list:
            if t < t_lo:
                skipped.append((d, t, f"lag unavailable ({binding.get('lo', 'ipc')})"))
            elif t > t_hi:
                skipped.append((d, t, f"series ends ({binding.get('hi', 'ipc')})"))
        if not valid:
            continue
        M = np.asarray(valid)
        block = np.zeros((M.size, len(cols)))
        block[:, col_index[f"intercept[{d}]"]] = 1.0

        def put(name: str, series: Series, offset: int):
            block[:, col_index[name]] = series.values[M - offset - series.start]

        ipc = panel.ipc[d]
        yvals = ipc.values[M - ipc.start]
        for m in range(1, spec.y_lags + 1):
            put(f"y_lag[m={m}]", ipc, 3 * m)
        if spec.uses_traditional:
            for k in TRADITIONAL_INDICATORS:
                s = panel.traditional[k][d]
                for n in range(1, spec.factor_lags + 1):
                    put(f"trad[{k},n={n}]", s, spec.delay + n)
            for sname in panel.static_names:
                block[:, col_index[f"static[{sname}]"]] = panel.districts[d].statics[sname]
        if spec.uses_news:
            prov, country = panel.province_of(d), panel.country_of(d)
            for w in panel.feature_order:
                if panel.clusters.get(w) in spec.ablated_clusters:
                    continue
                for level, loc in (("district", d), ("province", prov), ("country", country)):
                    s = panel.factors[w][level][loc]
                    for n in range(1, spec.factor_lags + 1):
                        put(f"news[{w},{level},n={n}]", s, spec.delay + n)
        if spec.spatial:
            sp_ipc = spatial_average(panel, d, panel.ipc)
            for m in range(1, spec.y_lags + 1):
                put(f"sp_y[m={m}]", sp_ipc, 3 * m)
            if spec.uses_traditional:
                for k in TRADITIONAL_INDICATORS:
                    sp = spatial_average(panel, d, panel.traditional[k])
                    for n in range(1, spec.factor_lags + 1):
                        put(f"sp_trad[{k},n={n}]", sp, spec.delay + n)
                for sname in panel.static_names:
                    vals = [panel.districts[nd].statics[sname] for nd in panel.neighbors(d)]
                    block[:, col_index[f"sp_static[{sname}]"]] = float(np.mean(vals))
            if spec.uses_news:
                for w in panel.feature_order:
                    if panel.clusters.get(w) in spec.ablated_clusters:
                        continue
                    sp = spatial_average(panel, d, panel.factors[w]["district"])
                    for n in range(1, spec.factor_lags + 1):
                        put(f"sp_news[{w},n={n}]", sp, spec.delay + n)
        blocks.append((block, yvals))
        row_keys.extend((d, int(t)) for t in valid)

    if not blocks:
        raise DataError("design matrix has no valid rows")
    X = np.vstack([b for b, _ in blocks])
    y = np.concatenate([v for _, v in blocks])
    return DesignMatrix(X=X, y=y, columns=tuple(cols), rows=tuple(row_keys),
                        skipped=tuple(skipped))


def build_design_row(panel: PanelDataset, spec: ModelSpec, district: str, t: int):
    """Single (district, month) feature row; raises if any lag is missing."""
    design = build_design(panel, spec, months=[t])
    for i, (d, m) in enumerate(design.rows):
        if d == district and m == t:
            return design.X[i], design.columns
    reason = next((r for dd, mm, r in design.skipped if dd == district and mm in (t, -1)), "no row")
    raise DataError(f"no design row for {district!r} at {format_month(t)}: {reason}")


def audit_no_lookahead(design: DesignMatrix, horizon: int = 3):
    """Check every dated regressor sits at least ``horizon`` months in the past.

    Returns (violations, records): offending column names, and one
    (district, month, latest regressor month) record per design row.
    """
    violations = [c.name for c in design.columns
                  if c.offset is not None and c.offset < horizon]
    min_offset = min((c.offset for c in design.columns if c.offset is not None),
                     default=None)
    records = []
    for d, t in design.rows:
        latest = None if min_offset is None else t - min_offset
        records.append((d, t, latest))
        if latest is not None and latest > t - horizon:
            violations.append(f"row {d}@{format_month(t)}")
    return violations, records


def _mgs_keep(X: np.ndarray, tol: float = 1e-8) -> list[int]:
    """Indices of a maximal independent column set, keeping earlier columns."""
    T, p = X.shape
    Q = np.empty((p, T))
    k = 0
    keep = []
    for j in range(p):
        v = X[:, j].astype(float).copy()
        norm0 = np.linalg.norm(v)
        if norm0 == 0.0:
            continue
        for _ in range(2):  # re-orthogonalize for stability
            if k:
                v -= Q[:k].T @ (Q[:k] @ v)
        norm1 = np.linalg.norm(v)
        if norm1 <= tol * norm0:
            continue
        Q[k] = v / norm1
        keep.append(j)
        k += 1
    return keep


@dataclass(frozen=True)
class FitResult:
    spec: ModelSpec
    columns: tuple[Column, ...]
    kept: tuple[int, ...]
    beta: np.ndarray
    dropped: tuple[str, ...]
    rss: float
    nobs: int
    sweeps: int = 0

    def coefficients(self) -> dict[str, float]:
        named = {self.columns[i].name: float(b) for i, b in zip(self.kept, self.beta)}
        for name in (c.name for c in self.columns):
            named.setdefault(name, 0.0)
        return named

    def predict(self, design: DesignMatrix) -> np.ndarray:
        if tuple(c.name for c in design.columns) != tuple(c.name for c in self.columns):
            raise DataError("design columns do not match fitted columns")
        return design.X[:, list(self.kept)] @ self.beta


def soft_threshold(rho: float, lam: float) -> float:
    if rho > lam:
        return rho - lam
    if rho < -lam:
        return rho + lam
    return 0.0


def lasso_cd(X, y, lam: float, penalized, tol: float = 1e-7,
             max_sweeps: int = 100000):
    """Cyclic coordinate descent for (1/2N)*RSS + lam*sum_penalized |beta_std|.

    Penalized columns are standardized to unit variance internally; the
    returned coefficients are on the original scale. Unpenalized coordinates
    get plain least-squares updates.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    N, p = X.shape
    penalized = np.asarray(penalized, dtype=bool)
    scale = np.ones(p)
    sd = X.std(axis=0)
    scale[penalized & (sd > 0)] = sd[penalized & (sd > 0)]
    Xs = X / scale
    col_sq = (Xs * Xs).sum(axis=0) / N
    beta = np.zeros(p)
    r = y.copy()
    for sweep in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            xj = Xs[:, j]
            rho = (xj @ r) / N + col_sq[j] * beta[j]
            new = soft_threshold(rho, lam) / col_sq[j] if penalized[j] else rho / col_sq[j]
            delta = new - beta[j]
            if delta != 0.0:
                r -= xj * delta
                beta[j] = new
                max_delta = max(max_delta, abs(delta))
        if max_delta <= tol:
            resid = y - Xs @ beta
            return beta / scale, float(resid @ resid), sweep
    raise NumericalError(f"lasso did not converge within {max_sweeps} sweeps")


def lasso_kkt_residual(X, y, beta, lam: float, penalized) -> float:
    """Largest violation of the lasso stationarity conditions (standardized scale)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    N, p = X.shape
    penalized = np.asarray(penalized, dtype=bool)
    scale = np.ones(p)
    sd = X.std(axis=0)
    scale[penalized & (sd > 0)] = sd[penalized & (sd > 0)]
    Xs = X / scale
    beta_std = np.asarray(beta, dtype=float) * scale
    g = Xs.T @ (y - Xs @ beta_std) / N
    worst = 0.0
    for j in range(p):
        if not penalized[j]:
            worst = max(worst, abs(g[j]))
        elif beta_std[j] != 0.0:
            worst = max(worst, abs(g[j] - lam * np.sign(beta_std[j])))
        else:
            worst = max(worst, max(abs(g[j]) - lam, 0.0))
    return worst


def fit_design(design: DesignMatrix, spec: ModelSpec,
               on_collinear: str = "error") -> FitResult:
    X, y = design.X, design.y
    if spec.lasso is None:
        if on_collinear == "prune":
            keep = _mgs_keep(X)
            sub = X[:, keep]
            result = ols(sub, y)
        else:
            keep = list(range(X.shape[1]))
            try:
                result = ols(X, y)
            except NumericalError as exc:
                names = [design.columns[i].name for i in _collinear_indices(exc)]
                raise NumericalError(f"rank-deficient design: {names or exc}") from None
        dropped = tuple(design.columns[i].name for i in range(X.shape[1]) if i not in set(keep))
        return FitResult(spec=spec, columns=design.columns, kept=tuple(keep),
                         beta=result.beta, dropped=dropped, rss=result.rss, nobs=result.nobs)
    penalized = np.array([c.group != "intercept" for c in design.columns])
    beta, rss, sweeps = lasso_cd(X, y, spec.lasso, penalized)
    return FitResult(spec=spec, columns=design.columns, kept=tuple(range(X.shape[1])),
                     beta=beta, dropped=(), rss=rss, nobs=X.shape[0], sweeps=sweeps)


def _collinear_indices(exc: NumericalError) -> list[int]:
    text = str(exc)
    if "[" not in text:
        return []
    try:
        return [int(x) for x in text[text.index("[") + 1 : text.index("]")].split(",") if x.strip()]
    except ValueError:
        return []


def fit(spec: ModelSpec, panel: PanelDataset, months=None,
        on_collinear: str = "error") -> FitResult:
    """Estimate the phase regression over the given training months."""
    return fit_design(build_design(panel, spec, months=months), spec, on_collinear)


@dataclass(frozen=True)
class PredictionRow:
    district: str
    month: int
    y_true: float
    y_pred: float
    fold: int


@dataclass(frozen=True)
class CVReport:
    fold_rmse: tuple
    mean_rmse: float
    country_rmse: dict[str, float]
    district_rmse: dict[str, float]
    predictions: tuple[PredictionRow, ...]
    failed_folds: tuple[int, ...] = ()


def month_folds(start: int, end: int, folds: int) -> list[list[int]]:
    """Contiguous equal-length month blocks; the remainder joins the last fold."""
    months_all = list(range(start, end + 1))
    if folds < 2:
        raise ConfigError("need at least 2 folds")
    if folds > len(months_all):
        raise DataError(f"cannot split {len(months_all)} months into {folds} folds")
    base = len(months_all) // folds
    blocks = [months_all[i * base : (i + 1) * base] for i in range(folds)]
    blocks[-1].extend(months_all[folds * base :])
    return blocks


def cross_validate_design(design: DesignMatrix, spec: ModelSpec, panel: PanelDataset,
                          folds: int = 10, on_collinear: str = "prune",
                          min_train_rows: int = 0) -> CVReport:
    blocks = month_folds(panel.start, panel.end, folds)
    row_month = np.array([m for _, m in design.rows])
    fold_rmse: list = []
    failed = []
    predictions: list[PredictionRow] = []
    for i in range(1, folds):
        train_months = {m for b in blocks[:i] for m in b}
        test_months = set(blocks[i])
        train_idx = np.nonzero(np.fromiter((m in train_months for m in row_month), bool,
                                           count=row_month.size))[0]
        test_idx = np.nonzero(np.fromiter((m in test_months for m in row_month), bool,
                                          count=row_month.size))[0]
        if train_idx.size == 0 or test_idx.size == 0 or train_idx.size < min_train_rows:
            warnings.warn(f"fold {i + 1}: no usable training window, "
                          "excluded from the average")
            fold_rmse.append(None)
            failed.append(i + 1)
            continue
        train = design.subset_rows(train_idx)
        test = design.subset_rows(test_idx)
        try:
            result = fit_design(train, spec, on_collinear)
        except (DataError, NumericalError) as exc:
            warnings.warn(f"fold {i + 1}: unusable training window ({exc}), "
                          "excluded from the average")
            fold_rmse.append(None)
            failed.append(i + 1)
            continue
        yhat = test.X[:, list(result.kept)] @ result.beta
        err = yhat - test.y
        fold_rmse.append(float(np.sqrt(np.mean(err**2))))
        for (d, t), yt, yp in zip(test.rows, test.y, yhat):
            predictions.append(PredictionRow(d, t, float(yt), float(yp), i + 1))
    valid = [r for r in fold_rmse if r is not None]
    if not valid:
        raise DataError("cross-validation produced no scored folds")
    by_country: dict[str, list] = {}
    by_district: dict[str, list] = {}
    for p in predictions:
        by_country.setdefault(panel.country_of(p.district), []).append(p)
        by_district.setdefault(p.district, []).append(p)

    def _rmse(rows) -> float:
        e = np.array([r.y_pred - r.y_true for r in rows])
        return float(np.sqrt(np.mean(e**2)))

    return CVReport(
        fold_rmse=tuple(fold_rmse),
        mean_rmse=float(np.mean(valid)),
        country_rmse={c: _rmse(rows) for c, rows in sorted(by_country.items())},
        district_rmse={d: _rmse(rows) for d, rows in sorted(by_district.items())},
        predictions=tuple(predictions),
        failed_folds=tuple(failed),
    )


def cross_validate(spec: ModelSpec, panel: PanelDataset, folds: int = 10,
                   on_collinear: str = "prune", min_train_rows: int = 0) -> CVReport:
    """Expanding-window cross-validation: test fold i trains on folds 1..i-1."""
    design = build_design(panel, spec)
    return cross_validate_design(design, spec, panel, folds, on_collinear,
                                 min_train_rows)


@dataclass(frozen=True)
class AblationResult:
    cluster_id: int
    label: str
    report: CVReport
    mean_delta: float
    district_delta: dict[str, float]


def ablate(panel: PanelDataset, spec: ModelSpec | None = None, folds: int = 10,
           min_train_rows: int = 0):
    """Refit with each news-factor cluster removed; report RMSE increases.

    Returns (combined CVReport, list of AblationResult). Ablated designs are
    column subsets of the combined design, so removing every cluster
    reproduces the baseline column set exactly.
    """
    spec = spec or ModelSpec(kind="combined")
    if spec.ablated_clusters:
        raise ConfigError("pass a spec without pre-ablated clusters")
    design = build_design(panel, spec)
    combined = cross_validate_design(design, spec, panel, folds,
                                     min_train_rows=min_train_rows)
    results = []
    for cid in sorted(set(panel.clusters.values())):
        keep = [i for i, c in enumerate(design.columns)
                if c.feature is None or panel.clusters.get(c.feature) != cid]
        sub = design.subset_columns(keep)
        sub_spec = replace(spec, ablated_clusters=frozenset({cid}))
        report = cross_validate_design(sub, sub_spec, panel, folds,
                                       min_train_rows=min_train_rows)
        deltas = {
            d: report.district_rmse[d] - combined.district_rmse[d]
            for d in combined.district_rmse
            if d in report.district_rmse
        }
        results.append(AblationResult(
            cluster_id=cid,
            label=panel.cluster_labels.get(cid, f"cluster-{cid}"),
            report=report,
            mean_delta=report.mean_rmse - combined.mean_rmse,
            district_delta=deltas,
        ))
    return combined, results


def percentile_ranks(values) -> np.ndarray:
    """rank/(N-1) transform with average ranks for ties."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return np.zeros(v.size)
    return (_average_ranks(v) - 1.0) / (v.size - 1)


@dataclass(frozen=True)
class AssociationRow:
    indicator: str
    feature: str
    spearman_r: float
    n_districts: int


def validate_factors(panel: PanelDataset, min_districts: int = 3):
    """Associate each traditional indicator with its best news factor.

    Districts are summarized by each series' maximum monthly value; the best
    factor maximizes Spearman correlation across districts. Returns
    (association rows, percentile tables) where the percentile tables hold the
    rank-transformed district summaries for plotting.
    """
    district_ids = sorted(panel.districts)
    if len(district_ids) < min_districts:
        raise DataError(f"need at least {min_districts} districts")
    news_summary: dict[str, dict[str, float]] = {}
    for w in panel.feature_order:
        per = panel.factors_raw.get(w, {}).get("district", {})
        summary = {d: float(np.max(per[d].values)) for d in district_ids if d in per}
        if len(summary) >= min_districts:
            news_summary[w] = summary
    rows: list[AssociationRow] = []
    percentiles = {"traditional": {}, "news": {}}
    for k in TRADITIONAL_INDICATORS:
        per = panel.traditional.get(k, {})
        summary = {d: float(np.max(per[d].values)) for d in district_ids if d in per}
        if len(summary) < min_districts or np.ptp(list(summary.values())) == 0.0:
            warnings.warn(f"indicator {k!r}: constant or missing cross-section, skipped")
            continue
        best = None
        for w in sorted(news_summary):
            common = sorted(set(summary) & set(news_summary[w]))
            if len(common) < min_districts:
                continue
            a = [summary[d] for d in common]
            b = [news_summary[w][d] for d in common]
            if np.ptp(b) == 0.0:
                continue
            r = spearman(a, b)
            if best is None or r > best[0] + 1e-12:
                best = (r, w, len(common))
        if best is None:
            warnings.warn(f"indicator {k!r}: no comparable news factor")
            continue
        rows.append(AssociationRow(indicator=k, feature=best[1], spearman_r=best[0],
                                   n_districts=best[2]))
        ds = sorted(summary)
        percentiles["traditional"][k] = dict(zip(ds, percentile_ranks([summary[d] for d in ds])))
        wsum = news_summary[best[1]]
        ds = sorted(wsum)
        percentiles["news"][best[1]] = dict(zip(ds, percentile_ranks([wsum[d] for d in ds])))
    return rows, percentiles


def load_panel_csv(path, gaz: Gazetteer, schedule=DEFAULT_PUBLICATION_SCHEDULE):
    """Read the district-month panel: IPC observations plus traditional indicators.

    The ipc_phase column is populated only at publication months; indicator
    columns must cover a contiguous month range per district.
    """
    ipc_obs: dict[str, dict[int, float]] = {}
    trad_cells: dict[str, dict[str, dict[int, float]]] = {k: {} for k in TRADITIONAL_INDICATORS}
    months_seen: set[int] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"district_id", "month", "ipc_phase"}
        have = set(reader.fieldnames or ())
        if not need <= have:
            raise DataError(f"panel {path} missing columns: {sorted(need - have)}")
        indicators = [k for k in TRADITIONAL_INDICATORS if k in have]
        for lineno, row in enumerate(reader, start=2):
            d = row["district_id"]
            if d not in gaz.districts:
                raise DataError(f"{path}:{lineno}: unknown district {d!r}")
            t = parse_month(row["month"])
            months_seen.add(t)
            phase_txt = (row.get("ipc_phase") or "").strip()
            if phase_txt:
                phase = float(phase_txt)
                if phase != int(phase) or not 1 <= phase <= 5:
                    raise DataError(f"{path}:{lineno}: IPC phase must be an integer 1..5")
                ipc_obs.setdefault(d, {})[t] = phase
            for k in indicators:
                cell = (row.get(k) or "").strip()
                if cell:
                    trad_cells[k].setdefault(d, {})[t] = float(cell)
    if not ipc_obs:
        raise DataError(f"panel {path} holds no IPC observations")
    start, end = min(months_seen), max(months_seen)
    ipc = {d: forward_fill_ipc(obs, end=end) for d, obs in ipc_obs.items()}
    traditional: dict[str, dict[str, Series]] = {}
    for k, per in trad_cells.items():
        traditional[k] = {}
        for d, cells in per.items():
            ms = sorted(cells)
            if ms != list(range(ms[0], ms[0] + len(ms))):
                raise DataError(f"indicator {k!r} for {d!r} is not contiguous")
            traditional[k][d] = Series(ms[0], np.array([cells[m] for m in ms]))
    return ipc, ipc_obs, traditional, (start, end)


def assemble_panel(
    gaz: Gazetteer,
    panel_path,
    factor_series,
    retained: dict[str, int],
    clusters: dict[str, int] | None = None,
    cluster_labels: dict[int, str] | None = None,
    schedule=DEFAULT_PUBLICATION_SCHEDULE,
) -> PanelDataset:
    """Build the modeling panel from file artifacts.

    ``factor_series`` lists NewsFactorSeries at all levels for the retained
    features; ``retained`` maps feature -> differencing order to apply before
    modeling.
    """
    ipc, ipc_obs, traditional, (start, end) = load_panel_csv(panel_path, gaz, schedule)
    districts = {d: gaz.districts[d] for d in ipc}
    raw: dict[str, dict[str, dict[str, Series]]] = {}
    for f in factor_series:
        if f.feature not in retained:
            continue
        raw.setdefault(f.feature, {}).setdefault(f.level, {})[f.location_id] = f.series
    transformed: dict[str, dict[str, dict[str, Series]]] = {}
    for w, order_d in retained.items():
        if w not in raw:
            raise DataError(f"retained feature {w!r} has no factor series")
        transformed[w] = {}
        for level, by_loc in raw[w].items():
            transformed[w][level] = {loc: s.diff(order_d) for loc, s in by_loc.items()}
    return PanelDataset(
        districts=districts,
        start=start,
        end=end,
        publication_months=publication_months(start, end, schedule),
        ipc=ipc,
        ipc_observed=ipc_obs,
        traditional=traditional,
        factors=transformed,
        factors_raw=raw,
        feature_order=tuple(sorted(retained)),
        clusters=dict(clusters or {}),
        cluster_labels=dict(cluster_labels or {}),
    )


def write_predictions_csv(path, reports: dict[str, CVReport]) -> None:
    """Prediction CSV: district_id, month, y_true, y_pred, model."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["district_id", "month", "y_true", "y_pred", "model"])
        for model in sorted(reports):
            for p in reports[model].predictions:
                writer.writerow([p.district, format_month(p.month), repr(p.y_true),
                                 repr(p.y_pred), model])
