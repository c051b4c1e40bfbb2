"""Food-crisis outbreak definition, threshold classification, and Pareto sweeps.

An outbreak starts at a publication period whose phase reaches 3 or more,
stays there for the following period, and was at 2 or below the period
before. A fitted model's real-valued phase forecasts become a binary
classifier through a lower/upper threshold pair (l, u).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class OutbreakEvent:
    district: str
    start: int  # period index or period month
    severity: float


@dataclass(frozen=True)
class ThresholdClassifier:
    l: float
    u: float

    def __post_init__(self):
        if not (1.0 <= self.l <= 5.0 and 1.0 <= self.u <= 5.0):
            raise DataError(f"thresholds ({self.l}, {self.u}) outside [1, 5]")


@dataclass(frozen=True)
class ParetoPoint:
    l: float
    u: float
    precision: float
    recall: float


@dataclass(frozen=True)
class Score:
    matched: int
    n_predicted: int
    n_actual: int

    @property
    def precision(self) -> float | None:
        return None if self.n_predicted == 0 else self.matched / self.n_predicted

    @property
    def recall(self) -> float | None:
        return None if self.n_actual == 0 else self.matched / self.n_actual


def detect_outbreaks(phases, periods=None, district: str = "") -> list[OutbreakEvent]:
    """Outbreak starts in a period-indexed phase series.

    An event starts at t when phase(t) >= 3, phase(t+1) >= 3 and
    phase(t-1) <= 2; severity is the maximum phase over the run of
    consecutive periods at 3 or more.
    """
    values = np.asarray(phases, dtype=float)
    if periods is None:
        periods = list(range(values.size))
    periods = list(periods)
    if len(periods) != values.size:
        raise DataError("periods and phases must have equal length")
    if values.size < 3:
        warnings.warn("phase series shorter than 3 periods; no outbreak detectable")
        return []
    events = []
    for t in range(1, values.size - 1):
        window = values[t - 1 : t + 2]
        if np.any(np.isnan(window)):
            continue
        if values[t] >= 3.0 and values[t + 1] >= 3.0 and values[t - 1] <= 2.0:
            run_end = t
            while run_end + 1 < values.size and not math.isnan(values[run_end + 1]) \
                    and values[run_end + 1] >= 3.0:
                run_end += 1
            severity = float(np.max(values[t : run_end + 1]))
            events.append(OutbreakEvent(district=district, start=periods[t], severity=severity))
    return events


def classify(predictions, l: float, u: float, periods=None,
             district: str = "") -> list[OutbreakEvent]:
    """Predicted outbreak starts: pred(t+1) >= u, pred(t) >= u, pred(t-1) <= l."""
    values = np.asarray(predictions, dtype=float)
    if periods is None:
        periods = list(range(values.size))
    periods = list(periods)
    if len(periods) != values.size:
        raise DataError("periods and predictions must have equal length")
    events = []
    for t in range(1, values.size - 1):
        window = values[t - 1 : t + 2]
        if np.any(np.isnan(window)):
            continue
        if values[t] >= u and values[t + 1] >= u and values[t - 1] <= l:
            run_end = t
            while run_end + 1 < values.size and not math.isnan(values[run_end + 1]) \
                    and values[run_end + 1] >= u:
                run_end += 1
            severity = float(np.max(values[t : run_end + 1]))
            events.append(OutbreakEvent(district=district, start=periods[t], severity=severity))
    return events


def match_events(predicted, actual, window: int = 0, grid=None):
    """One-to-one earliest-first pairs of (district, predicted start, actual start).

    Events match when they share a district and their start periods differ by
    at most ``window`` positions (0 = exact). When ``grid`` gives the ordered
    publication periods, the gap counts grid steps rather than raw start
    differences.
    """
    pos = {p: i for i, p in enumerate(grid)} if grid is not None else None

    def gap(p: int, a: int) -> int:
        if pos is not None and p in pos and a in pos:
            return pos[p] - pos[a]
        return p - a

    by_district_pred: dict[str, list[int]] = {}
    by_district_act: dict[str, list[int]] = {}
    for e in predicted:
        by_district_pred.setdefault(e.district, []).append(e.start)
    for e in actual:
        by_district_act.setdefault(e.district, []).append(e.start)
    pairs = []
    for district in sorted(by_district_act):
        preds = sorted(by_district_pred.get(district, []))
        taken = [False] * len(preds)
        for a in sorted(by_district_act[district]):
            for i, p in enumerate(preds):
                if not taken[i] and abs(gap(p, a)) <= window:
                    taken[i] = True
                    pairs.append((district, p, a))
                    break
    return pairs


def score(predicted, actual, window: int = 0, grid=None) -> Score:
    """Precision/recall of predicted against actual outbreak starts.

    With no predicted events precision is undefined and reported as None.
    """
    predicted = list(predicted)
    actual = list(actual)
    pairs = match_events(predicted, actual, window, grid)
    return Score(matched=len(pairs), n_predicted=len(predicted), n_actual=len(actual))


def threshold_grid(lo: float = 1.0, hi: float = 5.0, step: float = 0.1):
    """Exact threshold ladder lo..hi at the given step (tenths by default)."""
    n = int(round((hi - lo) / step))
    return [round(lo + k * step, 10) for k in range(n + 1)]


def sweep_pareto(predictions_by_district, actual_events, grid=None,
                 window: int = 0, period_grid=None,
                 require_gap: bool = True) -> list[ParetoPoint]:
    """Pareto front of (precision, recall) over the (l, u) threshold grid.

    ``predictions_by_district`` maps district -> (periods, values). Only
    pairs with l < u describe a rise out of the pre-crisis band and are swept
    (disable via ``require_gap``). Grid points predicting no events carry
    undefined precision and never reach the front. Among classifiers with
    identical scores the lexicographically smallest (l, u) survives; the
    front is sorted by recall.
    """
    levels = grid if grid is not None else threshold_grid()
    points = []
    for l in levels:
        for u in levels:
            if require_gap and l >= u:
                continue
            predicted = []
            for district, (periods, values) in sorted(predictions_by_district.items()):
                predicted.extend(classify(values, l, u, periods, district))
            s = score(predicted, actual_events, window, grid=period_grid)
            if s.precision is None or s.recall is None:
                continue
            points.append(ParetoPoint(l=l, u=u, precision=s.precision, recall=s.recall))
    return pareto_filter(points)


def pareto_filter(points) -> list[ParetoPoint]:
    """Non-dominated subset via a recall-ordered sweep."""
    dedup: dict[tuple[float, float], ParetoPoint] = {}
    for p in points:
        key = (p.precision, p.recall)
        prior = dedup.get(key)
        if prior is None or (p.l, p.u) < (prior.l, prior.u):
            dedup[key] = p
    ordered = sorted(dedup.values(), key=lambda p: (-p.recall, -p.precision, p.l, p.u))
    front = []
    best_precision = -np.inf
    for p in ordered:
        if p.precision > best_precision:
            front.append(p)
            best_precision = p.precision
    return sorted(front, key=lambda p: p.recall)


def recall_at_precision(front, target: float = 0.80) -> tuple[float, float, float]:
    """(l, u, recall) of the front point maximizing recall at precision >= target."""
    if not front:
        raise DataError("empty Pareto front")
    eligible = [p for p in front if p.precision >= target]
    if not eligible:
        best = max(p.precision for p in front)
        raise DataError(
            f"no classifier reaches precision {target:.2f}; best achievable {best:.4f}"
        )
    pick = max(eligible, key=lambda p: (p.recall, p.precision, -p.u, -p.l))
    return pick.l, pick.u, pick.recall


def expert_baseline(projections_by_district, actual_events, window: int = 0,
                    period_grid=None) -> Score:
    """Score expert phase projections under the outbreak rule."""
    predicted = []
    for district, (periods, values) in sorted(projections_by_district.items()):
        arr = np.asarray(values, dtype=float)
        if np.all(np.isnan(arr)):
            continue
        predicted.extend(detect_outbreaks(arr, periods, district))
    return score(predicted, actual_events, window, grid=period_grid)


def write_events_csv(path, rows) -> None:
    """Events CSV: district_id, period, kind, model, severity."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["district_id", "period", "kind", "model", "severity"])
        for district, period, kind, model, severity in rows:
            writer.writerow([district, period, kind, model, repr(float(severity))])


def write_front_csv(path, fronts) -> None:
    """Front CSV: l, u, precision, recall, model. ``fronts`` maps model -> points."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["l", "u", "precision", "recall", "model"])
        for model in sorted(fronts):
            for p in fronts[model]:
                writer.writerow([repr(p.l), repr(p.u), repr(p.precision),
                                 repr(p.recall), model])
