"""Sequential seasonal imputation of monthly series.

A missing x_t is replaced by the average of two estimates: a same-month
average and a previous-month-plus-mean-seasonal-increment estimate.  For
``t > backward_cutoff`` both use the preceding ``horizon`` years of the
(partially imputed) series; for ``t <= backward_cutoff`` they use the
following ``horizon`` years, skipping cells that are missing in the original
data.  Holes are filled in increasing t, so an imputed value can feed later
estimates.

Time indices ``t`` are 1-based throughout this module.
"""
import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ._io import fmt
from .exceptions import (
    FirstObservationMissing,
    ImputationError,
    InsufficientFuture,
    InsufficientHistory,
    SequentialOrderViolation,
)
from .panel import Panel

SEASON = 12
HORIZON = 5
BACKWARD_CUTOFF = 25

FORWARD = "forward"
BACKWARD = "backward"


class Estimate(NamedTuple):
    x_hat_1: float
    x_hat_2: float
    count_1: int
    count_2: int

    @property
    def imputed(self):
        return (self.x_hat_1 + self.x_hat_2) / 2


def count_Y1(t, horizon=HORIZON, season=SEASON):
    """Number of past same-month values used: min(horizon, floor((t-1)/season))."""
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    return min(horizon, (t - 1) // season)


def count_Y2(t, horizon=HORIZON, season=SEASON):
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    return max(0, min(horizon, (t - 2) // season))


def _get(x, t):
    return x[t - 1]


def estimate_forward(x, t, horizon=HORIZON, season=SEASON):
    """Past-years estimates for a hole at ``t``.

    ``x`` is the current series with NaN where a value is (still) missing;
    values imputed earlier count as observed.
    """
    x = np.asarray(x, dtype=float)
    y1 = count_Y1(t, horizon, season)
    y2 = count_Y2(t, horizon, season)
    if y1 == 0 or y2 == 0:
        raise InsufficientHistory(f"no complete past season (Y1={y1}, Y2={y2})", t=t)
    prev = _get(x, t - 1)
    same = [_get(x, t - season * i) for i in range(1, y1 + 1)]
    diffs = [_get(x, t - season * i) - _get(x, t - season * i - 1) for i in range(1, y2 + 1)]
    if not (np.isfinite(prev) and np.all(np.isfinite(same)) and np.all(np.isfinite(diffs))):
        raise SequentialOrderViolation("an earlier value needed by the estimate is still missing", t=t)
    return Estimate(sum(same) / y1, prev + sum(diffs) / y2, y1, y2)


def estimate_backward(x, t, original_missing=None, horizon=HORIZON, season=SEASON):
    """Following-years estimates for a hole at ``t``.

    Future terms are read only where ``original_missing`` is False; indices
    beyond the end of the series count as missing.  ``x[t-1]`` (the previous
    month) may be an earlier imputed value.
    """
    x = np.asarray(x, dtype=float)
    T = x.size
    if original_missing is None:
        original_missing = ~np.isfinite(x)
    original_missing = np.asarray(original_missing, dtype=bool)
    if t == 1:
        raise FirstObservationMissing("the first observation cannot be imputed", t=t)

    def present(s):
        return s <= T and not original_missing[s - 1]

    sum1 = sum2 = 0.0
    z1 = z2 = 0
    for i in range(1, horizon + 1):
        s = t + season * i
        if present(s):
            sum1 += x[s - 1]
            z1 += 1
            if present(s - 1):
                sum2 += x[s - 1] - x[s - 2]
                z2 += 1
    if z1 == 0 or z2 == 0:
        raise InsufficientFuture(f"no usable following-year values (Z1={z1}, Z2={z2})", t=t)
    prev = _get(x, t - 1)
    if not np.isfinite(prev):
        raise SequentialOrderViolation("previous month is missing and not yet imputed", t=t)
    return Estimate(sum1 / z1, prev + sum2 / z2, z1, z2)


@dataclass(frozen=True)
class ImputationEntry:
    station: str
    t: int
    year: int
    month: int
    method: str
    x_hat_1: float
    x_hat_2: float
    imputed: float
    count_1: int
    count_2: int


@dataclass
class ImputationReport:
    entries: List[ImputationEntry] = field(default_factory=list)

    COLUMNS = ("station", "t", "year", "month", "method", "x_hat_1", "x_hat_2", "imputed", "count_1", "count_2")

    def __len__(self):
        return len(self.entries)

    def to_csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for e in self.entries:
            row = asdict(e)
            w.writerow([fmt(v) if isinstance(v, float) else v for v in (row[c] for c in self.COLUMNS)])
        return buf.getvalue()

    def to_json(self):
        return json.dumps([asdict(e) for e in self.entries], indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls([ImputationEntry(**d) for d in json.loads(text)])


def impute_series(x, backward_cutoff=BACKWARD_CUTOFF, horizon=HORIZON, season=SEASON):
    """Fill every NaN in ``x``; returns ``(filled, [(t, method, Estimate), ...])``."""
    original = ~np.isfinite(np.asarray(x, dtype=float))
    cur = np.array(x, dtype=float)
    log = []
    for t in np.flatnonzero(original) + 1:
        t = int(t)
        if t == 1:
            raise FirstObservationMissing("the first observation is missing; no imputation rule applies", t=t)
        if t <= backward_cutoff:
            est = estimate_backward(cur, t, original, horizon, season)
            method = BACKWARD
        else:
            est = estimate_forward(cur, t, horizon, season)
            method = FORWARD
        cur[t - 1] = est.imputed
        log.append((t, method, est))
    return cur, log


def impute_panel(panel, backward_cutoff=BACKWARD_CUTOFF, horizon=HORIZON, season=SEASON):
    """Impute each station independently; returns ``(Panel, ImputationReport)``."""
    out = np.array(panel.values)
    report = ImputationReport()
    for i, station in enumerate(panel.stations):
        if not panel.missing[i].any():
            continue
        try:
            filled, log = impute_series(panel.values[i], backward_cutoff, horizon, season)
        except ImputationError as exc:
            raise type(exc)(str(exc).split(": ", 1)[-1], station=station.id, t=exc.t) from None
        out[i] = filled
        for t, method, est in log:
            year, month = panel.time.year_month(t)
            report.entries.append(
                ImputationEntry(station.id, t, year, month, method, float(est.x_hat_1), float(est.x_hat_2),
                                float(est.imputed), est.count_1, est.count_2)
            )
    return Panel(panel.stations, panel.time, out), report


class SeasonalImputer(TransformerMixin, BaseEstimator):
    """Sequential seasonal imputation for arrays shaped ``(n_timepoints, n_series)``.

    NaN marks a missing cell.  The transform is stateless; ``fit`` only
    validates and records the report of imputing the training data in
    ``report_``.
    """

    def __init__(self, season=SEASON, horizon=HORIZON, backward_cutoff=BACKWARD_CUTOFF):
        self.season = season
        self.horizon = horizon
        self.backward_cutoff = backward_cutoff

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=float, ensure_all_finite="allow-nan")
        _, self.report_ = self._impute(X)
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=float, ensure_all_finite="allow-nan", reset=False)
        filled, _ = self._impute(X)
        return filled

    def _impute(self, X):
        panel = Panel.from_array(X.T)
        out, report = impute_panel(panel, self.backward_cutoff, self.horizon, self.season)
        return np.array(out.values.T), report

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.input_tags.allow_nan = True
        return tags
