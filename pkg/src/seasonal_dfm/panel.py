"""Monthly panel data model, CSV ingestion and standardization.

Panels are stored station-major: ``values`` has shape ``(n, T)`` and column
``t - 1`` holds the observation at (1-based) time ``t``.  Missing cells hold
NaN and are flagged in ``missing``.
"""
import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ._io import atomic_write_text, fmt
from .exceptions import (
    DegenerateSeriesError,
    DuplicateTimestamp,
    GapInTimeIndex,
    MissingDataError,
    ParseError,
    ShapeError,
)

_DATE_RE = re.compile(r"^\s*(\d{4})-(\d{1,2})\s*$")


@dataclass(frozen=True)
class TimeIndex:
    start_year: int
    start_month: int
    length: int

    def __post_init__(self):
        if not 1 <= self.start_month <= 12:
            raise ValueError(f"start_month must be in 1..12, got {self.start_month}")
        if self.length < 1:
            raise ValueError(f"length must be positive, got {self.length}")

    def year_month(self, t):
        """Return the ``(year, month)`` of 1-based time ``t``."""
        if not 1 <= t <= self.length:
            raise IndexError(f"t={t} outside 1..{self.length}")
        k = self.start_month - 1 + t - 1
        return self.start_year + k // 12, k % 12 + 1

    def to_t(self, year, month):
        t = (year - self.start_year) * 12 + (month - self.start_month) + 1
        if not 1 <= t <= self.length:
            raise IndexError(f"{year:04d}-{month:02d} outside the index")
        return t

    def labels(self):
        return [f"{y:04d}-{m:02d}" for y, m in map(self.year_month, range(1, self.length + 1))]

    @property
    def months(self):
        """Calendar month (1..12) of every time point."""
        return (np.arange(self.length) + self.start_month - 1) % 12 + 1

    @property
    def years(self):
        return self.start_year + (np.arange(self.length) + self.start_month - 1) // 12


@dataclass(frozen=True)
class StationMeta:
    id: str
    name: str = ""
    latitude: Optional[float] = None
    longitude: Optional[float] = None

    def __post_init__(self):
        if self.latitude is not None and not -90 <= self.latitude <= 90:
            raise ValueError(f"station {self.id}: latitude {self.latitude} out of range")
        if self.longitude is not None and not -180 <= self.longitude <= 180:
            raise ValueError(f"station {self.id}: longitude {self.longitude} out of range")


@dataclass(frozen=True, eq=False)
class Panel:
    stations: tuple
    time: TimeIndex
    values: np.ndarray
    missing: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise ShapeError(f"values must be 2-D (n, T), got shape {values.shape}")
        n, T = values.shape
        if n < 1 or T < 1:
            raise ShapeError("panel needs n >= 1 and T >= 1")
        stations = tuple(s if isinstance(s, StationMeta) else StationMeta(str(s)) for s in self.stations)
        if len(stations) != n:
            raise ShapeError(f"{len(stations)} stations for {n} rows")
        ids = [s.id for s in stations]
        if len(set(ids)) != n:
            raise ShapeError("station ids must be unique")
        if self.time.length != T:
            raise ShapeError(f"time index length {self.time.length} != T={T}")
        if self.missing is None:
            missing = ~np.isfinite(values)
        else:
            missing = np.array(self.missing, dtype=bool)
            if missing.shape != values.shape:
                raise ShapeError("missing mask shape differs from values")
            if not np.all(np.isfinite(values[~missing])):
                raise ShapeError("non-finite value in a cell not flagged missing")
        values[missing] = np.nan
        values.setflags(write=False)
        missing.setflags(write=False)
        object.__setattr__(self, "stations", stations)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "missing", missing)

    @classmethod
    def from_array(cls, values, ids=None, start_year=2008, start_month=1):
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[None, :]
        if ids is None:
            ids = [f"s{i + 1}" for i in range(values.shape[0])]
        return cls(tuple(ids), TimeIndex(start_year, start_month, values.shape[1]), values)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def T(self):
        return self.values.shape[1]

    @property
    def ids(self):
        return [s.id for s in self.stations]

    @property
    def has_missing(self):
        return bool(self.missing.any())

    def with_values(self, values):
        """Same stations and time index, new (n, T) values."""
        return Panel(self.stations, self.time, values)

    def equals(self, other):
        return (
            self.stations == other.stations
            and self.time == other.time
            and np.array_equal(self.missing, other.missing)
            and np.array_equal(self.values, other.values, equal_nan=True)
        )


@dataclass(frozen=True)
class StandardizationParams:
    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.sds) <= 0):
            raise ValueError("standard deviations must be positive")


@dataclass(frozen=True)
class CsvSchema:
    date_column: str = "date"
    na_values: Sequence[str] = ("", "na")
    delimiter: str = ","


def as_matrix(data, allow_missing=False):
    """(n, T) float matrix from a Panel or array-like."""
    if isinstance(data, Panel):
        values, missing = data.values, data.missing
    else:
        values = np.asarray(data, dtype=float)
        if values.ndim != 2:
            raise ShapeError(f"expected a 2-D (n, T) matrix, got shape {values.shape}")
        missing = ~np.isfinite(values)
    if not allow_missing and missing.any():
        i, t = np.argwhere(missing)[0]
        raise MissingDataError(f"panel has {int(missing.sum())} missing cells (first at row {i}, t={t + 1})")
    return values


def _parse_date(text, line):
    m = _DATE_RE.match(text)
    if not m:
        raise ParseError(f"bad date {text!r}, expected YYYY-MM", row=line, column="date")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise ParseError(f"bad month in {text!r}", row=line, column="date")
    return year, month


def read_csv_text(text, schema=CsvSchema(), source="<string>"):
    na = {v.lower() for v in schema.na_values}
    reader = csv.reader(io.StringIO(text), delimiter=schema.delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError(f"{source}: empty file") from None
    header = [h.strip() for h in header]
    if not header or header[0].lower() != schema.date_column.lower():
        raise ParseError(f"{source}: first column must be {schema.date_column!r}", row=1)
    ids = header[1:]
    if not ids:
        raise ParseError(f"{source}: no station columns", row=1)
    if len(set(ids)) != len(ids):
        raise ParseError(f"{source}: duplicate station ids in header", row=1)

    dates, rows, seen = [], [], set()
    for line, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(rec)}", row=line)
        ym = _parse_date(rec[0], line)
        if ym in seen:
            raise DuplicateTimestamp(f"{source}: line {line}: duplicate month {rec[0].strip()}")
        seen.add(ym)
        if dates:
            if ym[0] * 12 + ym[1] != dates[-1][0] * 12 + dates[-1][1] + 1:
                raise GapInTimeIndex(
                    f"{source}: line {line}: {rec[0].strip()} does not follow "
                    f"{dates[-1][0]:04d}-{dates[-1][1]:02d}"
                )
        row = []
        for col, cell in zip(ids, rec[1:]):
            cell = cell.strip()
            if cell.lower() in na:
                row.append(math.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"cannot parse {cell!r}", row=line, column=col) from None
            if not math.isfinite(v):
                raise ParseError(f"non-finite value {cell!r}", row=line, column=col)
            row.append(v)
        dates.append(ym)
        rows.append(row)
    if not rows:
        raise ParseError(f"{source}: no data rows")
    values = np.array(rows, dtype=float).T
    return Panel(tuple(ids), TimeIndex(dates[0][0], dates[0][1], len(dates)), values)


def load_csv(path, schema=CsvSchema()):
    """Read a wide ``date,<id_1>,...,<id_n>`` monthly CSV into a Panel.

    Empty or ``NA`` cells (case-insensitive) become missing.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    return read_csv_text(text, schema, source=str(path))


def panel_to_csv_text(panel):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", *panel.ids])
    for j, label in enumerate(panel.time.labels()):
        w.writerow([label, *("NA" if panel.missing[i, j] else fmt(panel.values[i, j]) for i in range(panel.n))])
    return buf.getvalue()


def write_csv(panel, path):
    atomic_write_text(path, panel_to_csv_text(panel))


def load_station_meta(path):
    """Read the optional ``id,name,latitude,longitude`` sidecar into {id: StationMeta}."""
    out = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for line, rec in enumerate(csv.DictReader(fh), start=2):
            try:
                lat = float(rec["latitude"]) if rec.get("latitude", "").strip() else None
                lon = float(rec["longitude"]) if rec.get("longitude", "").strip() else None
                meta = StationMeta(rec["id"].strip(), (rec.get("name") or "").strip(), lat, lon)
            except (KeyError, ValueError) as exc:
                raise ParseError(str(exc), row=line) from None
            if meta.id in out:
                raise ParseError(f"duplicate station id {meta.id!r}", row=line)
            out[meta.id] = meta
    return out


def attach_meta(panel, meta):
    stations = tuple(meta.get(s.id, s) for s in panel.stations)
    return Panel(stations, panel.time, panel.values, panel.missing)


def standardize(panel):
    """Center each row by its mean and scale by its sample sd (ddof=1)."""
    if panel.has_missing:
        raise MissingDataError(f"cannot standardize: {int(panel.missing.sum())} missing cells")
    x = panel.values
    if panel.T < 2:
        raise DegenerateSeriesError("need T >= 2 to estimate a standard deviation")
    means = x.mean(axis=1)
    means = means + (x - means[:, None]).mean(axis=1)  # second pass trims round-off
    sds = x.std(axis=1, ddof=1)
    bad = np.flatnonzero(~(sds > 0))
    if bad.size:
        raise DegenerateSeriesError(f"station {panel.ids[bad[0]]!r} has zero variance")
    z = (x - means[:, None]) / sds[:, None]
    return panel.with_values(z), StandardizationParams(means, sds)


def destandardize(panel, params):
    means = np.asarray(params.means, dtype=float)
    sds = np.asarray(params.sds, dtype=float)
    if means.shape != (panel.n,) or sds.shape != (panel.n,):
        raise ShapeError(f"params for {means.shape} series, panel has n={panel.n}")
    return panel.with_values(panel.values * sds[:, None] + means[:, None])


class PanelStandardizer(TransformerMixin, BaseEstimator):
    """Per-series standardization for arrays shaped ``(n_timepoints, n_series)``.

    Same arithmetic as :func:`standardize` (sample sd with ddof=1), exposed as a
    transformer so it composes with sklearn pipelines.
    """

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=float)
        if X.shape[0] < 2:
            raise DegenerateSeriesError("need at least 2 time points")
        self.mean_ = X.mean(axis=0)
        self.scale_ = X.std(axis=0, ddof=1)
        bad = np.flatnonzero(~(self.scale_ > 0))
        if bad.size:
            raise DegenerateSeriesError(f"series {bad[0]} has zero variance")
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=float, reset=False)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self)
        X = np.asarray(X, dtype=float)
        return X * self.scale_ + self.mean_
