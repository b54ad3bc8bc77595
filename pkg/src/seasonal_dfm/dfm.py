"""Nonstationary seasonal dynamic factor model estimation.

Loadings of the nonstationary factors (r1 nonseasonal, then r2 seasonal) are
the leading eigenvectors of the symmetrized SGCV matrix C(h) at a seasonal
lag h; factors are their projections f_t = L' x_t.  Optional stationary
factors come from ordinary PCA of the residual sample covariance.
"""
import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ._io import atomic_write_text, fmt
from .exceptions import NumericalError, SpecError
from .panel import Panel, TimeIndex, as_matrix, panel_to_csv_text
from .sgcv import SYMMETRIZE, eigen_sequence, eigen_symmetric, sgcv, symmetrize


@dataclass(frozen=True)
class FactorSpec:
    r1: int = 0
    r2: int = 2
    r3: int = 0
    h: int = 12
    d: int = 1
    S: int = 12

    @property
    def r_ns(self):
        return self.r1 + self.r2

    @property
    def r(self):
        return self.r1 + self.r2 + self.r3

    def validate(self, n=None):
        if min(self.r1, self.r2, self.r3) < 0:
            raise SpecError("factor counts must be nonnegative")
        if self.r < 1:
            raise SpecError("need at least one factor")
        if n is not None and self.r > n:
            raise SpecError(f"r1 + r2 + r3 = {self.r} exceeds n = {n}")
        if self.r_ns and self.h < 1:
            raise SpecError(f"PCA lag h must be positive, got {self.h}")
        if self.r2 > 0 and self.h % self.S:
            raise SpecError(f"h={self.h} must be a multiple of S={self.S} when r2 > 0")
        return self


class PCAResult(NamedTuple):
    loadings: np.ndarray
    factors: np.ndarray
    eigenvalues: np.ndarray


@dataclass(frozen=True, eq=False)
class DfmFit:
    loadings: np.ndarray  # (n, r): [L_1 L_2 | L_3]
    factors: np.ndarray  # (r, T)
    common: np.ndarray
    residuals: np.ndarray
    spec: FactorSpec
    explained: np.ndarray  # nested share of ||x||_F^2 after keeping the first i factors
    eigenvalues_ns: np.ndarray = field(default_factory=lambda: np.zeros(0))
    eigenvalues_3: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ids: Optional[tuple] = None
    time: Optional[TimeIndex] = None

    @property
    def loadings_ns(self):
        return self.loadings[:, : self.spec.r_ns]

    @property
    def loadings_3(self):
        return self.loadings[:, self.spec.r_ns :]

    @property
    def factor_names(self):
        return [f"f{j + 1}" for j in range(self.spec.r)]


def canonicalize_signs(vectors, tol=1e-12):
    """Flip columns so each has a nonnegative sum (largest entry positive if the sum is ~0)."""
    v = np.array(vectors, dtype=float)
    for j in range(v.shape[1]):
        s = v[:, j].sum()
        if abs(s) <= tol:
            s = v[np.argmax(np.abs(v[:, j])), j]
        if s < 0:
            v[:, j] = -v[:, j]
    return v


def estimate_nonstationary(panel, spec):
    """Leading r1 + r2 eigenvectors of symmetrized C(h) and the projected factors."""
    x = as_matrix(panel)
    n = x.shape[0]
    if spec.r_ns < 1:
        raise SpecError("r1 + r2 must be >= 1")
    if spec.r_ns > n:
        raise SpecError(f"r1 + r2 = {spec.r_ns} exceeds n = {n}")
    c = symmetrize(sgcv(x, spec.h, spec.d, spec.S).matrix)
    try:
        vals, vecs = eigen_symmetric(c)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition of C({spec.h}) failed: {exc}") from exc
    if not np.all(np.isfinite(vecs)):
        raise NumericalError(f"non-finite eigenvectors for C({spec.h})")
    loadings = canonicalize_signs(vecs[:, : spec.r_ns])
    return PCAResult(loadings, loadings.T @ x, vals[: spec.r_ns])


def estimate_stationary(residuals, r3):
    """PCA of the residual sample covariance (rows centered by their own means)."""
    e = np.asarray(residuals, dtype=float)
    n, T = e.shape
    if r3 < 1:
        raise SpecError("r3 must be >= 1")
    if r3 > n:
        raise SpecError(f"r3 = {r3} exceeds n = {n}")
    centered = e - e.mean(axis=1, keepdims=True)
    if np.max(np.abs(centered), initial=0.0) <= 1e-12:
        raise SpecError("residuals are (numerically) zero; no stationary factor to extract")
    cov = centered @ centered.T / max(T - 1, 1)
    try:
        vals, vecs = eigen_symmetric(symmetrize(cov))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"residual PCA failed: {exc}") from exc
    loadings = canonicalize_signs(vecs[:, :r3])
    return PCAResult(loadings, loadings.T @ centered, vals[:r3])


def _explained(x, loadings, factors):
    total = np.sum(x * x)
    out = np.empty(loadings.shape[1])
    approx = np.zeros_like(x)
    for j in range(loadings.shape[1]):
        approx += np.outer(loadings[:, j], factors[j])
        out[j] = 1.0 - np.sum((x - approx) ** 2) / total if total > 0 else 0.0
    return out


def fit(panel, spec=FactorSpec()):
    """Estimate loadings, factors, common component and residuals."""
    x = as_matrix(panel)
    n, T = x.shape
    spec.validate(n)
    blocks_l, blocks_f = [], []
    ev_ns = ev_3 = np.zeros(0)
    e_ns = x
    if spec.r_ns:
        ns = estimate_nonstationary(x, spec)
        blocks_l.append(ns.loadings)
        blocks_f.append(ns.factors)
        ev_ns = ns.eigenvalues
        e_ns = x - ns.loadings @ ns.factors
    if spec.r3:
        st = estimate_stationary(e_ns, spec.r3)
        blocks_l.append(st.loadings)
        blocks_f.append(st.factors)
        ev_3 = st.eigenvalues
    loadings = np.hstack(blocks_l)
    factors = np.vstack(blocks_f)
    common = loadings @ factors
    ids = tuple(panel.ids) if isinstance(panel, Panel) else None
    time = panel.time if isinstance(panel, Panel) else None
    return DfmFit(
        loadings, factors, common, x - common, spec, _explained(x, loadings, factors), ev_ns, ev_3, ids, time
    )


def refit_residual_diagnostic(fit_result, H=36, k=5, mode=SYMMETRIZE):
    """Lag sweep of SGCV eigenvalue magnitudes on the fit residuals."""
    s = fit_result.spec
    return eigen_sequence(fit_result.residuals, H=H, k=k, d=s.d, S=s.S, mode=mode)


def _matrix_csv(first_header, first_col, names, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*first_header, *names])
    for key, row in zip(first_col, rows):
        w.writerow([*key, *map(fmt, row)])
    return buf.getvalue()


def write_fit(fit_result, outdir, extra=None):
    """Serialize a DfmFit to ``loadings.csv``, ``factors.csv``, ``common.csv``, ``residuals.csv``, ``fit.json``."""
    outdir = Path(outdir)
    n, T = fit_result.common.shape
    ids = fit_result.ids or tuple(f"s{i + 1}" for i in range(n))
    time = fit_result.time or TimeIndex(2008, 1, T)
    names = fit_result.factor_names
    atomic_write_text(outdir / "loadings.csv", _matrix_csv(["station"], [(i,) for i in ids], names, fit_result.loadings))
    atomic_write_text(
        outdir / "factors.csv",
        _matrix_csv(["date", "t"], [(lab, t + 1) for t, lab in enumerate(time.labels())], names, fit_result.factors.T),
    )
    for name, mat in (("common", fit_result.common), ("residuals", fit_result.residuals)):
        atomic_write_text(outdir / f"{name}.csv", panel_to_csv_text(Panel(ids, time, mat)))
    meta = {
        "spec": fit_result.spec.__dict__,
        "factors": names,
        "explained": [float(v) for v in fit_result.explained],
        "eigenvalues_ns": [float(v) for v in fit_result.eigenvalues_ns],
        "eigenvalues_stationary": [float(v) for v in fit_result.eigenvalues_3],
    }
    if extra:
        meta.update(extra)
    atomic_write_text(outdir / "fit.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_loadings(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return [r[0] for r in rows[1:]], np.array([[float(v) for v in r[1:]] for r in rows[1:]])


class SeasonalDFM(TransformerMixin, BaseEstimator):
    """Seasonal DFM as a transformer on arrays shaped ``(n_timepoints, n_series)``.

    Input should already be standardized (see ``PanelStandardizer``).
    ``transform`` returns factors shaped ``(n_timepoints, r)``;
    ``inverse_transform`` maps factors back to the common component.
    """

    def __init__(self, r1=0, r2=2, r3=0, pca_lag=12, d=1, season=12):
        self.r1 = r1
        self.r2 = r2
        self.r3 = r3
        self.pca_lag = pca_lag
        self.d = d
        self.season = season

    def _spec(self):
        return FactorSpec(self.r1, self.r2, self.r3, self.pca_lag, self.d, self.season)

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=float)
        self.fit_ = fit(X.T, self._spec())
        self.loadings_ = self.fit_.loadings
        self.explained_ = self.fit_.explained
        e_ns = X.T - self.fit_.loadings_ns @ (self.fit_.loadings_ns.T @ X.T)
        self.residual_mean_ = e_ns.mean(axis=1)
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=float, reset=False).T
        l_ns, l_3 = self.fit_.loadings_ns, self.fit_.loadings_3
        f_ns = l_ns.T @ X
        parts = [f_ns]
        if l_3.shape[1]:
            e = X - l_ns @ f_ns
            parts.append(l_3.T @ (e - self.residual_mean_[:, None]))
        return np.vstack(parts).T

    def inverse_transform(self, F):
        check_is_fitted(self)
        return np.asarray(F, dtype=float) @ self.loadings_.T
