"""Multiplicative seasonal ARIMA: CSS estimation, simulation, diagnostics.

Sign conventions (no mean term)::

    phi(B)     = 1 - phi_1 B - ... - phi_p B^p
    theta(B)   = 1 + theta_1 B + ... + theta_q B^q
    Phi(B^S)   = 1 - Phi_1 B^S - ...
    Theta(B^S) = 1 + Theta_1 B^S + ...

    phi(B) Phi(B^S) (1-B)^d (1-B^S)^D x_t = theta(B) Theta(B^S) e_t

Parameter vectors are laid out as ``[ar..., ma..., sar..., sma...]``.
"""
import csv
import io
import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple

import numpy as np
from scipy import optimize, stats
from scipy.signal import lfilter
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._io import fmt
from .exceptions import ConstraintError, DegenerateSeriesError, FitError, LengthError

logger = logging.getLogger(__name__)

ROOT_MARGIN = 1e-6
XTOL = 1e-8
FTOL = 1e-10
MONTH_ABBR = ("jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec")


@dataclass(frozen=True)
class SarimaSpec:
    p: int = 0
    d: int = 0
    q: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0
    S: int = 12

    def __post_init__(self):
        if min(self.p, self.d, self.q, self.P, self.D, self.Q) < 0:
            raise ValueError("SARIMA orders must be nonnegative")
        if self.S < 2:
            raise ValueError(f"season length must be >= 2, got {self.S}")
        if self.d + self.D > 2:
            raise ValueError("only d + D <= 2 is supported")

    @property
    def n_params(self):
        return self.p + self.q + self.P + self.Q

    @classmethod
    def parse(cls, text, S=12):
        """Parse ``"p,d,q,P,D,Q"`` (optionally with a trailing S)."""
        parts = [int(v) for v in text.replace("(", " ").replace(")", " ").replace(",", " ").split()]
        if len(parts) == 6:
            parts.append(S)
        if len(parts) != 7:
            raise ValueError(f"expected p,d,q,P,D,Q[,S], got {text!r}")
        return cls(*parts)

    def __str__(self):
        return f"SARIMA({self.p},{self.d},{self.q})({self.P},{self.D},{self.Q})_{self.S}"


def split_params(spec, params):
    params = np.asarray(params, dtype=float).ravel()
    if params.size != spec.n_params:
        raise ValueError(f"{spec} takes {spec.n_params} parameters, got {params.size}")
    cuts = np.cumsum([spec.p, spec.q, spec.P])
    return np.split(params, cuts)


def _lag_poly(coefs, sign, step=1):
    poly = np.zeros(len(coefs) * step + 1)
    poly[0] = 1.0
    poly[step::step] = sign * np.asarray(coefs, dtype=float)
    return poly


def polynomials(spec, params):
    """Expanded AR and MA lag polynomials (coefficients of B^0, B^1, ...)."""
    ar, ma, sar, sma = split_params(spec, params)
    ar_full = np.convolve(_lag_poly(ar, -1), _lag_poly(sar, -1, spec.S))
    ma_full = np.convolve(_lag_poly(ma, +1), _lag_poly(sma, +1, spec.S))
    return ar_full, ma_full


def _roots_outside(lag_poly, margin=ROOT_MARGIN):
    c = np.trim_zeros(np.asarray(lag_poly, dtype=float), "b")
    if c.size <= 1:
        return True
    return bool(np.all(np.abs(np.roots(c[::-1])) > 1.0 + margin))


def is_feasible(spec, params, margin=ROOT_MARGIN):
    """All four factor polynomials have their roots outside the unit circle."""
    ar, ma, sar, sma = split_params(spec, params)
    # seasonal factors are checked as polynomials in B^S; |z| > 1 iff |z^S| > 1
    return (
        _roots_outside(_lag_poly(ar, -1), margin)
        and _roots_outside(_lag_poly(ma, +1), margin)
        and _roots_outside(_lag_poly(sar, -1), margin)
        and _roots_outside(_lag_poly(sma, +1), margin)
    )


def seasonal_difference(x, d=0, D=0, S=12):
    """Apply (1-B)^d and then (1-B^S)^D; output is ``d + D*S`` shorter."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a 1-D series")
    if x.size <= d + D * S:
        raise LengthError(f"series of length {x.size} too short for d={d}, D={D}, S={S}")
    for _ in range(d):
        x = x[1:] - x[:-1]
    for _ in range(D):
        x = x[S:] - x[:-S]
    return x


def integrate(w, d=0, D=0, S=12):
    """Inverse of :func:`seasonal_difference` with zero pre-sample values."""
    y = np.asarray(w, dtype=float)
    for _ in range(D):
        y = lfilter([1.0], _lag_poly([1.0], -1, S), y)
    for _ in range(d):
        y = np.cumsum(y)
    return y


def css(w, spec, params):
    """Conditional sum of squares of an (already differenced) series.

    Pre-sample observations and innovations are zero.  Returns
    ``(sum of squares, residuals)``.
    """
    if not is_feasible(spec, params):
        raise ConstraintError(f"parameters {np.round(params, 6).tolist()} violate stationarity/invertibility")
    ar_full, ma_full = polynomials(spec, params)
    e = lfilter(ar_full, ma_full, np.asarray(w, dtype=float))
    return float(e @ e), e


def _css_or_inf(theta, w, spec):
    if not is_feasible(spec, theta):
        return np.inf
    ar_full, ma_full = polynomials(spec, theta)
    e = lfilter(ar_full, ma_full, w)
    v = float(e @ e)
    return v if np.isfinite(v) else np.inf


def _initial_simplex(x0, spec, step=0.1):
    k = x0.size
    sim = [x0]
    for i in range(k):
        s = step
        v = x0.copy()
        while s > 1e-6:
            for sign in (1.0, -1.0):
                v = x0.copy()
                v[i] += sign * s
                if is_feasible(spec, v):
                    break
            else:
                s /= 2
                continue
            break
        sim.append(v)
    return np.array(sim)


def _simplex_state(res):
    sim, fs = res.final_simplex
    diam = max(np.linalg.norm(a - b) for a in sim for b in sim)
    fmin = float(np.min(fs))
    rel = (float(np.max(fs)) - fmin) / max(abs(fmin), np.finfo(float).tiny)
    return diam, rel


def _nelder_mead(w, spec, x0, maxfev, max_rounds=6):
    """Simplex search, restarted until diameter < XTOL and relative spread < FTOL."""
    x, iters, step = np.asarray(x0, dtype=float), 0, 0.1
    f0 = _css_or_inf(x, w, spec)
    converged = False
    for _ in range(max_rounds):
        res = optimize.minimize(
            _css_or_inf,
            x,
            args=(w, spec),
            method="Nelder-Mead",
            options={
                "initial_simplex": _initial_simplex(x, spec, step),
                "xatol": XTOL / (2 * np.sqrt(x.size)),
                "fatol": FTOL * 0.1 * (abs(f0) if np.isfinite(f0) else 1.0),
                "maxfev": maxfev,
            },
        )
        iters += int(res.nit)
        x, f0 = res.x, float(res.fun)
        diam, rel = _simplex_state(res)
        if diam < XTOL and rel < FTOL:
            converged = True
            break
        step = max(10 * diam, 1e-3)
    return x, f0, converged, iters


@dataclass
class SarimaFit:
    spec: SarimaSpec
    ar: np.ndarray
    ma: np.ndarray
    sar: np.ndarray
    sma: np.ndarray
    sigma2: float
    css: float
    residuals: np.ndarray
    converged: bool
    iterations: int
    starts: List[Dict] = field(default_factory=list)

    @property
    def params(self):
        return np.concatenate([self.ar, self.ma, self.sar, self.sma])

    def ljung_box(self, lags=24):
        return ljung_box(self.residuals, lags, self.spec.n_params)

    def to_dict(self, lb_lags=24):
        out = {
            "spec": self.spec.__dict__,
            "order": str(self.spec),
            "ar": self.ar.tolist(),
            "ma": self.ma.tolist(),
            "sar": self.sar.tolist(),
            "sma": self.sma.tolist(),
            "sigma2": self.sigma2,
            "css": self.css,
            "nobs": int(self.residuals.size),
            "converged": self.converged,
            "iterations": self.iterations,
        }
        try:
            q, pv = self.ljung_box(lb_lags)
            out["ljung_box"] = {"lags": lb_lags, "df": lb_lags - self.spec.n_params, "statistic": q, "p_value": pv}
        except (ValueError, DegenerateSeriesError) as exc:
            out["ljung_box"] = {"lags": lb_lags, "error": str(exc)}
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def fit_sarima(x, spec, n_starts=5, seed=0, maxfev=4000):
    """Minimize CSS by multi-start Nelder-Mead (zeros + seeded random feasible starts).

    Infeasible points (a root within 1 + 1e-6 of the origin) get an infinite
    objective.  A search that misses the convergence test still returns its
    best point, with ``converged=False``.
    """
    w = seasonal_difference(x, spec.d, spec.D, spec.S)
    k = spec.n_params
    if w.size < 10 * (k + 1):
        raise LengthError(f"{w.size} observations after differencing; {spec} needs >= {10 * (k + 1)}")
    if k == 0:
        value, e = css(w, spec, np.zeros(0))
        return SarimaFit(spec, *split_params(spec, np.zeros(0)), value / w.size, value, e, True, 0)

    rng = np.random.default_rng(seed)
    starts = [np.zeros(k)]
    while len(starts) < n_starts:
        for _ in range(1000):
            cand = rng.uniform(-0.5, 0.5, size=k)
            if is_feasible(spec, cand):
                starts.append(cand)
                break
        else:
            raise FitError(f"no feasible random start found for {spec}")

    best = None
    log = []
    for x0 in starts:
        theta, value, ok, iters = _nelder_mead(w, spec, x0, maxfev)
        log.append({"start": x0.tolist(), "params": theta.tolist(), "css": value, "converged": ok})
        if np.isfinite(value) and (best is None or value < best[1]):
            best = (theta, value, ok, iters)
    if best is None:
        raise FitError(f"every start produced an infeasible fit for {spec}")
    theta, value, ok, iters = best
    if not ok:
        logger.warning("%s: simplex search did not meet the convergence test", spec)
    value, e = css(w, spec, theta)
    return SarimaFit(spec, *split_params(spec, theta), value / w.size, value, e, ok, iters, log)


class SarimaPath(NamedTuple):
    series: np.ndarray
    stationary: np.ndarray  # ARMA series before integration
    innovations: np.ndarray


def simulate_sarima(spec, params, T, seed=0, burn_in=None, sigma2=1.0, return_parts=False):
    """Simulate a SARIMA path of length ``T`` after discarding ``burn_in`` points.

    Integration starts from zero pre-sample values at the beginning of the
    burn-in.  ``return_parts`` returns a :class:`SarimaPath` whose components
    all cover the same post-burn-in window.
    """
    if burn_in is None:
        burn_in = 10 * spec.S
    if burn_in < 10 * spec.S:
        raise ValueError(f"burn_in must be >= 10*S = {10 * spec.S}")
    if not is_feasible(spec, params):
        raise ConstraintError(f"parameters violate stationarity/invertibility for {spec}")
    rng = np.random.default_rng(seed)
    e = np.sqrt(sigma2) * rng.standard_normal(T + burn_in)
    ar_full, ma_full = polynomials(spec, params)
    w = lfilter(ma_full, ar_full, e)
    y = integrate(w, spec.d, spec.D, spec.S)[burn_in:]
    if return_parts:
        return SarimaPath(y, w[burn_in:], e[burn_in:])
    return y


def ljung_box(residuals, lags=24, fitted_params=0):
    """Ljung-Box Q statistic and chi-square p-value on ``lags - fitted_params`` df."""
    e = np.asarray(residuals, dtype=float)
    if lags <= fitted_params:
        raise ValueError(f"lags ({lags}) must exceed fitted_params ({fitted_params})")
    n = e.size
    if lags >= n:
        raise ValueError(f"lags ({lags}) must be < series length ({n})")
    e = e - e.mean()
    denom = float(e @ e)
    if not denom > 0:
        raise DegenerateSeriesError("residuals have zero variance")
    r = np.array([e[k:] @ e[:-k] for k in range(1, lags + 1)]) / denom
    q = n * (n + 2) * np.sum(r**2 / (n - np.arange(1, lags + 1)))
    return float(q), float(stats.chi2.sf(q, lags - fitted_params))


@dataclass
class MonthlyPattern:
    means: np.ndarray  # (12,), index 0 = January; NaN for an absent month
    values: Dict[int, List[tuple]]  # month -> [(year, value), ...]

    def to_csv_text(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["month", "year", "value"])
        for m in range(1, 13):
            for year, v in self.values.get(m, []):
                w.writerow([m, year, fmt(v)])
        return buf.getvalue()

    def to_svg(self, title="Monthly pattern"):
        from .svg import line_chart

        series, styles = [], {}
        for m in range(1, 13):
            vals = self.values.get(m, [])
            if not vals:
                continue
            k = len(vals)
            xs = [m - 1 + 0.1 + 0.8 * (j + 0.5) / k for j in range(k)]
            label = MONTH_ABBR[m - 1]
            series.append((label, xs, [v for _, v in vals]))
            styles[label] = {"stroke": "#888888", "stroke_width": 1, "opacity": 0.6, "hide_legend": True}
        present = [m for m in range(1, 13) if self.values.get(m)]
        series.append(("mean", [m - 0.5 for m in present], [self.means[m - 1] for m in present]))
        styles["mean"] = {"stroke": "#1f4fbf", "stroke_width": 2.5}
        return line_chart(
            series, title=title, xlabel="month", ylabel="value", styles=styles,
            xticks=[(m - 0.5, MONTH_ABBR[m - 1]) for m in range(1, 13)],
        )


def monthly_pattern(x, time):
    """Group a series by calendar month: 12 means plus the per-year values."""
    x = np.asarray(x, dtype=float)
    if x.size != time.length:
        raise ValueError(f"series length {x.size} != time index length {time.length}")
    months, years = time.months, time.years
    values = {m: [(int(y), float(v)) for y, v, mm in zip(years, x, months) if mm == m] for m in range(1, 13)}
    means = np.array([np.mean([v for _, v in values[m]]) if values[m] else np.nan for m in range(1, 13)])
    return MonthlyPattern(means, values)


class SARIMA(BaseEstimator):
    """CSS-estimated SARIMA for a single series (no mean term)."""

    def __init__(self, order=(1, 0, 0), seasonal_order=(0, 1, 1, 12), n_starts=5, random_state=0):
        self.order = order
        self.seasonal_order = seasonal_order
        self.n_starts = n_starts
        self.random_state = random_state

    def fit(self, y, X=None):
        y = np.asarray(y, dtype=float).ravel()
        if not np.all(np.isfinite(y)):
            raise ValueError("series contains NaN or inf")
        self.spec_ = SarimaSpec(*self.order, *self.seasonal_order)
        self.result_ = fit_sarima(y, self.spec_, self.n_starts, self.random_state)
        self.params_ = self.result_.params
        self.sigma2_ = self.result_.sigma2
        self.resid_ = self.result_.residuals
        self.converged_ = self.result_.converged
        return self

    def ljung_box(self, lags=24):
        check_is_fitted(self)
        return self.result_.ljung_box(lags)
