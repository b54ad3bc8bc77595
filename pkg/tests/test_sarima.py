import json

import numpy as np
import pytest

from oracles import arma_residuals_oracle, ljung_box_oracle
from seasonal_dfm.exceptions import (
    ConstraintError,
    DegenerateSeriesError,
    FitError,
    LengthError,
)
from seasonal_dfm.panel import TimeIndex
from seasonal_dfm.sarima import (
    SARIMA,
    SarimaSpec,
    css,
    fit_sarima,
    integrate,
    is_feasible,
    ljung_box,
    monthly_pattern,
    polynomials,
    seasonal_difference,
    simulate_sarima,
)

AIRLINE_AR = SarimaSpec(1, 0, 0, 0, 1, 1, 12)


# -- seasonal_difference ---------------------------------------------------

def test_first_difference_of_trend_is_ones():
    x = np.arange(1.0, 51.0)
    np.testing.assert_array_equal(seasonal_difference(x, d=1), np.ones(49))


def test_seasonal_difference_kills_period_12(rng):
    x = np.tile(rng.standard_normal(12), 17)
    w = seasonal_difference(x, D=1)
    assert w.shape == (192,)
    assert np.max(np.abs(w)) == 0.0


def test_seasonal_difference_too_short():
    with pytest.raises(LengthError):
        seasonal_difference(np.ones(12), D=1)
    with pytest.raises(LengthError):
        seasonal_difference(np.ones(13), d=1, D=1)


def test_seasonal_difference_linear(rng):
    x, y = rng.standard_normal((2, 120))
    a, b = 1.7, -0.3
    lhs = seasonal_difference(a * x + b * y, d=1, D=1)
    rhs = a * seasonal_difference(x, d=1, D=1) + b * seasonal_difference(y, d=1, D=1)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


@pytest.mark.parametrize("d,D", [(0, 1), (1, 0), (1, 1), (2, 0), (0, 2)])
def test_integrate_inverts_difference(rng, d, D):
    w = rng.standard_normal(150)
    y = integrate(w, d, D)
    np.testing.assert_allclose(seasonal_difference(y, d, D), w[d + 12 * D:], atol=1e-9)


# -- spec and polynomials --------------------------------------------------

def test_spec_parse_and_two_factor_orders():
    assert SarimaSpec.parse("2,0,0,0,1,1") == SarimaSpec(2, 0, 0, 0, 1, 1, 12)
    assert SarimaSpec.parse("(1,0,0)(0,1,1)") == AIRLINE_AR
    assert SarimaSpec(2, 0, 0, 0, 1, 1).n_params == 3
    assert str(AIRLINE_AR) == "SARIMA(1,0,0)(0,1,1)_12"
    with pytest.raises(ValueError):
        SarimaSpec(0, 2, 0, 0, 1, 0)
    with pytest.raises(ValueError):
        SarimaSpec(S=1)


def test_polynomial_signs():
    ar, ma = polynomials(SarimaSpec(1, 0, 1, 1, 0, 1, 4), [0.5, 0.3, 0.2, -0.4])
    np.testing.assert_allclose(ar, np.convolve([1, -0.5], [1, 0, 0, 0, -0.2]))
    np.testing.assert_allclose(ma, np.convolve([1, 0.3], [1, 0, 0, 0, -0.4]))


def test_feasibility():
    spec = SarimaSpec(2, 0, 0)
    assert is_feasible(spec, [0.5, 0.3])
    assert not is_feasible(spec, [0.7, 0.4])  # phi_1 + phi_2 > 1
    assert not is_feasible(SarimaSpec(0, 0, 1), [1.0])
    assert not is_feasible(SarimaSpec(0, 0, 0, 1, 0, 0), [1.0 - 1e-8])


# -- css ---------------------------------------------------------------------

def test_css_empty_model_is_identity(rng):
    x = rng.standard_normal(60)
    value, e = css(x, SarimaSpec(), [])
    np.testing.assert_array_equal(e, x)
    assert value == pytest.approx(np.sum(x**2), rel=1e-14)


def test_css_matches_oracle(rng):
    spec = SarimaSpec(2, 0, 1, 1, 0, 1, 4)
    params = [0.4, -0.2, 0.3, 0.25, -0.5]
    w = rng.standard_normal(80)
    ar, ma = polynomials(spec, params)
    expected = np.array(arma_residuals_oracle(list(w), list(ar), list(ma)))
    value, e = css(w, spec, params)
    np.testing.assert_allclose(e, expected, atol=1e-12)
    assert value == pytest.approx(float(expected @ expected), rel=1e-12)


def test_css_inverts_ar1_recursion(rng):
    phi = 0.7
    nu = rng.standard_normal(300)
    x = np.zeros(300)
    x[0] = 5.0  # arbitrary start: the effect is confined to e_0
    for t in range(1, 300):
        x[t] = phi * x[t - 1] + nu[t]
    _, e = css(x, SarimaSpec(1, 0, 0), [phi])
    np.testing.assert_allclose(e[1:], nu[1:], atol=1e-12)


def test_css_continuous(rng):
    x = simulate_sarima(SarimaSpec(1, 0, 0), [0.5], 200, seed=3)
    a, _ = css(x, SarimaSpec(1, 0, 0), [0.5])
    b, _ = css(x, SarimaSpec(1, 0, 0), [0.5 + 1e-8])
    assert abs(a - b) < 1e-4 * abs(a)


def test_css_rejects_infeasible():
    with pytest.raises(ConstraintError):
        css(np.ones(50), SarimaSpec(1, 0, 0), [1.2])


def test_css_local_optimality():
    spec = SarimaSpec(1, 0, 0, 0, 0, 1, 12)
    truth = np.array([0.6, -0.5])
    w = simulate_sarima(spec, truth, 3000, seed=11)
    base, _ = css(w, spec, truth)
    rng = np.random.default_rng(5)
    tried = 0
    while tried < 100:
        u = rng.standard_normal(2)
        cand = truth + 0.1 * u / np.linalg.norm(u)
        if not is_feasible(spec, cand):
            continue
        tried += 1
        assert css(w, spec, cand)[0] > base


# -- fit ---------------------------------------------------------------------

def test_fit_recovers_seasonal_ar_model():
    x = simulate_sarima(AIRLINE_AR, [0.6, -0.5], 2000, seed=1)
    fit = fit_sarima(x, AIRLINE_AR)
    assert fit.converged
    assert abs(fit.ar[0] - 0.6) < 0.05
    assert abs(fit.sma[0] + 0.5) < 0.05
    assert fit.sigma2 == pytest.approx(fit.css / fit.residuals.size)
    assert fit.residuals.size == 2000 - 12
    assert is_feasible(AIRLINE_AR, fit.params, margin=1e-6)


def test_fit_two_ar_terms():
    spec = SarimaSpec(2, 0, 0, 0, 1, 1, 12)
    x = simulate_sarima(spec, [0.5, 0.2, -0.4], 2000, seed=2)
    fit = fit_sarima(x, spec)
    assert fit.converged
    np.testing.assert_allclose(fit.params, [0.5, 0.2, -0.4], atol=0.08)


def test_fit_beats_every_start():
    x = simulate_sarima(AIRLINE_AR, [0.6, -0.5], 600, seed=4)
    fit = fit_sarima(x, AIRLINE_AR)
    assert len(fit.starts) == 5
    assert fit.starts[0]["start"] == [0.0, 0.0]
    assert fit.css <= min(s["css"] for s in fit.starts) + 1e-12


def test_white_noise_sigma2(rng):
    x = rng.standard_normal(500)
    x -= x.mean()
    fit = fit_sarima(x, SarimaSpec())
    assert abs(fit.sigma2 - np.var(x)) < 1e-10
    # no mean term: on raw data sigma2 is the uncentered second moment
    y = x + 3.0
    assert fit_sarima(y, SarimaSpec()).sigma2 == pytest.approx(np.mean(y**2), rel=1e-12)


def test_fit_too_short():
    with pytest.raises(LengthError):
        fit_sarima(np.arange(40.0), AIRLINE_AR)


def test_fit_no_feasible_start():
    # with 24 MA coefficients a random uniform(-0.5, 0.5) draw is essentially never invertible
    spec = SarimaSpec(0, 0, 24)
    x = np.random.default_rng(0).standard_normal(400)
    with pytest.raises(FitError):
        fit_sarima(x, spec, n_starts=2)


def test_fit_json_roundtrip():
    x = simulate_sarima(AIRLINE_AR, [0.6, -0.5], 400, seed=7)
    d = json.loads(fit_sarima(x, AIRLINE_AR).to_json())
    assert d["order"] == "SARIMA(1,0,0)(0,1,1)_12"
    assert set(d) >= {"ar", "ma", "sar", "sma", "sigma2", "css", "converged", "iterations", "ljung_box"}
    assert d["ljung_box"]["lags"] == 24 and d["ljung_box"]["df"] == 22


def test_fit_deterministic():
    x = simulate_sarima(AIRLINE_AR, [0.6, -0.5], 400, seed=8)
    a, b = fit_sarima(x, AIRLINE_AR, seed=3), fit_sarima(x, AIRLINE_AR, seed=3)
    np.testing.assert_array_equal(a.params, b.params)


@pytest.mark.slow
def test_estimates_converge_with_length():
    truth = np.array([0.6, -0.5])

    def median_error(T):
        errs = [np.abs(fit_sarima(simulate_sarima(AIRLINE_AR, truth, T, seed=s), AIRLINE_AR).params - truth)
                for s in range(50)]
        return np.median(errs, axis=0)

    short, long_ = median_error(500), median_error(2000)
    # error scales like T^{-1/2}: quadrupling T halves it; allow Monte Carlo noise
    assert np.all(long_ < 0.5 * short * 1.35)


# -- simulate ----------------------------------------------------------------

def test_simulate_white_noise_variance():
    x = simulate_sarima(SarimaSpec(), [], 10000, seed=0, sigma2=2.0)
    se = 2.0 * np.sqrt(2 / 10000)
    assert abs(np.var(x, ddof=1) - 2.0) < 3 * se


def test_simulate_deterministic():
    a = simulate_sarima(AIRLINE_AR, [0.6, -0.5], 300, seed=42)
    b = simulate_sarima(AIRLINE_AR, [0.6, -0.5], 300, seed=42)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, simulate_sarima(AIRLINE_AR, [0.6, -0.5], 300, seed=43))


def test_simulate_seasonal_difference_recovers_stationary():
    spec = SarimaSpec(0, 0, 0, 0, 1, 1, 12)
    path = simulate_sarima(spec, [-0.5], 240, seed=9, return_parts=True)
    assert path.series.shape == path.stationary.shape == path.innovations.shape == (240,)
    np.testing.assert_allclose(seasonal_difference(path.series, D=1), path.stationary[12:], atol=1e-10)


def test_simulate_checks():
    with pytest.raises(ConstraintError):
        simulate_sarima(SarimaSpec(1, 0, 0), [1.0], 100)
    with pytest.raises(ValueError):
        simulate_sarima(AIRLINE_AR, [0.6, -0.5], 100, burn_in=50)


# -- Ljung-Box ---------------------------------------------------------------

def test_ljung_box_matches_oracle(rng):
    e = rng.standard_normal(200)
    q, _ = ljung_box(e, 10)
    assert q == pytest.approx(ljung_box_oracle(list(e), 10), rel=1e-12)


def test_ljung_box_matches_statsmodels(rng):
    sm = pytest.importorskip("statsmodels.stats.diagnostic")
    e = rng.standard_normal(300)
    ref = sm.acorr_ljungbox(e, lags=[24], model_df=2)
    q, p = ljung_box(e, 24, fitted_params=2)
    assert q == pytest.approx(float(ref["lb_stat"].iloc[0]), rel=1e-10)
    assert p == pytest.approx(float(ref["lb_pvalue"].iloc[0]), rel=1e-8)


def test_ljung_box_calibrated():
    rng = np.random.default_rng(2024)
    rejections = sum(ljung_box(rng.standard_normal(500), 24)[1] < 0.05 for _ in range(200))
    assert 0.02 <= rejections / 200 <= 0.09


def test_ljung_box_power():
    x = simulate_sarima(SarimaSpec(1, 0, 0), [0.9], 500, seed=1)
    assert ljung_box(x, 24)[1] < 0.01


def test_ljung_box_errors():
    with pytest.raises(DegenerateSeriesError):
        ljung_box(np.full(100, 2.5), 24)
    with pytest.raises(ValueError):
        ljung_box(np.arange(100.0), 3, fitted_params=3)


# -- monthly pattern ---------------------------------------------------------

def test_monthly_pattern_17_year_window(rng):
    mp = monthly_pattern(rng.standard_normal(204), TimeIndex(2008, 1, 204))
    assert all(len(mp.values[m]) == 17 for m in range(1, 13))
    assert [y for y, _ in mp.values[1]] == list(range(2008, 2025))


def test_monthly_pattern_periodic(rng):
    period = rng.standard_normal(12)
    mp = monthly_pattern(np.tile(period, 10), TimeIndex(2008, 1, 120))
    np.testing.assert_allclose(mp.means, period, atol=1e-14)
    assert all(np.var([v for _, v in mp.values[m]]) < 1e-28 for m in range(1, 13))


def test_monthly_pattern_offset_start_and_constant():
    mp = monthly_pattern(np.full(30, 4.0), TimeIndex(2010, 11, 30))
    np.testing.assert_array_equal(mp.means, np.full(12, 4.0))
    assert mp.values[11][0] == (2010, 4.0)


def test_monthly_pattern_outputs(rng):
    mp = monthly_pattern(rng.standard_normal(36), TimeIndex(2008, 1, 36))
    lines = mp.to_csv_text().splitlines()
    assert lines[0] == "month,year,value" and len(lines) == 37
    svg = mp.to_svg()
    assert svg.count("<polyline") == 13
    assert 'data-label="mean"' in svg


# -- estimator ---------------------------------------------------------------

def test_estimator_api():
    est = SARIMA(order=(1, 0, 0), seasonal_order=(0, 1, 1, 12))
    assert est.get_params()["order"] == (1, 0, 0)
    x = simulate_sarima(AIRLINE_AR, [0.6, -0.5], 800, seed=5)
    est.fit(x)
    assert est.params_.shape == (2,)
    assert est.converged_
    q, p = est.ljung_box()
    assert 0 <= p <= 1
    with pytest.raises(ValueError):
        SARIMA().fit(np.r_[x, np.nan])
