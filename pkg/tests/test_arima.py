import numpy as np
import pytest

from oracles import ar_recursion
from densityfts.arima import (
    KPSS_CRITICAL_5PCT,
    ar_is_stationary,
    auto_arima,
    choose_d,
    fit_arima,
    forecast_scores,
    kpss_statistic,
    ma_is_invertible,
)
from densityfts.errors import DomainError


def ar1(phi, T, seed, c=0.0):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(T + 100)
    x = np.zeros(T + 100)
    for t in range(1, T + 100):
        x[t] = c + phi * x[t - 1] + e[t]
    return x[100:]


def implied_mean(fit):
    return fit.intercept / (1.0 - fit.ar.sum())


def test_kpss_constant_is_zero():
    assert kpss_statistic(np.full(30, 4.2)) == 0.0


def test_kpss_needs_ten():
    with pytest.raises(DomainError):
        kpss_statistic(np.arange(9.0))


def test_kpss_matches_statsmodels(rng):
    stattools = pytest.importorskip("statsmodels.tsa.stattools")
    import warnings

    for T in (20, 57, 200):
        x = np.cumsum(rng.standard_normal(T)) if T != 57 else rng.standard_normal(T)
        lags = int(np.floor(4 * (T / 100) ** 0.25))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref = stattools.kpss(x, regression="c", nlags=lags)[0]
        assert kpss_statistic(x) == pytest.approx(ref, rel=1e-12)


def test_kpss_monte_carlo():
    wn = sum(kpss_statistic(np.random.default_rng(s).standard_normal(200)) < KPSS_CRITICAL_5PCT for s in range(100))
    rw = sum(kpss_statistic(np.cumsum(np.random.default_rng(s).standard_normal(200))) > KPSS_CRITICAL_5PCT for s in range(100))
    assert wn >= 90 and rw >= 90


def test_root_checks():
    assert ar_is_stationary([0.5]) and not ar_is_stationary([1.0]) and not ar_is_stationary([0.5, 0.6])
    assert ma_is_invertible([0.9]) and not ma_is_invertible([-1.2])
    assert ar_is_stationary([])


@pytest.mark.slow
def test_ar1_recovery_monte_carlo():
    lag1, d0, p1 = [], 0, 0
    for seed in range(100):
        fit = auto_arima(ar1(0.6, 200, seed))
        d0 += fit.d == 0
        p1 += fit.p >= 1
        first_ar = fit.ar[0] if fit.p else 0.0
        first_ma = fit.ma[0] if fit.q else 0.0
        lag1.append(first_ar + first_ma)
    assert abs(np.median(lag1) - 0.6) <= 0.15
    assert d0 >= 80 and p1 >= 80


@pytest.mark.slow
def test_white_noise_selects_mean_model():
    ok = 0
    for seed in range(100):
        x = np.random.default_rng(seed).standard_normal(200)
        fit = auto_arima(x)
        ref = fit_arima(x, (0, fit.d, 0), condition=3)
        ok += fit.order == (0, 0, 0) or (fit.d == 0 and fit.aicc >= ref.aicc - 2.0)
    # An exhaustive 16-model AICc search overfits pure noise now and then;
    # an exact-likelihood search (statsmodels) gives a gap above 2 on
    # roughly the same 15-20% of seeds, so 70% is the pinned floor.
    assert ok >= 70


@pytest.mark.slow
def test_linear_trend_gives_d1_and_drift():
    drifts, d1 = [], 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        x = 3.0 + 0.5 * np.arange(200) + rng.standard_normal(200)
        fit = auto_arima(x)
        d1 += fit.d == 1
        if fit.d == 1:
            drifts.append(implied_mean(fit))
    assert d1 >= 45
    assert abs(np.median(drifts) - 0.5) <= 0.125
    assert np.mean(np.abs(np.array(drifts) - 0.5) <= 0.125) >= 0.9


def test_fitted_models_are_stationary_and_bounded():
    for seed in range(10):
        x = np.cumsum(ar1(0.3, 80, seed))
        fit = auto_arima(x)
        assert fit.p <= 3 and fit.q <= 3 and fit.d <= 2 and fit.sigma2 >= 0
        assert ar_is_stationary(fit.ar)


def test_aicc_formula(rng):
    x = ar1(0.5, 120, 3)
    fit = fit_arima(x, (2, 0, 1), condition=3)
    n = fit.nobs
    m = 2 + 1 + 1 + 1
    assert fit.aicc == pytest.approx(-2 * fit.loglik + 2 * m + 2 * m * (m + 1) / (n - m - 1))


def test_selection_invariant_to_level_shift_when_differenced(rng):
    x = np.cumsum(rng.standard_normal(150)) + 0.2 * np.arange(150)
    a, b = auto_arima(x), auto_arima(x + 1000.0)
    assert a.d >= 1 and a.order == b.order
    np.testing.assert_allclose(a.ar, b.ar, atol=1e-6)


def test_constant_series():
    fit = auto_arima(np.full(20, 2.5))
    assert fit.order == (0, 0, 0) and fit.intercept == 2.5
    np.testing.assert_array_equal(forecast_scores(fit, np.full(20, 2.5), 4).values, 2.5)


def test_mean_model_forecast(rng):
    x = rng.standard_normal(50) + 7
    fit = fit_arima(x, (0, 0, 0))
    out = forecast_scores(fit, x, 6).values
    np.testing.assert_allclose(out, fit.intercept)
    assert fit.intercept == pytest.approx(x.mean())


def test_random_walk_drift_exactly_linear(rng):
    x = np.cumsum(rng.standard_normal(60) + 0.3)
    fit = fit_arima(x, (0, 1, 0), include_intercept=True)
    out = forecast_scores(fit, x, 10).values
    h = np.arange(1, 11)
    np.testing.assert_allclose(out, x[-1] + fit.intercept * h, rtol=0, atol=1e-12)
    assert np.all(np.diff(out, 2) == pytest.approx(0.0, abs=1e-12))


def test_ar1_forecast_matches_hand_recursion():
    x = ar1(0.7, 100, 11)
    fit = fit_arima(x, (1, 0, 0), include_intercept=False)
    out = forecast_scores(fit, x, 8).values
    np.testing.assert_allclose(out, fit.ar[0] ** np.arange(1, 9) * x[-1], rtol=1e-12)
    np.testing.assert_allclose(out, ar_recursion(fit.ar, 0.0, x, 8), rtol=1e-12)


def test_ar2_intercept_forecast_matches_recursion():
    x = ar1(0.4, 100, 5, c=1.0)
    fit = fit_arima(x, (2, 0, 0))
    np.testing.assert_allclose(
        forecast_scores(fit, x, 5).values, ar_recursion(fit.ar, fit.intercept, x, 5), rtol=1e-12
    )


def test_undifferencing_round_trip(rng):
    x = np.cumsum(np.cumsum(rng.standard_normal(80)))
    fit = fit_arima(x, (1, 2, 0), include_intercept=False)
    level = forecast_scores(fit, x, 6).values
    w = np.diff(x, 2)
    w_fc = ar_recursion(fit.ar, 0.0, w, 6)
    rebuilt = np.cumsum(np.concatenate([[x[-1] - x[-2]], w_fc]))[1:]
    rebuilt = x[-1] + np.cumsum(rebuilt)
    np.testing.assert_allclose(level, rebuilt, rtol=1e-12)


def test_horizon_must_be_positive(rng):
    x = rng.standard_normal(30)
    with pytest.raises(DomainError):
        forecast_scores(fit_arima(x, (0, 0, 0)), x, 0)


def test_short_series_rejected():
    with pytest.raises(DomainError):
        auto_arima(np.arange(5.0))


def test_choose_d():
    rng = np.random.default_rng(0)
    assert choose_d(rng.standard_normal(200)) == 0
    assert choose_d(np.cumsum(rng.standard_normal(200))) == 1
