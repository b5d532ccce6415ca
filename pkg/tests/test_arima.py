"""Autoregressive baseline: recovery on synthetic series, fallbacks, forecasts."""

import numpy as np
import pytest

from lightgame.arima import ArimaModel, css_residuals, fit_arima, forecast_arima

from oracles import arma_series


def test_residual_recursion_matches_literal_loop():
    rng = np.random.default_rng(0)
    y = rng.normal(size=40)
    ar, ma, c = 0.6, -0.3, 1.2
    e = np.zeros(len(y))
    for t in range(1, len(y)):
        e[t] = y[t] - c - ar * y[t - 1] - ma * e[t - 1]
    got = css_residuals(ar, ma, c, y)
    np.testing.assert_allclose(got, e[1:], rtol=1e-12, atol=1e-12)


def test_recovers_known_coefficients():
    y = arma_series(ar=0.6, ma=0.3, intercept=20.0, sigma=1.0, n=5000, seed=11)
    model = fit_arima(y)
    assert not model.fallback
    assert model.converged
    assert model.ar == pytest.approx(0.6, abs=0.1)
    assert model.ma == pytest.approx(0.3, abs=0.1)
    assert model.sigma2 == pytest.approx(1.0, abs=0.1)
    # implied long-run mean
    assert model.intercept / (1.0 - model.ar) == pytest.approx(50.0, rel=0.05)


def test_white_noise_yields_near_zero_coefficients():
    y = arma_series(ar=0.0, ma=0.0, intercept=50.0, sigma=1.0, n=5000, seed=5)
    model = fit_arima(y)
    assert abs(model.ar) <= 0.05
    assert abs(model.ma) <= 0.05
    assert model.intercept / (1.0 - model.ar) == pytest.approx(50.0, abs=0.2)


def test_constant_series_short_circuits():
    model = fit_arima(np.full(25, 60.0))
    assert model == ArimaModel(
        ar=0.0, ma=0.0, intercept=60.0, sigma2=0.0, css=0.0, n_obs=25,
        converged=True, fallback=False,
    )
    assert forecast_arima(model, np.full(5, 60.0)) == pytest.approx(60.0)


def test_trend_sticks_to_bound_and_falls_back_with_warning():
    # a deterministic ramp wants a unit root; the optimizer pins at the bound
    y = np.arange(100, dtype=float)
    with pytest.warns(UserWarning, match="fell back"):
        model = fit_arima(y)
    assert model.fallback
    assert model.ma == 0.0
    assert abs(model.ar) < 1.0  # clipped inside the stationary region


def test_input_validation():
    with pytest.raises(ValueError, match="at least"):
        fit_arima(np.zeros(9))
    with pytest.raises(ValueError, match="1-d"):
        fit_arima(np.zeros((5, 5)))
    with pytest.raises(ValueError, match="non-finite"):
        fit_arima(np.array([1.0, np.nan] + [0.0] * 10))
    with pytest.raises(ValueError, match="stationarity"):
        ArimaModel(ar=1.0, ma=0.0, intercept=0.0, sigma2=1.0, css=0.0, n_obs=10,
                   converged=True, fallback=False)
    with pytest.raises(ValueError, match="invertibility"):
        ArimaModel(ar=0.0, ma=-1.2, intercept=0.0, sigma2=1.0, css=0.0, n_obs=10,
                   converged=True, fallback=False)


def test_forecast_is_intercept_plus_terms():
    model = ArimaModel(ar=0.5, ma=0.2, intercept=10.0, sigma2=1.0, css=0.0, n_obs=10,
                       converged=True, fallback=False)
    y = np.array([30.0, 40.0, 20.0])
    e = css_residuals(0.5, 0.2, 10.0, y)
    expected = 10.0 + 0.5 * 20.0 + 0.2 * float(e[-1])
    assert forecast_arima(model, y) == pytest.approx(expected, rel=1e-12)
    # one-point history has no residual yet
    assert forecast_arima(model, [40.0]) == pytest.approx(10.0 + 0.5 * 40.0)
    with pytest.raises(ValueError):
        forecast_arima(model, [])


def test_forecast_beats_mean_on_persistent_series():
    y = arma_series(ar=0.8, ma=0.0, intercept=10.0, sigma=1.0, n=2000, seed=9)
    model = fit_arima(y[:-200])
    errs_model, errs_mean = [], []
    mean = float(np.mean(y[:-200]))
    for t in range(len(y) - 200, len(y)):
        errs_model.append((forecast_arima(model, y[:t]) - y[t]) ** 2)
        errs_mean.append((mean - y[t]) ** 2)
    assert np.mean(errs_model) < 0.7 * np.mean(errs_mean)
