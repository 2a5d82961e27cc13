import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ohlcnet.arima import (
    ArimaOrder, coeffs_to_pacf, css_residuals, difference, fit_arima, forecast, integrate, model_aic,
    pacf_to_coeffs, stepwise_search,
)
from ohlcnet.errors import InvalidOrder, SeriesTooShort


def ar1(phi, n, seed, c=0.0):
    rng = np.random.default_rng(seed)
    e = rng.normal(size=n)
    x = np.zeros(n)
    for t in range(1, n):
        x[t] = c + phi * x[t - 1] + e[t]
    return x


def test_difference_cases():
    x = [1.0, 3.0, 6.0, 10.0]
    assert difference(x, 0).tolist() == x
    assert difference(x, 1).tolist() == [2.0, 3.0, 4.0]
    quad = [3 * t * t + 2 * t + 1 for t in range(10)]
    assert np.all(difference(quad, 2) == 6)
    with pytest.raises(SeriesTooShort):
        difference([1.0], 1)


@given(st.integers(0, 1000), st.integers(1, 2))
@settings(max_examples=20, deadline=None)
def test_integrate_inverts_difference(seed, d):
    x = np.random.default_rng(seed).normal(size=30).cumsum()
    assert np.allclose(integrate(difference(x, d), x[:d]), x, atol=1e-9)


def test_invalid_order():
    with pytest.raises(InvalidOrder):
        ArimaOrder(-1, 0, 0)


@given(st.lists(st.floats(-0.95, 0.95), min_size=1, max_size=5))
@settings(max_examples=50, deadline=None)
def test_pacf_parametrization_is_stationary_and_invertible(partials):
    phi = pacf_to_coeffs(np.array(partials))
    # stationary iff the companion matrix has spectral radius < 1
    k = len(phi)
    companion = np.zeros((k, k))
    companion[0] = phi
    companion[1:, :-1] = np.eye(k - 1)
    assert np.max(np.abs(np.linalg.eigvals(companion))) < 1
    assert np.allclose(coeffs_to_pacf(phi), partials, atol=1e-8)


def test_random_walk_closed_form():
    x = np.random.default_rng(0).normal(size=500).cumsum() + 50
    w = np.diff(x)
    fit = fit_arima(x, ArimaOrder(0, 1, 0))
    assert fit.ar_coeffs.size == 0 and fit.ma_coeffs.size == 0
    s2 = np.mean(w * w)
    ll = -len(w) / 2 * (math.log(2 * math.pi * s2) + 1)
    assert fit.sigma2 == pytest.approx(s2, rel=1e-12)
    assert fit.log_likelihood == pytest.approx(ll, rel=1e-12)
    assert fit.aic == pytest.approx(2 - 2 * ll, rel=1e-12)
    path = forecast(fit, 7).mean_path
    assert np.all(path == x[-1])


def test_drift_is_mean_difference():
    x = np.random.default_rng(1).normal(0.1, 1, 400).cumsum()
    fit = fit_arima(x, ArimaOrder(0, 1, 0, True))
    assert fit.drift == pytest.approx(np.mean(np.diff(x)), abs=1e-8)
    path = forecast(fit, 30).mean_path
    steps = np.diff(np.r_[x[-1], path])
    assert np.allclose(steps, fit.drift, atol=1e-12)  # affine path


def test_aic_parameter_count():
    fit = fit_arima(np.random.default_rng(2).normal(size=200).cumsum(), ArimaOrder(0, 1, 0))
    assert model_aic(fit) == pytest.approx(fit.aic)
    bumped = ArimaOrder(0, 1, 0, True)
    assert 2 * bumped.n_params - 2 * fit.log_likelihood - fit.aic == pytest.approx(2.0)
    assert ArimaOrder(2, 1, 3, True).n_params == 7


def test_ar1_recovery_and_one_step_forecast():
    x = ar1(0.6, 3000, seed=0)
    fit = fit_arima(x, ArimaOrder(1, 0, 0, True))
    phi = fit.ar_coeffs[0]
    assert 0.55 <= phi <= 0.65
    assert len(fit.residuals) == fit.n_fitted
    one = forecast(fit, 1).mean_path[0]
    assert one == pytest.approx(fit.drift + phi * (x[-1] - fit.drift), abs=1e-10)


def test_css_residuals_recursion_oracle():
    rng = np.random.default_rng(4)
    w = rng.normal(size=60)
    ar, ma = np.array([0.4, -0.2]), np.array([0.3])
    # conditional on the first p observations, innovations before t = p are zero
    e = {}
    for t in range(2, len(w)):
        pred = ar[0] * w[t - 1] + ar[1] * w[t - 2] + ma[0] * e.get(t - 1, 0.0)
        e[t] = w[t] - pred
    got = css_residuals(w, ar, ma)
    assert np.max(np.abs(got - [e[t] for t in range(2, len(w))])) <= 1e-12


def test_nesting_bound():
    x = np.random.default_rng(5).normal(size=800).cumsum()
    base = fit_arima(x, ArimaOrder(0, 1, 0), n_cond=1)
    nested = fit_arima(x, ArimaOrder(1, 1, 0), n_cond=1)
    assert nested.aic >= base.aic - 2 - 1e-6
    assert nested.log_likelihood >= base.log_likelihood - 1e-6


def test_stepwise_random_walk_with_drift():
    x = 30 + np.random.default_rng(0).normal(0.1, 1, 1500).cumsum()
    res = stepwise_search(x)
    assert res.best.order.d == 1
    assert res.best.order == ArimaOrder(0, 1, 0, True)
    first = [o for o, _ in res.trace[:5]]
    assert first == [ArimaOrder(2, 1, 2, True), ArimaOrder(0, 1, 0, True), ArimaOrder(1, 1, 0, True),
                     ArimaOrder(0, 1, 1, True), ArimaOrder(0, 1, 0, False)]
    assert res.best.aic == min(a for _, a in res.trace)


def test_stepwise_white_noise():
    x = np.random.default_rng(1).normal(size=1000)
    best = stepwise_search(x).best
    assert (best.order.p, best.order.d, best.order.q) == (0, 0, 0)
