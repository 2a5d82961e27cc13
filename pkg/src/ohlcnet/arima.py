"""ARIMA(p, d, q) with optional drift, fitted by conditional sum of squares.

Coefficients are optimized in an unconstrained space and mapped through
partial autocorrelations, so every candidate AR polynomial is stationary and
every MA polynomial invertible.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter

from .errors import InvalidOrder, NoConvergedModel, NonConvergence, SeriesTooShort
from .ts_analysis import adf_test

logger = logging.getLogger(__name__)

MAX_ITER = 2000
REL_TOL = 1e-8
# candidates with an AR or MA root inside this modulus are discarded by the search
ROOT_MARGIN = 1.01


@dataclass(frozen=True, order=True)
class ArimaOrder:
    p: int
    d: int
    q: int
    with_drift: bool = False

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise InvalidOrder(f"negative order component in {self}")

    @property
    def n_params(self) -> int:
        """Free parameters counted by AIC, innovation variance included."""
        return self.p + self.q + int(self.with_drift) + 1

    def __str__(self) -> str:
        drift = " with drift" if self.with_drift else ""
        return f"ARIMA({self.p},{self.d},{self.q}){drift}"


@dataclass
class ArimaFit:
    order: ArimaOrder
    ar_coeffs: np.ndarray
    ma_coeffs: np.ndarray
    drift: float
    sigma2: float
    log_likelihood: float
    aic: float
    residuals: np.ndarray
    n_fitted: int
    # state needed for forecasting
    tail: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    diff_tails: list = field(repr=False, default_factory=list)

    def summary(self) -> str:
        lines = [
            f"order={self.order.p},{self.order.d},{self.order.q}",
            f"with_drift={str(self.order.with_drift).lower()}",
        ]
        lines += [f"ar{i + 1}={c!r}" for i, c in enumerate(self.ar_coeffs)]
        lines += [f"ma{i + 1}={c!r}" for i, c in enumerate(self.ma_coeffs)]
        lines += [
            f"drift={self.drift!r}",
            f"sigma2={self.sigma2!r}",
            f"log_likelihood={self.log_likelihood!r}",
            f"aic={self.aic!r}",
            f"n_fitted={self.n_fitted}",
        ]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ArimaForecast:
    horizon: int
    mean_path: np.ndarray
    origin_value: float


@dataclass
class StepwiseResult:
    best: ArimaFit
    trace: list[tuple[ArimaOrder, float]]
    fits: dict[ArimaOrder, ArimaFit]


def difference(values: Sequence[float], d: int) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if d < 0:
        raise ValueError("d must be >= 0")
    if len(x) <= d:
        raise SeriesTooShort(f"cannot difference {len(x)} values {d} times")
    return np.diff(x, n=d) if d else x.copy()


def integrate(diffed: Sequence[float], initial: Sequence[float]) -> np.ndarray:
    """Undo :func:`difference` given the first ``d`` values of the original series."""
    y = np.asarray(diffed, dtype=float)
    init = np.asarray(initial, dtype=float)
    d = len(init)
    heads = [init[0]]
    level = init.copy()
    for _ in range(1, d):
        level = np.diff(level)
        heads.append(level[0])
    for head in reversed(heads):
        y = np.concatenate([[head], head + np.cumsum(y)])
    return y


def pacf_to_coeffs(partials: np.ndarray) -> np.ndarray:
    """Map partial autocorrelations in (-1, 1) to stationary AR coefficients."""
    k = len(partials)
    phi = np.zeros(k)
    for j in range(k):
        a = partials[j]
        prev = phi[:j].copy()
        phi[:j] = prev - a * prev[::-1]
        phi[j] = a
    return phi


def coeffs_to_pacf(phi: np.ndarray) -> np.ndarray:
    phi = np.array(phi, dtype=float)
    k = len(phi)
    partials = np.zeros(k)
    for j in range(k - 1, -1, -1):
        a = phi[j]
        partials[j] = a
        if j:
            prev = (phi[:j] + a * phi[:j][::-1]) / (1.0 - a * a)
            phi[:j] = prev
    return partials


def _unpack(theta: np.ndarray, order: ArimaOrder):
    p, q = order.p, order.q
    ar = pacf_to_coeffs(np.tanh(theta[:p]))
    # invertible 1 + th1 B + ... mirrors a stationary 1 - ps1 B - ...
    ma = -pacf_to_coeffs(np.tanh(theta[p:p + q]))
    drift = theta[p + q] if order.with_drift else 0.0
    return ar, ma, drift


def css_residuals(w: np.ndarray, ar: np.ndarray, ma: np.ndarray) -> np.ndarray:
    """Residuals e_t for t >= p, with pre-sample innovations set to zero."""
    p = len(ar)
    v = w[p:].copy()
    for i, phi in enumerate(ar, start=1):
        v -= phi * w[p - i:len(w) - i]
    if len(ma):
        v = lfilter([1.0], np.concatenate([[1.0], ma]), v)
    return v


def _gaussian_loglik(ssr: float, n: int) -> tuple[float, float]:
    sigma2 = ssr / n
    return sigma2, -0.5 * n * (math.log(2 * math.pi * sigma2) + 1.0)


def fit_arima(values: Sequence[float], order: ArimaOrder, n_cond: int | None = None) -> ArimaFit:
    """Fit by conditional sum of squares.

    The first ``n_cond`` differenced values (default ``p``) are conditioned on
    and excluded from the likelihood. Passing a common ``n_cond`` to every
    candidate keeps their AICs computed over the same observations.
    """
    x = np.asarray(values, dtype=float)
    p, d, q = order.p, order.d, order.q
    if len(x) < 10 * (p + q + 1) + d:
        raise SeriesTooShort(f"{len(x)} values too few for {order}")
    n_cond = p if n_cond is None else n_cond
    if n_cond < p:
        raise InvalidOrder(f"n_cond={n_cond} smaller than p={p}")
    w = difference(x, d)
    n_fit = len(w) - n_cond
    skip = n_cond - p

    diff_tails = [difference(x, j)[-max(p, 1):] for j in range(d + 1)]

    if p == 0 and q == 0:
        drift = float(w[skip:].mean()) if order.with_drift else 0.0
        resid = w[skip:] - drift
        sigma2, llf = _gaussian_loglik(float(resid @ resid), n_fit)
        return _make_fit(order, np.empty(0), np.empty(0), drift, sigma2, llf, resid, n_fit, w, diff_tails)

    def objective(theta):
        ar, ma, mu = _unpack(theta, order)
        e = css_residuals(w - mu, ar, ma)[skip:]
        ssr = float(e @ e)
        return 0.5 * n_fit * math.log(ssr / n_fit) if ssr > 0 else -1e300

    start = np.zeros(p + q + int(order.with_drift))
    if order.with_drift:
        start[-1] = w.mean()
    opts = {"maxiter": MAX_ITER, "maxfev": 4 * MAX_ITER, "xatol": 1e-4, "fatol": REL_TOL, "adaptive": True}

    res = minimize(objective, start, method="Nelder-Mead", options=_scaled(opts, objective(start)))
    if not res.success:
        rng = np.random.default_rng(len(w) * 31 + p * 7 + q)
        retry = res.x + rng.normal(scale=0.1, size=len(res.x))
        logger.debug("%s: restarting simplex (%s)", order, res.message)
        res = minimize(objective, retry, method="Nelder-Mead", options=_scaled(opts, objective(retry)))
        if not res.success:
            raise NonConvergence(f"{order}: {res.message}")

    ar, ma, drift = _unpack(res.x, order)
    resid = css_residuals(w - drift, ar, ma)[skip:]
    sigma2, llf = _gaussian_loglik(float(resid @ resid), n_fit)
    return _make_fit(order, ar, ma, float(drift), sigma2, llf, resid, n_fit, w, diff_tails)


def _scaled(opts: dict, f0: float) -> dict:
    out = dict(opts)
    out["fatol"] = REL_TOL * max(1.0, abs(f0))
    return out


def _make_fit(order, ar, ma, drift, sigma2, llf, resid, n_fit, w, diff_tails) -> ArimaFit:
    return ArimaFit(
        order=order,
        ar_coeffs=np.asarray(ar, dtype=float),
        ma_coeffs=np.asarray(ma, dtype=float),
        drift=drift,
        sigma2=sigma2,
        log_likelihood=llf,
        aic=2 * order.n_params - 2 * llf,
        residuals=np.asarray(resid, dtype=float),
        n_fitted=n_fit,
        tail=w.copy(),
        diff_tails=diff_tails,
    )


def model_aic(fit: ArimaFit) -> float:
    return 2 * fit.order.n_params - 2 * fit.log_likelihood


def forecast(fit: ArimaFit, horizon: int) -> ArimaForecast:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    order = fit.order
    origin = float(fit.diff_tails[0][-1])

    if order.p == 0 and order.q == 0 and order.d == 1:
        path = origin + fit.drift * np.arange(1, horizon + 1)
        return ArimaForecast(horizon, path, origin)

    p, q = order.p, order.q
    w_hist = list(fit.tail[-p:] - fit.drift) if p else []
    e_hist = list(fit.residuals[-q:]) if q else []
    wf = []
    for _ in range(horizon):
        nxt = 0.0
        for i in range(1, p + 1):
            nxt += fit.ar_coeffs[i - 1] * w_hist[-i]
        for j in range(1, q + 1):
            nxt += fit.ma_coeffs[j - 1] * e_hist[-j]
        w_hist.append(nxt)
        e_hist.append(0.0)
        wf.append(nxt + fit.drift)
    path = np.asarray(wf)
    # integrate from the deepest differencing level back to levels
    for j in range(order.d - 1, -1, -1):
        path = fit.diff_tails[j][-1] + np.cumsum(path)
    return ArimaForecast(horizon, path, origin)


def min_root_modulus(fit: ArimaFit) -> float:
    """Smallest root modulus across the AR and MA polynomials (inf if none)."""
    roots = []
    if len(fit.ar_coeffs):
        roots.extend(np.roots(np.r_[-fit.ar_coeffs[::-1], 1.0]))
    if len(fit.ma_coeffs):
        roots.extend(np.roots(np.r_[fit.ma_coeffs[::-1], 1.0]))
    return float(np.min(np.abs(roots))) if roots else math.inf


def choose_d(values: Sequence[float], max_d: int = 2, alpha: float = 0.05) -> int:
    x = np.asarray(values, dtype=float)
    d = 0
    while d < max_d:
        if adf_test(difference(x, d)).p_value < alpha:
            break
        d += 1
    return d


def _neighbours(o: ArimaOrder, max_p: int, max_q: int, drift_allowed: bool):
    for dp, dq in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)):
        p, q = o.p + dp, o.q + dq
        if 0 <= p <= max_p and 0 <= q <= max_q:
            yield ArimaOrder(p, o.d, q, o.with_drift)
    if drift_allowed:
        yield ArimaOrder(o.p, o.d, o.q, not o.with_drift)


def auto_arima_stepwise(
    values: Sequence[float],
    max_p: int = 5,
    max_q: int = 5,
    max_d: int = 2,
) -> ArimaFit:
    """Minimum-AIC model from :func:`stepwise_search`."""
    return stepwise_search(values, max_p, max_q, max_d).best


def stepwise_search(
    values: Sequence[float],
    max_p: int = 5,
    max_q: int = 5,
    max_d: int = 2,
    d: int | None = None,
) -> StepwiseResult:
    """Stepwise minimum-AIC search over (p, q) and drift.

    Starts from (2,d,2), (0,d,0), (1,d,0), (0,d,1) with drift and then (0,d,0)
    without, and keeps moving to the best +/-1 neighbour until none improves.
    """
    x = np.asarray(values, dtype=float)
    if d is None:
        d = choose_d(x, max_d)
    drift_allowed = d <= 1
    fits: dict[ArimaOrder, ArimaFit] = {}
    trace: list[tuple[ArimaOrder, float]] = []

    def evaluate(o: ArimaOrder) -> float:
        if o in fits:
            return fits[o].aic
        try:
            fit = fit_arima(x, o, n_cond=max_p)
        except (NonConvergence, SeriesTooShort) as exc:
            logger.info("%s skipped: %s", o, exc)
            fits[o] = None  # type: ignore[assignment]
            trace.append((o, math.inf))
            return math.inf
        if min_root_modulus(fit) < ROOT_MARGIN:
            logger.info("%s rejected: root near the unit circle", o)
            fits[o] = None  # type: ignore[assignment]
            trace.append((o, math.inf))
            return math.inf
        fits[o] = fit
        trace.append((o, fit.aic))
        return fit.aic

    start = [(2, 2), (0, 0), (1, 0), (0, 1)]
    initial = [ArimaOrder(min(p, max_p), d, min(q, max_q), drift_allowed) for p, q in start]
    if drift_allowed:
        initial.append(ArimaOrder(0, d, 0, False))
    best, best_aic = None, math.inf
    for o in dict.fromkeys(initial):
        a = evaluate(o)
        if a < best_aic:
            best, best_aic = o, a

    improved = best is not None
    while improved:
        improved = False
        for o in _neighbours(best, max_p, max_q, drift_allowed):
            a = evaluate(o)
            if a < best_aic:
                best, best_aic, improved = o, a, True
                break

    if best is None:
        raise NoConvergedModel("no candidate model converged")
    return StepwiseResult(fits[best], trace, {k: v for k, v in fits.items() if v is not None})
