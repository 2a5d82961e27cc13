"""Correlation and stationarity diagnostics: ACF, PACF, ADF, Gaussian KDE."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from ._mackinnon import mackinnon_critical_values, mackinnon_pvalue
from .errors import NumericalInstability, SeriesTooShort, SingularRegression, ZeroVariance


@dataclass(frozen=True)
class CorrelogramResult:
    lags: np.ndarray
    values: np.ndarray
    kind: Literal["acf", "pacf"]

    def to_csv(self) -> str:
        return _two_column_csv(("lag", self.kind), zip(self.lags.tolist(), self.values.tolist()))


@dataclass(frozen=True)
class AdfResult:
    test_statistic: float
    p_value: float
    lags_used: int
    n_observations: int
    critical_values: dict[str, float]
    aic: float

    def report(self) -> str:
        lines = [
            f"test_statistic={self.test_statistic:.6f}",
            f"p_value={self.p_value:.6f}",
            f"lags_used={self.lags_used}",
            f"n_observations={self.n_observations}",
        ]
        lines += [f"critical_value_{k}={v:.6f}" for k, v in self.critical_values.items()]
        lines.append(f"aic={self.aic:.6f}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class KdeEstimate:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def to_csv(self) -> str:
        return _two_column_csv(("x", "density"), zip(self.grid.tolist(), self.density.tolist()))


def _two_column_csv(header, rows) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for a, b in rows:
        writer.writerow([a, repr(float(b))])
    return out.getvalue()


def _as_array(values: Sequence[float]) -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a 1-d series")
    return x


def autocovariance(values: Sequence[float], max_lag: int) -> np.ndarray:
    """Biased (1/n) autocovariances for lags 0..max_lag."""
    x = _as_array(values)
    n = len(x)
    xc = x - x.mean()
    return np.array([xc[k:] @ xc[: n - k] for k in range(max_lag + 1)]) / n


def acf(values: Sequence[float], max_lag: int) -> CorrelogramResult:
    x = _as_array(values)
    if max_lag < 1 or len(x) <= max_lag:
        raise SeriesTooShort(f"need length > max_lag >= 1 (length {len(x)}, max_lag {max_lag})")
    gamma = autocovariance(x, max_lag)
    if gamma[0] <= 0:
        raise ZeroVariance("series is constant")
    rho = gamma / gamma[0]
    rho[0] = 1.0
    return CorrelogramResult(np.arange(max_lag + 1), rho, "acf")


def durbin_levinson(rho: np.ndarray) -> np.ndarray:
    """Partial autocorrelations from autocorrelations ``rho[0..K]``."""
    K = len(rho) - 1
    pacf = np.empty(K + 1)
    pacf[0] = 1.0
    phi = np.zeros(K + 1)
    prev = np.zeros(K + 1)
    v = 1.0
    for k in range(1, K + 1):
        num = rho[k] - prev[1:k] @ rho[k - 1:0:-1]
        if v < 1e-12:
            raise NumericalInstability(f"prediction-error variance vanished at lag {k}")
        a = num / v
        phi[k] = a
        phi[1:k] = prev[1:k] - a * prev[k - 1:0:-1]
        v *= 1.0 - a * a
        pacf[k] = a
        prev[: k + 1] = phi[: k + 1]
    return pacf


def pacf(values: Sequence[float], max_lag: int) -> CorrelogramResult:
    rho = acf(values, max_lag).values
    return CorrelogramResult(np.arange(max_lag + 1), durbin_levinson(rho), "pacf")


def default_adf_maxlag(n: int) -> int:
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def _ols(y: np.ndarray, X: np.ndarray):
    n, k = X.shape
    if n <= k or np.linalg.matrix_rank(X) < k:
        raise SingularRegression(f"design matrix {n}x{k} is rank deficient")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    return beta, ssr


def _gaussian_aic(ssr: float, n: int, k: int) -> float:
    llf = -0.5 * n * (math.log(2 * math.pi) + math.log(ssr / n) + 1.0)
    return -2.0 * llf + 2.0 * k


def _adf_design(x: np.ndarray, lags: int, nobs: int):
    """Regressors [const, y_{t-1}, dy_{t-1}..dy_{t-lags}] for the last ``nobs`` rows."""
    dx = np.diff(x)
    m = len(dx)
    rows = np.arange(m - nobs, m)
    cols = [np.ones(nobs), x[rows]]
    cols += [dx[rows - i] for i in range(1, lags + 1)]
    return dx[rows], np.column_stack(cols)


def adf_test(values: Sequence[float], max_lag: int | None = None) -> AdfResult:
    """Augmented Dickey-Fuller test with constant and AIC lag selection.

    Lag selection compares every lag on the common sample left after
    ``max_lag`` differences are consumed; the chosen lag is then refitted on
    all available observations.
    """
    x = _as_array(values)
    n = len(x)
    if n < 20:
        raise SeriesTooShort(f"ADF needs at least 20 observations, got {n}")
    if max_lag is None:
        max_lag = default_adf_maxlag(n)
    max_lag = max(0, min(max_lag, n // 2 - 3))

    nobs_common = n - 1 - max_lag
    best_lag, best_aic = 0, math.inf
    for k in range(max_lag + 1):
        y, X = _adf_design(x, k, nobs_common)
        _, ssr = _ols(y, X)
        if ssr <= 0:
            raise SingularRegression("perfect fit in ADF regression")
        aic = _gaussian_aic(ssr, nobs_common, X.shape[1])
        if aic < best_aic:
            best_lag, best_aic = k, aic

    nobs = n - 1 - best_lag
    y, X = _adf_design(x, best_lag, nobs)
    beta, ssr = _ols(y, X)
    sigma2 = ssr / (nobs - X.shape[1])
    cov = sigma2 * np.linalg.inv(X.T @ X)
    stat = float(beta[1] / math.sqrt(cov[1, 1]))
    return AdfResult(
        test_statistic=stat,
        p_value=mackinnon_pvalue(stat),
        lags_used=best_lag,
        n_observations=nobs,
        critical_values=mackinnon_critical_values(nobs),
        aic=best_aic,
    )


def silverman_bandwidth(values: Sequence[float]) -> float:
    x = _as_array(values)
    std = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(std, (q75 - q25) / 1.34) if q75 > q25 else std
    if not spread > 0:
        raise ZeroVariance("cannot choose a bandwidth for constant data")
    return 0.9 * spread * len(x) ** (-0.2)


def kde_density(
    values: Sequence[float],
    bandwidth: float | None = None,
    grid_size: int = 512,
    grid: Sequence[float] | None = None,
) -> KdeEstimate:
    """Gaussian kernel density on a grid spanning the data +/- 4 bandwidths."""
    x = _as_array(values)
    if len(x) < 2:
        raise SeriesTooShort("KDE needs at least 2 points")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    if grid is None:
        g = np.linspace(x.min() - 4 * h, x.max() + 4 * h, grid_size)
    else:
        g = _as_array(grid)
    u = (g[:, None] - x[None, :]) / h
    dens = np.exp(-0.5 * u * u).sum(axis=1) / (len(x) * h * math.sqrt(2 * math.pi))
    return KdeEstimate(g, dens, h)
