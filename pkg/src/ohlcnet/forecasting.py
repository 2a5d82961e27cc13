"""Lag-window datasets, per-channel model training, walk-forward OHLC
forecasts and forecast error metrics."""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Literal, Mapping, Protocol, Sequence

import numpy as np

from .errors import (
    InsufficientHistory,
    LengthMismatch,
    MissingActuals,
    SeriesTooShort,
    ZeroActual,
    ZeroVariance,
)
from .market_data import CHANNELS, OhlcSeries
from .neuralnet import MlpConfig, MlpModel, TrainHistory, init_mlp, train

logger = logging.getLogger(__name__)

ForecastMode = Literal["teacher_forced", "recursive"]


class NextValueModel(Protocol):
    def predict_next(self, window: Sequence[float]) -> float: ...


@dataclass(frozen=True)
class LagSample:
    window: np.ndarray
    target: float
    target_date: dt.date | None = None


@dataclass(frozen=True)
class ForecastSet:
    dates: list[dt.date]
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray

    def __post_init__(self):
        n = len(self.dates)
        for ch in CHANNELS:
            arr = np.asarray(getattr(self, ch), dtype=float)
            object.__setattr__(self, ch, arr)
            if len(arr) != n:
                raise LengthMismatch(f"{ch} has {len(arr)} values for {n} dates")
            if np.any(arr <= 0):
                raise ValueError(f"non-positive predicted {ch} price")

    def __len__(self) -> int:
        return len(self.dates)

    def channel(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["date", *CHANNELS])
        for i, d in enumerate(self.dates):
            writer.writerow([d.isoformat(), *(repr(float(getattr(self, ch)[i])) for ch in CHANNELS)])
        return out.getvalue()


@dataclass(frozen=True)
class ErrorReport:
    mse: float
    rmse: float
    mae: float
    mape: float
    evs: float

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


def make_lag_dataset(values: Sequence[float], window: int = 5, dates: Sequence[dt.date] | None = None) -> list[LagSample]:
    v = np.asarray(values, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(v) <= window:
        raise SeriesTooShort(f"need more than {window} values, got {len(v)}")
    return [
        LagSample(v[i:i + window].copy(), float(v[i + window]), None if dates is None else dates[i + window])
        for i in range(len(v) - window)
    ]


def lag_matrix(values: Sequence[float], window: int = 5) -> tuple[np.ndarray, np.ndarray]:
    """Same samples as :func:`make_lag_dataset`, stacked as ``(X, y)`` arrays."""
    v = np.asarray(values, dtype=float)
    if len(v) <= window:
        raise SeriesTooShort(f"need more than {window} values, got {len(v)}")
    X = np.lib.stride_tricks.sliding_window_view(v[:-1], window).copy()
    return X, v[window:].copy()


def train_channel_model(
    values: Sequence[float],
    config: MlpConfig,
    holdout_fraction: float = 0.1,
) -> tuple[MlpModel, TrainHistory]:
    """Fit one channel's regressor on its training slice.

    Values are min-max scaled with the training slice's own range; the
    chronologically last ``holdout_fraction`` of lag samples drives early
    stopping.
    """
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        raise ZeroVariance("channel is constant; cannot scale")
    model = init_mlp(config, (lo, hi))
    X, y = lag_matrix(model.scale(v), config.input_size)
    n_val = max(1, int(round(len(X) * holdout_fraction)))
    if n_val >= len(X):
        raise SeriesTooShort("not enough samples for a validation holdout")
    return train(model, (X[:-n_val], y[:-n_val]), (X[-n_val:], y[-n_val:]))


def _train_one(args):
    values, config, holdout = args
    return train_channel_model(values, config, holdout)


def train_channel_models(
    series: OhlcSeries,
    config: MlpConfig,
    holdout_fraction: float = 0.1,
    jobs: int = 1,
) -> tuple[dict[str, MlpModel], dict[str, TrainHistory]]:
    """One model per OHLC channel; channel ``i`` uses seed ``config.seed + i``."""
    tasks = [
        (series.channel(ch), dataclasses.replace(config, seed=config.seed + i), holdout_fraction)
        for i, ch in enumerate(CHANNELS)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_train_one, tasks))
    else:
        results = [_train_one(t) for t in tasks]
    models = {ch: r[0] for ch, r in zip(CHANNELS, results)}
    histories = {ch: r[1] for ch, r in zip(CHANNELS, results)}
    return models, histories


def walk_forward_forecast(
    models: Mapping[str, NextValueModel],
    history: OhlcSeries,
    actuals: OhlcSeries | None = None,
    horizon: int = 30,
    mode: ForecastMode = "teacher_forced",
    window: int = 5,
    dates: Sequence[dt.date] | None = None,
) -> ForecastSet:
    """Predict ``horizon`` days one step at a time for every channel.

    In ``teacher_forced`` mode each step's window is refilled with the
    observed value of the day just predicted; in ``recursive`` mode it is
    refilled with the model's own prediction.
    """
    if mode not in ("teacher_forced", "recursive"):
        raise ValueError(f"unknown mode {mode!r}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if len(history) < window:
        raise InsufficientHistory(f"need {window} history bars, got {len(history)}")
    if mode == "teacher_forced" and (actuals is None or len(actuals) < horizon):
        raise MissingActuals(f"teacher_forced mode needs {horizon} actual bars")
    if dates is None:
        if actuals is not None and len(actuals) >= horizon:
            dates = actuals.dates[:horizon]
        else:
            raise MissingActuals("forecast dates unknown without actuals; pass dates")
    dates = list(dates)[:horizon]

    out = {}
    for ch in CHANNELS:
        model = models[ch]
        buf = list(history.channel(ch)[-window:])
        observed = actuals.channel(ch) if actuals is not None else None
        preds = []
        for h in range(horizon):
            pred = model.predict_next(np.asarray(buf[-window:]))
            preds.append(pred)
            buf.append(observed[h] if mode == "teacher_forced" else pred)
        out[ch] = np.asarray(preds)
    return ForecastSet(dates, out["open"], out["high"], out["low"], out["close"])


def compute_error_metrics(actual: Sequence[float], predicted: Sequence[float]) -> ErrorReport:
    y = np.asarray(actual, dtype=float)
    yhat = np.asarray(predicted, dtype=float)
    if len(y) != len(yhat) or len(y) == 0:
        raise LengthMismatch(f"lengths {len(y)} and {len(yhat)} must match and be non-zero")
    if np.any(y == 0):
        raise ZeroActual("MAPE undefined with zero actual values")
    err = y - yhat
    var_y = y.var()
    if var_y == 0:
        raise ZeroVariance("EVS undefined for constant actuals")
    mse = float(np.mean(err * err))
    return ErrorReport(
        mse=mse,
        rmse=float(np.sqrt(mse)),
        mae=float(np.mean(np.abs(err))),
        mape=float(np.mean(np.abs(err / y))),
        evs=float(1.0 - err.var() / var_y),
    )


def forecast_errors(forecast: ForecastSet, actuals: OhlcSeries) -> dict[str, ErrorReport]:
    n = len(forecast)
    return {ch: compute_error_metrics(actuals.channel(ch)[:n], forecast.channel(ch)) for ch in CHANNELS}


def error_table_csv(reports: Mapping[str, ErrorReport]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["channel", "mse", "rmse", "mae", "mape", "evs"])
    for ch, r in reports.items():
        writer.writerow([ch, *(repr(v) for v in r.as_dict().values())])
    return out.getvalue()
