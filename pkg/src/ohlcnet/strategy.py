"""EMA / Triple-EMA indicators and the four-channel entry/exit rules."""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import EmptySeries, InsufficientBars, InvalidPeriod
from .market_data import CHANNELS

SignalKind = Literal["enter", "exit", "none"]


@dataclass(frozen=True)
class IndicatorSeries:
    period: int
    values: np.ndarray
    warmup_len: int

    def __len__(self) -> int:
        return len(self.values)

    @property
    def warmup_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.values), dtype=bool)
        mask[: self.warmup_len] = True
        return mask


@dataclass(frozen=True)
class Signal:
    date: dt.date
    kind: SignalKind


@dataclass(frozen=True)
class StrategyRuleSet:
    tema_period: int = 3

    def __post_init__(self):
        if self.tema_period < 2:
            raise InvalidPeriod("tema_period must be >= 2")


def _check(values, period: int) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise EmptySeries("indicator input is empty")
    if period < 1:
        raise InvalidPeriod(f"period must be >= 1, got {period}")
    return v


def _ema_values(v: np.ndarray, period: int) -> np.ndarray:
    alpha = 2.0 / (period + 1)
    out = np.empty_like(v)
    acc = v[0]
    for i, x in enumerate(v):
        acc = alpha * x + (1.0 - alpha) * acc if i else x
        out[i] = acc
    return out


def ema(values: Sequence[float], period: int) -> IndicatorSeries:
    """EMA seeded with the first value, smoothing factor 2 / (period + 1)."""
    v = _check(values, period)
    return IndicatorSeries(period, _ema_values(v, period), period - 1)


def tema(values: Sequence[float], period: int) -> IndicatorSeries:
    v = _check(values, period)
    e1 = _ema_values(v, period)
    e2 = _ema_values(e1, period)
    e3 = _ema_values(e2, period)
    return IndicatorSeries(period, 3 * e1 - 3 * e2 + e3, 3 * (period - 1))


def rule_signal(below: dict[str, bool], above: dict[str, bool]) -> SignalKind:
    """Combine per-channel comparisons against TEMA into one signal.

    Enter: (low below or high below) and (close below or open below).
    Exit mirrors it with "above". Both true at once cancels out.
    """
    enter = (below["low"] or below["high"]) and (below["close"] or below["open"])
    leave = (above["low"] or above["high"]) and (above["close"] or above["open"])
    if enter and not leave:
        return "enter"
    if leave and not enter:
        return "exit"
    return "none"


def evaluate_rules(forecast, rules: StrategyRuleSet = StrategyRuleSet(), history=None) -> list[Signal]:
    """Signals for every date of ``forecast``.

    ``history`` (any object with ``channel()`` and ``__len__``) is prepended
    before computing TEMA so the indicator can warm up on observed bars;
    bars still inside the warm-up produce no signal.
    """
    n_hist = 0 if history is None else len(history)
    warmup = 3 * (rules.tema_period - 1)
    if n_hist + len(forecast) <= warmup:
        raise InsufficientBars(f"need more than {warmup} bars for TEMA({rules.tema_period})")

    series = {}
    indicator = {}
    for ch in CHANNELS:
        x = np.asarray(forecast.channel(ch), dtype=float)
        if n_hist:
            x = np.concatenate([np.asarray(history.channel(ch), dtype=float), x])
        series[ch] = x
        indicator[ch] = tema(x, rules.tema_period).values

    signals = []
    for i, date in enumerate(forecast.dates):
        j = n_hist + i
        if j < warmup:
            signals.append(Signal(date, "none"))
            continue
        below = {ch: series[ch][j] < indicator[ch][j] for ch in CHANNELS}
        above = {ch: series[ch][j] > indicator[ch][j] for ch in CHANNELS}
        signals.append(Signal(date, rule_signal(below, above)))
    return signals


def signals_to_trades(signals: Sequence[Signal]) -> list[tuple[dt.date, dt.date]]:
    """Long-only state machine; an open position is closed on the last date."""
    trades = []
    entry = None
    for s in signals:
        if s.kind == "enter" and entry is None:
            entry = s.date
        elif s.kind == "exit" and entry is not None:
            trades.append((entry, s.date))
            entry = None
    if entry is not None and signals and signals[-1].date > entry:
        trades.append((entry, signals[-1].date))
    return trades


def signals_to_csv(signals: Sequence[Signal]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["date", "kind"])
    for s in signals:
        writer.writerow([s.date.isoformat(), s.kind])
    return out.getvalue()
