"""Map trade intents onto actual prices and score them."""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import NegativeBudget, NoTrades, SeriesTooShort, UndefinedRatio, UnknownDate
from .market_data import OhlcSeries

Sizing = Literal["one_share", "compounded"]
TRADING_DAYS = 252
RELATIVE_ZERO = 1e-12


@dataclass(frozen=True)
class TradeRecord:
    entry_date: dt.date
    exit_date: dt.date
    entry_price: float
    exit_price: float
    quantity: float
    profit: float
    return_pct: float


@dataclass(frozen=True)
class EquityCurve:
    dates: list[dt.date]
    equity: np.ndarray

    def __len__(self) -> int:
        return len(self.equity)

    def to_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["date", "equity"])
        for d, e in zip(self.dates, self.equity):
            writer.writerow([d.isoformat(), repr(float(e))])
        return out.getvalue()


@dataclass(frozen=True)
class RiskRatios:
    sharpe: float | None
    sortino: float | None
    calmar: float | None
    undefined: dict[str, str] = field(default_factory=dict)


@dataclass
class BacktestReport:
    trades: list[TradeRecord]
    equity_curve: EquityCurve
    total_return_pct: float
    win_rate: float | None
    expectancy: float | None
    sharpe: float | None
    sortino: float | None
    calmar: float | None
    max_drawdown: float
    best_trade_pct: float | None
    worst_trade_pct: float | None
    avg_trade_pct: float | None
    buy_hold_return_pct: float
    undefined: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "trades": len(self.trades),
            "total_return_pct": self.total_return_pct,
            "win_rate": self.win_rate,
            "expectancy": self.expectancy,
            "sharpe": self.sharpe,
            "sortino": self.sortino,
            "calmar": self.calmar,
            "max_drawdown": self.max_drawdown,
            "best_trade_pct": self.best_trade_pct,
            "worst_trade_pct": self.worst_trade_pct,
            "avg_trade_pct": self.avg_trade_pct,
            "buy_hold_return_pct": self.buy_hold_return_pct,
            "undefined": dict(sorted(self.undefined.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def trades_csv(self) -> str:
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["entry_date", "entry_price", "exit_date", "exit_price", "profit", "return_pct"])
        for t in self.trades:
            writer.writerow([t.entry_date.isoformat(), repr(t.entry_price), t.exit_date.isoformat(),
                             repr(t.exit_price), repr(t.profit), repr(t.return_pct)])
        return out.getvalue()


def _locate(series: OhlcSeries, date: dt.date) -> int:
    try:
        return series.index_of(date)
    except KeyError:
        raise UnknownDate(f"{date} not in price series") from None


def apply_trades(
    series: OhlcSeries,
    intents: Sequence[tuple[dt.date, dt.date]],
    budget: float = 100.0,
    sizing: Sizing = "one_share",
    commission_pct: float = 0.0,
    slippage_pct: float = 0.0,
    periods_per_year: int = TRADING_DAYS,
) -> BacktestReport:
    """Fill every intent at the close of its signal dates and mark to market.

    Slippage moves the buy fill up and the sell fill down; commission is a
    percentage of the fill charged on each side. Both are folded into the
    recorded entry/exit prices, so ``profit == (exit - entry) * quantity``.
    ``one_share`` trades a single share per intent; ``compounded`` invests
    the whole running equity.
    """
    if budget <= 0:
        raise NegativeBudget(f"budget must be positive, got {budget}")
    if sizing not in ("one_share", "compounded"):
        raise ValueError(f"unknown sizing {sizing!r}")
    close = series.channel("close")
    buy_cost = (1 + slippage_pct / 100) * (1 + commission_pct / 100)
    sell_cost = (1 - slippage_pct / 100) * (1 - commission_pct / 100)

    located = sorted((_locate(series, a), _locate(series, b)) for a, b in intents)
    for i, j in located:
        if j <= i:
            raise ValueError(f"exit {series.dates[j]} not after entry {series.dates[i]}")
    for (_, j0), (i1, _) in zip(located, located[1:]):
        if i1 < j0:
            raise ValueError("trade intents overlap")

    trades = []
    cash = float(budget)
    holding = np.zeros(len(series))
    cash_curve = np.empty(len(series))
    pending = iter(located)
    nxt = next(pending, None)
    open_trade = None  # (exit index, exit fill, quantity)
    for t in range(len(series)):
        if open_trade is not None and open_trade[0] == t:
            cash += open_trade[1] * open_trade[2]
            open_trade = None
        if nxt is not None and nxt[0] == t:
            i, j = nxt
            entry = close[i] * buy_cost
            exit_ = close[j] * sell_cost
            qty = 1.0 if sizing == "one_share" else cash / entry
            trades.append(TradeRecord(series.dates[i], series.dates[j], float(entry), float(exit_), float(qty),
                                      float((exit_ - entry) * qty), float((exit_ - entry) / entry * 100)))
            cash -= entry * qty
            open_trade = (j, exit_, qty)
            nxt = next(pending, None)
        if open_trade is not None:
            holding[t] = open_trade[2]
        cash_curve[t] = cash
    equity = cash_curve + holding * close
    curve = EquityCurve(series.dates, equity)

    ratios = risk_ratios(curve, periods_per_year) if len(curve) >= 3 else RiskRatios(
        None, None, None, {"sharpe": "too few points", "sortino": "too few points", "calmar": "too few points"})
    undefined = dict(ratios.undefined)
    if trades:
        er, wr, _, _ = expectancy_ratio(trades)
        rets = [t.return_pct for t in trades]
        best, worst, avg = max(rets), min(rets), float(np.mean(rets))
    else:
        er = wr = best = worst = avg = None
        undefined["expectancy"] = "no trades"
    return BacktestReport(
        trades=trades,
        equity_curve=curve,
        total_return_pct=float((equity[-1] - budget) / budget * 100),
        win_rate=wr,
        expectancy=er,
        sharpe=ratios.sharpe,
        sortino=ratios.sortino,
        calmar=ratios.calmar,
        max_drawdown=max_drawdown(curve),
        best_trade_pct=best,
        worst_trade_pct=worst,
        avg_trade_pct=avg,
        buy_hold_return_pct=buy_and_hold(series, budget) if len(series) >= 2 else 0.0,
        undefined=undefined,
    )


def _equity_values(equity) -> np.ndarray:
    return np.asarray(equity.equity if isinstance(equity, EquityCurve) else equity, dtype=float)


def max_drawdown(equity) -> float:
    """Largest relative fall from a running peak, in [0, 1]."""
    v = _equity_values(equity)
    if v.size == 0:
        raise ValueError("empty equity curve")
    peak = np.maximum.accumulate(v)
    return float(np.max((peak - v) / peak))


def period_returns(equity) -> np.ndarray:
    v = _equity_values(equity)
    return v[1:] / v[:-1] - 1.0


def sharpe_ratio(equity, periods_per_year: int = TRADING_DAYS) -> float:
    r = period_returns(equity)
    if len(r) < 2:
        raise UndefinedRatio("sharpe", "fewer than two returns")
    sd = r.std(ddof=1)
    # returns equal up to float rounding count as zero dispersion
    if sd == 0 or np.ptp(r) <= RELATIVE_ZERO * np.max(np.abs(r)):
        raise UndefinedRatio("sharpe", "returns have zero standard deviation")
    return float(r.mean() / sd * math.sqrt(periods_per_year))


def downside_deviation(r: np.ndarray) -> float:
    """Root mean square of the negative part of the returns (0 if none)."""
    neg = np.minimum(r, 0.0)
    return float(np.sqrt(np.mean(neg * neg)))


def sortino_ratio(equity, periods_per_year: int = TRADING_DAYS) -> float:
    r = period_returns(equity)
    if len(r) < 1:
        raise UndefinedRatio("sortino", "no returns")
    dd = downside_deviation(r)
    if dd == 0:
        raise UndefinedRatio("sortino", "no negative returns")
    return float(r.mean() / dd * math.sqrt(periods_per_year))


def calmar_ratio(equity, periods_per_year: int = TRADING_DAYS) -> float:
    r = period_returns(equity)
    if len(r) < 1:
        raise UndefinedRatio("calmar", "no returns")
    mdd = max_drawdown(equity)
    if mdd == 0:
        raise UndefinedRatio("calmar", "maximum drawdown is zero")
    return float(r.mean() * periods_per_year / mdd)


def risk_ratios(equity, periods_per_year: int = TRADING_DAYS) -> RiskRatios:
    """Sharpe, Sortino and Calmar; undefined ones are ``None`` with a reason."""
    if len(_equity_values(equity)) < 3:
        raise SeriesTooShort("need at least 3 equity points")
    values, undefined = {}, {}
    for name, fn in (("sharpe", sharpe_ratio), ("sortino", sortino_ratio), ("calmar", calmar_ratio)):
        try:
            values[name] = fn(equity, periods_per_year)
        except UndefinedRatio as exc:
            values[name] = None
            undefined[name] = exc.reason
    return RiskRatios(values["sharpe"], values["sortino"], values["calmar"], undefined)


def expectancy_ratio(trades: Sequence[TradeRecord]) -> tuple[float, float, float, float]:
    """``(ER, WR, mean_win, mean_loss)`` from per-trade percentage returns.

    Break-even trades count as losses of zero.
    """
    if not trades:
        raise NoTrades("expectancy needs at least one trade")
    rets = np.array([t.return_pct for t in trades], dtype=float)
    wins = rets[rets > 0]
    losses = rets[rets <= 0]
    wr = len(wins) / len(rets)
    mean_win = float(wins.mean()) if len(wins) else 0.0
    mean_loss = float(losses.mean()) if len(losses) else 0.0
    return wr * mean_win - (1 - wr) * abs(mean_loss), wr, mean_win, mean_loss


def buy_and_hold(series: OhlcSeries, budget: float = 100.0) -> float:
    """Percentage return of buying the first close and selling the last."""
    if len(series) < 2:
        raise SeriesTooShort("buy and hold needs at least 2 bars")
    c = series.channel("close")
    return float((c[-1] - c[0]) / c[0] * 100)


def read_trades_csv(text: str) -> list[tuple[dt.date, dt.date]]:
    """Intents from a CSV with ``entry_date`` and ``exit_date`` columns."""
    rows = csv.DictReader(io.StringIO(text))
    return [(dt.date.fromisoformat(r["entry_date"].strip()), dt.date.fromisoformat(r["exit_date"].strip())) for r in rows]
