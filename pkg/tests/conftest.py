import datetime as dt
import pathlib

import numpy as np
import pytest

from ohlcnet.market_data import OhlcBar, OhlcSeries, serialize_ohlc_csv


def business_days(start: dt.date, n: int) -> list[dt.date]:
    out, d = [], start
    while len(out) < n:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def synthetic_series(n: int = 300, seed: int = 0, start_price: float = 30.0) -> OhlcSeries:
    """Geometric random walk with consistent OHLC bars."""
    rng = np.random.default_rng(seed)
    close = start_price * np.exp(np.cumsum(rng.normal(0.0003, 0.02, n)))
    prev = np.concatenate([[start_price], close[:-1]])
    opn = prev * np.exp(rng.normal(0, 0.005, n))
    hi = np.maximum(opn, close) * (1 + np.abs(rng.normal(0, 0.01, n)))
    lo = np.minimum(opn, close) * (1 - np.abs(rng.normal(0, 0.01, n)))
    bars = [
        OhlcBar(d, float(o), float(h), float(l), float(c), float(c), float(v))
        for d, o, h, l, c, v in zip(business_days(dt.date(2015, 1, 5), n), opn, hi, lo, close,
                                    rng.integers(1e5, 1e6, n))
    ]
    return OhlcSeries(tuple(bars), "SYN")


@pytest.fixture
def series():
    return synthetic_series()


@pytest.fixture
def csv_file(tmp_path) -> pathlib.Path:
    path = tmp_path / "SYN.csv"
    path.write_text(serialize_ohlc_csv(synthetic_series()))
    return path


GOLDEN_TRADES = pathlib.Path(__file__).resolve().parents[1] / "src" / "ohlcnet" / "data" / "golden_trades.csv"


def golden_series(pad: int = 13) -> OhlcSeries:
    """Flat bars on November 2021 trading days carrying the golden-trade fill
    prices on the trade dates, preceded by ``pad`` filler bars."""
    import csv

    rows = list(csv.DictReader(GOLDEN_TRADES.open()))
    price = {}
    for r in rows:
        price[dt.date.fromisoformat(r["entry_date"])] = float(r["entry_price"])
        price[dt.date.fromisoformat(r["exit_date"])] = float(r["exit_price"])
    days = business_days(dt.date(2021, 11, 1), 17)  # 2021-11-01 .. 2021-11-23
    lead = business_days(dt.date(2021, 11, 1) - dt.timedelta(days=2 * pad + 7), 2 * pad + 7)
    lead = [d for d in lead if d < days[0]][-pad:] if pad else []
    bars, last = [], 40.0
    for d in lead:
        bars.append(OhlcBar(d, last, last, last, last))
    for d in days:
        last = price.get(d, last)
        bars.append(OhlcBar(d, last, last, last, last))
    return OhlcSeries(tuple(bars), "GOLD")


_acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
