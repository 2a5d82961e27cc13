"""OHLC price history: parsing, validation, slicing, returns and volatility."""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Literal, Union

import numpy as np

from .errors import (
    DuplicateDate,
    EmptySeries,
    InvalidSplit,
    MalformedRow,
    MissingColumn,
    SeriesTooShort,
    WindowTooLarge,
    ZeroVariance,
)

logger = logging.getLogger(__name__)

Channel = Literal["open", "high", "low", "close"]
CHANNELS: tuple[Channel, ...] = ("open", "high", "low", "close")

REQUIRED_COLUMNS = ("Date", "Open", "High", "Low", "Close")
CSV_HEADER = ("Date", "Open", "High", "Low", "Close", "Adj Close", "Volume")


@dataclass(frozen=True)
class OhlcBar:
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    adj_close: float | None = None
    volume: float | None = None

    def __post_init__(self):
        if not self.low > 0:
            raise ValueError(f"{self.date}: low must be positive, got {self.low}")
        if self.low > self.high:
            raise ValueError(f"{self.date}: low {self.low} above high {self.high}")
        for name in ("open", "close"):
            v = getattr(self, name)
            if not self.low <= v <= self.high:
                raise ValueError(f"{self.date}: {name} {v} outside [low, high]")
        if self.volume is not None and self.volume < 0:
            raise ValueError(f"{self.date}: negative volume")

    @property
    def flat(self) -> bool:
        """True for a bar without intrabar movement (low == high)."""
        return self.low == self.high

    def as_vector(self) -> np.ndarray:
        return np.array([self.open, self.high, self.low, self.close])


@dataclass(frozen=True)
class OhlcSeries:
    bars: tuple[OhlcBar, ...]
    symbol: str = ""

    def __post_init__(self):
        object.__setattr__(self, "bars", tuple(self.bars))
        for prev, cur in zip(self.bars, self.bars[1:]):
            if cur.date <= prev.date:
                raise ValueError(f"dates not strictly increasing at {cur.date}")

    def __len__(self) -> int:
        return len(self.bars)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return OhlcSeries(self.bars[idx], self.symbol)
        return self.bars[idx]

    def __iter__(self):
        return iter(self.bars)

    @property
    def dates(self) -> list[dt.date]:
        return [b.date for b in self.bars]

    def channel(self, name: Channel) -> np.ndarray:
        if name not in CHANNELS:
            raise KeyError(name)
        return np.array([getattr(b, name) for b in self.bars], dtype=float)

    def index_of(self, date: dt.date) -> int:
        lo, hi = 0, len(self.bars)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.bars[mid].date < date:
                lo = mid + 1
            else:
                hi = mid
        if lo == len(self.bars) or self.bars[lo].date != date:
            raise KeyError(date)
        return lo

    @property
    def flat_bars(self) -> list[dt.date]:
        return [b.date for b in self.bars if b.flat]


@dataclass(frozen=True)
class ReturnSeries:
    values: np.ndarray
    step: int
    channel: str
    dates: list[dt.date] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.values)


def _parse_float(raw: str, line: int, column: str) -> float:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise MalformedRow(line, f"unparseable {column} value {raw!r}") from None
    if not math.isfinite(value):
        raise MalformedRow(line, f"non-finite {column} value {raw!r}")
    return value


def _optional_float(row: list[str], col: dict[str, int], name: str, line: int) -> float | None:
    if name not in col or not row[col[name]].strip():
        return None
    return _parse_float(row[col[name]], line, name)


def parse_ohlc_csv(source: Union[bytes, str, IO], symbol: str = "") -> OhlcSeries:
    """Parse Yahoo-style CSV price history into an ascending ``OhlcSeries``.

    ``source`` may be raw bytes, text, or an open (binary or text) file.
    Extra columns are ignored; ``Adj Close`` and ``Volume`` are kept when
    present. Rows are re-sorted by date.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8-sig")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8-sig") if isinstance(raw, bytes) else raw
    text = text.lstrip("﻿")

    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise EmptySeries("input has no header row") from None
    missing = [c for c in REQUIRED_COLUMNS if c not in header]
    if missing:
        raise MissingColumn(f"missing column(s): {', '.join(missing)}")
    col = {name: header.index(name) for name in header}

    bars = []
    seen: dict[dt.date, int] = {}
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise MalformedRow(line, f"expected {len(header)} fields, got {len(row)}")
        try:
            date = dt.date.fromisoformat(row[col["Date"]].strip())
        except ValueError:
            raise MalformedRow(line, f"bad date {row[col['Date']]!r}") from None
        if date in seen:
            raise DuplicateDate(f"{date} on lines {seen[date]} and {line}")
        seen[date] = line
        prices = {
            name: _parse_float(row[col[name.capitalize()]], line, name)
            for name in ("open", "high", "low", "close")
        }
        adj = _optional_float(row, col, "Adj Close", line)
        vol = _optional_float(row, col, "Volume", line)
        try:
            bar = OhlcBar(date=date, adj_close=adj, volume=vol, **prices)
        except ValueError as exc:
            raise MalformedRow(line, str(exc)) from None
        if bar.flat:
            logger.warning("%s: flat bar (low == high) accepted", date)
        bars.append(bar)

    if not bars:
        raise EmptySeries("no data rows")
    bars.sort(key=lambda b: b.date)
    return OhlcSeries(tuple(bars), symbol)


def read_ohlc_csv(path, symbol: str | None = None) -> OhlcSeries:
    with open(path, "rb") as fh:
        data = fh.read()
    if symbol is None:
        import pathlib

        symbol = pathlib.Path(path).stem
    return parse_ohlc_csv(data, symbol)


def serialize_ohlc_csv(series: OhlcSeries) -> str:
    """Inverse of :func:`parse_ohlc_csv`; floats are written with ``repr`` so
    they round-trip exactly."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for b in series:
        writer.writerow([
            b.date.isoformat(),
            repr(b.open), repr(b.high), repr(b.low), repr(b.close),
            "" if b.adj_close is None else repr(b.adj_close),
            "" if b.volume is None else _fmt_volume(b.volume),
        ])
    return out.getvalue()


def _fmt_volume(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(v)


def split_series(series: OhlcSeries, validation_len: int) -> tuple[OhlcSeries, OhlcSeries]:
    n = len(series)
    if not 0 < validation_len < n:
        raise InvalidSplit(f"validation_len must be in (0, {n}), got {validation_len}")
    cut = n - validation_len
    return series[:cut], series[cut:]


def simple_returns(series: OhlcSeries, channel: Channel = "close", step: int = 1) -> ReturnSeries:
    if step < 1:
        raise ValueError("step must be >= 1")
    z = series.channel(channel)
    if len(z) <= step:
        raise SeriesTooShort(f"need more than {step} bars, got {len(z)}")
    values = (z[step:] - z[:-step]) / z[:-step]
    return ReturnSeries(values, step, channel, series.dates[step:])


def standardize_returns(r: ReturnSeries) -> ReturnSeries:
    v = np.asarray(r.values, dtype=float)
    if len(v) < 2:
        raise SeriesTooShort("need at least 2 returns")
    sigma = v.std(ddof=1)
    if sigma == 0 or not np.isfinite(sigma):
        raise ZeroVariance("returns have zero variance")
    return ReturnSeries((v - v.mean()) / sigma, r.step, r.channel, list(r.dates))


def rolling_volatility(r: ReturnSeries | Iterable[float], window: int) -> np.ndarray:
    """Sample standard deviation over each trailing ``window`` of returns."""
    v = np.asarray(r.values if isinstance(r, ReturnSeries) else list(r), dtype=float)
    if window < 2:
        raise ValueError("window must be >= 2")
    if len(v) < window:
        raise WindowTooLarge(f"window {window} exceeds series length {len(v)}")
    windows = np.lib.stride_tricks.sliding_window_view(v, window)
    vol = windows.std(axis=1, ddof=1)
    vol[np.ptp(windows, axis=1) == 0] = 0.0  # exact zero, not rounding residue
    return vol
