import datetime as dt
import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ohlcnet.errors import EmptySeries, InsufficientBars, InvalidPeriod
from ohlcnet.forecasting import ForecastSet
from ohlcnet.strategy import (
    Signal, StrategyRuleSet, ema, evaluate_rules, rule_signal, signals_to_csv, signals_to_trades, tema,
)


def unrolled_ema(x, period):
    a = 2 / (period + 1)
    out = [x[0]]
    for v in x[1:]:
        out.append(a * v + (1 - a) * out[-1])
    return np.array(out)


def test_ema_fixed_point_identity_and_oracle():
    assert np.all(ema([4.2] * 10, 3).values == 4.2)
    x = np.random.default_rng(0).normal(size=100)
    assert np.array_equal(ema(x, 1).values, x)
    assert np.max(np.abs(ema(x, 3).values - unrolled_ema(x, 3))) <= 1e-12


def test_tema_definition_and_fixed_point():
    assert np.allclose(tema([7.0] * 12, 3).values, 7.0, atol=1e-12)
    x = np.random.default_rng(1).normal(size=100).cumsum()
    e1 = unrolled_ema(x, 4)
    e2 = unrolled_ema(e1, 4)
    e3 = unrolled_ema(e2, 4)
    assert np.max(np.abs(tema(x, 4).values - (3 * e1 - 3 * e2 + e3))) <= 1e-12


def test_tema_tracks_ramp():
    period, b = 3, 0.37
    y = 5 + b * np.arange(400)
    t = tema(y, period)
    assert t.warmup_len == 6 and t.warmup_mask.sum() == 6
    assert np.max(np.abs(t.values[50 * period:] - y[50 * period:])) < 1e-6 * abs(b)


def test_indicator_errors():
    with pytest.raises(EmptySeries):
        ema([], 3)
    with pytest.raises(InvalidPeriod):
        ema([1.0], 0)
    with pytest.raises(InvalidPeriod):
        StrategyRuleSet(1)


CH = ("low", "high", "close", "open")


def test_rule_truth_table():
    # enter iff (L or H) and (C or O) when comparing below; mirrored for above
    for bits in itertools.product([False, True], repeat=4):
        below = dict(zip(CH, bits))
        above = {k: not v for k, v in below.items()}
        L, H, C, O = bits
        enter = (L or H) and (C or O)
        leave = ((not L) or (not H)) and ((not C) or (not O))
        expect = "enter" if enter and not leave else "exit" if leave and not enter else "none"
        assert rule_signal(below, above) == expect, bits
        # precedence lock: and must not bind tighter than the grouping
        if bits == (True, False, False, False):
            assert (L or H and C or O) is True and rule_signal(below, above) != "enter"


def test_rule_extremes():
    t, f = dict.fromkeys(CH, True), dict.fromkeys(CH, False)
    assert rule_signal(t, f) == "enter"
    assert rule_signal(f, t) == "exit"
    assert rule_signal(f, f) == "none"


def forecast_from(close_path):
    c = np.asarray(close_path, dtype=float)
    dates = [dt.date(2021, 11, 1) + dt.timedelta(days=i) for i in range(len(c))]
    return ForecastSet(dates, c, c * 1.01, c * 0.99, c)


def test_evaluate_rules_warmup_and_direction():
    path = [10, 10, 10, 10, 10, 10, 10, 12, 13, 9, 8, 8.5]
    sig = evaluate_rules(forecast_from(path))
    assert len(sig) == len(path)
    assert all(s.kind == "none" for s in sig[:6])
    assert sig[7].kind == "exit" and sig[9].kind == "enter"
    with pytest.raises(InsufficientBars):
        evaluate_rules(forecast_from([1, 2, 3]))


def test_history_prefix_shortens_warmup():
    hist = forecast_from([10] * 6)
    sig = evaluate_rules(forecast_from([10, 12, 9]), StrategyRuleSet(3), hist)
    assert [s.kind for s in sig] == ["none", "exit", "enter"]


def d(i):
    return dt.date(2021, 11, i)


def test_signals_to_trades():
    assert signals_to_trades([Signal(d(1), "enter"), Signal(d(2), "exit")]) == [(d(1), d(2))]
    kinds = ["enter", "enter", "exit", "exit"]
    assert signals_to_trades([Signal(d(i + 1), k) for i, k in enumerate(kinds)]) == [(d(1), d(3))]
    assert signals_to_trades([Signal(d(1), "exit"), Signal(d(2), "enter"), Signal(d(3), "none")]) == [(d(2), d(3))]
    assert signals_to_trades([Signal(d(1), "none"), Signal(d(2), "enter")]) == []


@given(st.lists(st.sampled_from(["enter", "exit", "none"]), max_size=40))
@settings(max_examples=100, deadline=None)
def test_trades_never_overlap(kinds):
    trades = signals_to_trades([Signal(dt.date(2020, 1, 1) + dt.timedelta(days=i), k) for i, k in enumerate(kinds)])
    for a, b in trades:
        assert b > a
    for (_, b0), (a1, _) in zip(trades, trades[1:]):
        assert a1 > b0


def test_signals_csv():
    assert signals_to_csv([Signal(d(1), "enter")]) == "date,kind\n2021-11-01,enter\n"
