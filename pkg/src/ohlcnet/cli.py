"""Command-line entry point: ``ohlcnet <command> [options]``.

Commands: ingest, analyze, arima, train, forecast, backtest, pipeline.
Every command writes its artifacts plus a ``run_manifest.json`` into the
output directory. Defaults can be supplied as a JSON file via ``--config``
or the ``OHLCNET_CONFIG`` environment variable; flags override both.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import pathlib
import sys
from dataclasses import dataclass, field

import numpy as np

from . import arima, backtest, forecasting, market_data, strategy, ts_analysis
from .charts import ChartSpec, Overlay, TradeMarker, emit_svg_chart
from .errors import OhlcNetError
from .market_data import CHANNELS, OhlcSeries
from .neuralnet import MlpConfig, load_model, save_model

logger = logging.getLogger("ohlcnet")

CONFIG_ENV = "OHLCNET_CONFIG"


@dataclass
class RunConfig:
    input: str | None = None
    symbol: str | None = None
    output: str = "out"
    validation_len: int = 30
    lag_window: int = 5
    horizon: int = 30
    tema_period: int = 3
    tema_history: int | None = None
    budget: float = 100.0
    seed: int = 0
    sizing: str = "one_share"
    mode: str = "teacher_forced"
    commission_pct: float = 0.0
    slippage_pct: float = 0.0
    trades_file: str | None = None
    models: str | None = None
    hidden: list[int] = field(default_factory=lambda: [150, 150])
    dropout: float = 0.2
    learning_rate: float = 1e-3
    epochs: int = 500
    patience: int = 50
    jobs: int = 1
    max_lag: int = 750
    vol_window: int = 21

    def validate(self) -> None:
        counts = ("validation_len", "lag_window", "horizon", "tema_period", "epochs", "jobs", "max_lag")
        for name in counts:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.horizon > self.validation_len:
            raise ValueError("horizon cannot exceed validation_len")
        if self.sizing not in ("one_share", "compounded"):
            raise ValueError("sizing must be one_share or compounded")
        if self.mode not in ("teacher_forced", "recursive"):
            raise ValueError("mode must be teacher or recursive")

    def mlp_config(self) -> MlpConfig:
        return MlpConfig(
            input_size=self.lag_window,
            hidden_sizes=tuple(self.hidden),
            dropout_rate=self.dropout,
            learning_rate=self.learning_rate,
            max_epochs=self.epochs,
            patience=self.patience,
            seed=self.seed,
        )


class Run:
    """Collects written artifacts for the manifest."""

    def __init__(self, command: str, config: RunConfig):
        self.command = command
        self.config = config
        self.out = pathlib.Path(config.output)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: dict[str, str] = {}
        self.results: dict = {}

    def write(self, name: str, content: str | bytes) -> pathlib.Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        data = content.encode("utf-8") if isinstance(content, str) else content
        path.write_bytes(data)
        self.artifacts[name] = hashlib.sha256(data).hexdigest()
        return path

    def manifest(self, status: str, error: str | None = None) -> None:
        doc = {
            "command": self.command,
            "status": status,
            "config": dataclasses.asdict(self.config),
            "artifacts": dict(sorted(self.artifacts.items())),
            "results": self.results,
        }
        if error:
            doc["error"] = error
        text = json.dumps(doc, indent=2, default=_json_default) + "\n"
        (self.out / "run_manifest.json").write_text(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "isoformat"):
        return o.isoformat()
    raise TypeError(type(o))


def _load(cfg: RunConfig) -> OhlcSeries:
    if not cfg.input:
        raise ValueError("--input is required")
    return market_data.read_ohlc_csv(cfg.input, cfg.symbol)


def _series_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(str(c) for c in r) for r in rows]
    return "\n".join(lines) + "\n"


# ---- commands -------------------------------------------------------------

def cmd_ingest(run: Run) -> None:
    series = _load(run.config)
    run.write("ohlc.csv", market_data.serialize_ohlc_csv(series))
    run.results["ingest"] = {
        "bars": len(series),
        "first_date": series.dates[0].isoformat(),
        "last_date": series.dates[-1].isoformat(),
        "flat_bars": [d.isoformat() for d in series.flat_bars],
    }


def cmd_analyze(run: Run) -> None:
    cfg = run.config
    series = _load(cfg)
    close = series.channel("close")
    adf = ts_analysis.adf_test(close)
    run.write("adf_report.txt", adf.report())
    max_lag = min(cfg.max_lag, len(close) - 1)
    run.write("acf.csv", ts_analysis.acf(close, max_lag).to_csv())
    run.write("pacf.csv", ts_analysis.pacf(close, min(max_lag, 40)).to_csv())
    for ch in CHANNELS:
        run.write(f"kde_{ch}.csv", ts_analysis.kde_density(series.channel(ch)).to_csv())
    rets = market_data.simple_returns(series, "close", 1)
    run.write("returns.csv", _series_csv(("date", "return"), ((d.isoformat(), repr(float(v))) for d, v in zip(rets.dates, rets.values))))
    vol = market_data.rolling_volatility(rets, cfg.vol_window)
    vol_dates = rets.dates[cfg.vol_window - 1:]
    run.write("volatility.csv", _series_csv(("date", "volatility"), ((d.isoformat(), repr(float(v))) for d, v in zip(vol_dates, vol))))
    run.results["adf"] = {
        "test_statistic": adf.test_statistic,
        "p_value": adf.p_value,
        "lags_used": adf.lags_used,
        "n_observations": adf.n_observations,
        "critical_values": adf.critical_values,
    }


def cmd_arima(run: Run) -> None:
    cfg = run.config
    series = _load(cfg)
    train, valid = market_data.split_series(series, cfg.validation_len)
    result = arima.stepwise_search(train.channel("close"))
    best = result.best
    run.write("arima_trace.csv", _series_csv(
        ("p", "d", "q", "with_drift", "aic"),
        ((o.p, o.d, o.q, str(o.with_drift).lower(), repr(a)) for o, a in result.trace)))
    run.write("arima_summary.txt", best.summary())
    fc = arima.forecast(best, cfg.horizon)
    dates = valid.dates[: cfg.horizon]
    run.write("arima_forecast.csv", _series_csv(("date", "close"), ((d.isoformat(), repr(float(v))) for d, v in zip(dates, fc.mean_path))))
    path = fc.mean_path
    run.results["arima"] = {
        "order": [best.order.p, best.order.d, best.order.q],
        "with_drift": best.order.with_drift,
        "aic": best.aic,
        "forecast": {"mean": float(path.mean()), "std": float(path.std(ddof=1)) if len(path) > 1 else 0.0,
                     "min": float(path.min()), "max": float(path.max())},
    }
    if cfg.horizon >= 2:
        err = forecasting.compute_error_metrics(valid.channel("close")[: cfg.horizon], path)
        run.write("arima_errors.csv", forecasting.error_table_csv({"close": err}))
        run.results["arima"]["errors"] = err.as_dict()


def _train_models(run: Run, train: OhlcSeries):
    cfg = run.config
    models, histories = forecasting.train_channel_models(train, cfg.mlp_config(), jobs=cfg.jobs)
    for ch in CHANNELS:
        run.write(f"models/{ch}.mlp", save_model(models[ch]))
        h = histories[ch]
        run.write(f"models/{ch}_history.csv", _series_csv(
            ("epoch", "train_mae", "validation_mae"),
            ((i + 1, repr(a), repr(b)) for i, (a, b) in enumerate(h.epoch_losses))))
    run.results["training"] = {ch: {"stopped_epoch": h.stopped_epoch, "best_epoch": h.best_epoch,
                                    "best_validation_mae": h.best_validation_loss}
                               for ch, h in histories.items()}
    return models


def _get_models(run: Run, train: OhlcSeries):
    cfg = run.config
    if cfg.models:
        base = pathlib.Path(cfg.models)
        return {ch: load_model((base / f"{ch}.mlp").read_bytes()) for ch in CHANNELS}
    return _train_models(run, train)


def cmd_train(run: Run) -> None:
    train, _ = market_data.split_series(_load(run.config), run.config.validation_len)
    _train_models(run, train)


def _forecast(run: Run, models, train: OhlcSeries, valid: OhlcSeries) -> forecasting.ForecastSet:
    cfg = run.config
    fc = forecasting.walk_forward_forecast(models, train, valid, cfg.horizon, cfg.mode, cfg.lag_window)
    run.write("forecast.csv", fc.to_csv())
    actual = valid[: cfg.horizon]
    if cfg.horizon >= 2:
        reports = forecasting.forecast_errors(fc, actual)
        run.write("forecast_errors.csv", forecasting.error_table_csv(reports))
        run.results["forecast_errors"] = {ch: r.as_dict() for ch, r in reports.items()}
    labels = [d.isoformat() for d in fc.dates]
    for ch in CHANNELS:
        run.write(f"charts/forecast_{ch}.svg", emit_svg_chart(ChartSpec(
            f"{ch} forecast vs actual",
            [Overlay("actual", actual.channel(ch)), Overlay("predicted", fc.channel(ch), dashed=True)],
            x_labels=labels)))
    return fc


def cmd_forecast(run: Run) -> None:
    cfg = run.config
    train, valid = market_data.split_series(_load(cfg), cfg.validation_len)
    _forecast(run, _get_models(run, train), train, valid)


def _backtest(run: Run, valid: OhlcSeries, intents) -> None:
    cfg = run.config
    report = backtest.apply_trades(valid, intents, cfg.budget, cfg.sizing, cfg.commission_pct, cfg.slippage_pct)
    run.write("backtest_report.json", report.to_json())
    run.write("trades.csv", report.trades_csv())
    run.write("equity.csv", report.equity_curve.to_csv())
    close = valid.channel("close")
    markers = []
    for t in report.trades:
        i, j = valid.index_of(t.entry_date), valid.index_of(t.exit_date)
        markers += [TradeMarker(i, close[i], "entry"), TradeMarker(j, close[j], "exit")]
    labels = [d.isoformat() for d in valid.dates]
    run.write("charts/equity.svg", emit_svg_chart(ChartSpec("equity", [Overlay("equity", report.equity_curve.equity)], x_labels=labels)))
    run.write("charts/trades.svg", emit_svg_chart(ChartSpec("trades on close", [Overlay("close", close)], markers, labels)))
    run.results["backtest"] = report.to_dict()


def _intents_from_signals(run: Run, fc: forecasting.ForecastSet, train: OhlcSeries):
    cfg = run.config
    n_hist = cfg.lag_window if cfg.tema_history is None else cfg.tema_history
    # short horizons borrow enough observed bars to clear the TEMA warm-up
    n_hist = min(len(train), max(n_hist, 3 * (cfg.tema_period - 1) + 1 - len(fc)))
    history = train[len(train) - n_hist:] if n_hist else None
    signals = strategy.evaluate_rules(fc, strategy.StrategyRuleSet(cfg.tema_period), history)
    run.write("signals.csv", strategy.signals_to_csv(signals))
    intents = strategy.signals_to_trades(signals)
    run.results["signals"] = {"trades": [[a.isoformat(), b.isoformat()] for a, b in intents]}
    return intents


def cmd_backtest(run: Run) -> None:
    cfg = run.config
    series = _load(cfg)
    train, valid = market_data.split_series(series, cfg.validation_len)
    valid = valid[: cfg.horizon]
    if cfg.trades_file:
        intents = backtest.read_trades_csv(pathlib.Path(cfg.trades_file).read_text())
    else:
        fc = forecasting.walk_forward_forecast(_get_models(run, train), train, valid, cfg.horizon, cfg.mode, cfg.lag_window)
        intents = _intents_from_signals(run, fc, train)
    _backtest(run, valid, intents)


def cmd_pipeline(run: Run) -> None:
    cfg = run.config
    series = _load(cfg)
    train, valid = market_data.split_series(series, cfg.validation_len)
    valid = valid[: cfg.horizon]
    if cfg.trades_file:
        intents = backtest.read_trades_csv(pathlib.Path(cfg.trades_file).read_text())
    else:
        fc = _forecast(run, _get_models(run, train), train, valid)
        intents = _intents_from_signals(run, fc, train)
    _backtest(run, valid, intents)


COMMANDS = {
    "ingest": cmd_ingest,
    "analyze": cmd_analyze,
    "arima": cmd_arima,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "backtest": cmd_backtest,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ohlcnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with RunConfig defaults")
        p.add_argument("--input", "-i")
        p.add_argument("--symbol")
        p.add_argument("--output", "-o")
        p.add_argument("--validation-len", dest="validation_len", type=int)
        p.add_argument("--window", dest="lag_window", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--tema-period", dest="tema_period", type=int)
        p.add_argument("--tema-history", dest="tema_history", type=int,
                       help="trailing history bars prepended before TEMA (default: --window)")
        p.add_argument("--budget", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--sizing", choices=["one_share", "compounded"])
        p.add_argument("--mode", choices=["teacher", "recursive"])
        p.add_argument("--commission", dest="commission_pct", type=float, help="percent per side")
        p.add_argument("--slippage", dest="slippage_pct", type=float, help="percent per fill")
        p.add_argument("--trades-file", dest="trades_file")
        p.add_argument("--models", help="directory with <channel>.mlp files; skips training")
        p.add_argument("--hidden", type=int, nargs="+")
        p.add_argument("--dropout", type=float)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--epochs", type=int)
        p.add_argument("--patience", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--max-lag", dest="max_lag", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    config_path = args.config or os.environ.get(CONFIG_ENV)
    if config_path:
        values.update(json.loads(pathlib.Path(config_path).read_text()))
    names = {f.name for f in dataclasses.fields(RunConfig)}
    for name in names:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if values.get("mode") == "teacher":
        values["mode"] = "teacher_forced"
    unknown = set(values) - names
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ValueError, OSError, TypeError) as exc:
        print(f"ohlcnet: config error: {exc}", file=sys.stderr)
        return 2
    run = Run(args.command, cfg)
    try:
        COMMANDS[args.command](run)
    except (OhlcNetError, OSError, ValueError, KeyError) as exc:
        run.manifest("incomplete", f"{type(exc).__name__}: {exc}")
        print(f"ohlcnet {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    run.manifest("complete")
    return 0


if __name__ == "__main__":
    sys.exit(main())
