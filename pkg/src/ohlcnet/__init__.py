"""OHLC price-action forecasting, baselines, TEMA trading rules and backtesting."""

__version__ = "0.1.0"
