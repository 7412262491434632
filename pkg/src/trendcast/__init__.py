"""trendcast: forecasting the future popularity of scientific topics."""

__version__ = "0.1.0"
