"""Intraday functional time series forecasting with dynamic updating."""
