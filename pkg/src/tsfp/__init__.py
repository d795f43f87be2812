"""Fingerprint tokens for time series."""
