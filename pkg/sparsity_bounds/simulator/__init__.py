"""Synthetic instances, estimators and Monte Carlo trials."""
