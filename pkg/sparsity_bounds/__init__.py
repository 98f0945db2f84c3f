"""Sparsity-pattern estimation bounds with diversity, and the simulations that check them."""

__version__ = "1.0.0"
__author__ = "Sparsity Bounds Team"
__description__ = "Rate-distortion bounds for joint sparsity-pattern recovery across J signal realizations"
