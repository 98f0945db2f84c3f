"""Curve generation, exports and run monitoring."""
