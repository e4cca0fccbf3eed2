"""Numerical laboratory for Kolmogorov operators -div(a grad) + b.grad with singular drifts."""

__version__ = "0.1.0"
