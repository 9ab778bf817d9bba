"""Riemann problems in FPU chains and the p-system."""

__version__ = "0.1.0"
