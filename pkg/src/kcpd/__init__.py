"""Kernel two-sample change-point detection with learned deep kernels."""

__version__ = "0.1.0"
