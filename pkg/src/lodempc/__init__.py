"""Constrained model predictive control as inference with linear-ODE Gaussian processes."""

__version__ = "0.1.0"
