"""Particle smoother with linear-Bayes proposals for piecewise exponential hazard models."""

from ._core import Fit, PslibError, edm, fit, run_cli, simulate

__all__ = ["Fit", "PslibError", "edm", "fit", "run_cli", "simulate"]
