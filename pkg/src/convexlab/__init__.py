"""Executable laboratory for convexity-testing hard instances and testers."""

from .rng import RngStream

__version__ = "0.1.0"

__all__ = ["RngStream", "__version__"]
