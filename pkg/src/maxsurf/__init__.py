"""Maximal space-like surfaces in pseudo-hyperbolic space, with the
representation invariants and symmetric-space tools around them."""

__version__ = "0.1.0"
