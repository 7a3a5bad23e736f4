"""Polyhedral invariant inference for linear loops by accelerating the
abstract semantics of matrix powers."""

__version__ = "0.1.0"
