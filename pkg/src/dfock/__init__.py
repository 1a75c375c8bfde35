"""Numerical tools for doubling Fock spaces."""
__version__ = "0.1.0"
