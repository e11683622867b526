"""Finite-depth toolkit for G-odometers, transversal towers and Toeplitz arrays."""

__version__ = "0.1.0"
