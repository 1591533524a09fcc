"""Truncated-Fock-space spectral toolkit for a two-spin hydrogen atom coupled to radiation."""

__version__ = "0.1.0"
