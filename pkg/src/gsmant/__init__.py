"""Generalized scattering matrices of antennas from a MoM model."""

__version__ = "0.1.0"
