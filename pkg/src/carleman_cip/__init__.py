"""Globally convergent reconstruction of a 1D dielectric constant from
time-domain backscattering data."""

__version__ = "0.1.0"
