"""Correlated steady states and emission spectra of pumped and probed spin-F ensembles."""

__version__ = "0.1.0"
