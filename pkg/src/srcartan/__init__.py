"""Cartan equivalence method for sub-Riemannian contact structures."""

__version__ = "0.1.0"
