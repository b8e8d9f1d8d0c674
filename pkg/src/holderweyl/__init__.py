"""Eigenvalue counting for Neumann Schrödinger operators on rough planar domains."""
from .spectral import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
