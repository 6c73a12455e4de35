"""Interpretable multiple-criteria sorting with interacting criteria."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__"]
