"""Contextual ad serving with a linear click-through-rate model."""

__version__ = "0.1.0"
