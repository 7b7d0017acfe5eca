"""Expressiveness-oriented audio feature extraction and emotion analysis."""

__version__ = "0.1.0"
