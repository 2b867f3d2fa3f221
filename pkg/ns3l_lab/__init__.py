"""Negative sampling for semi-supervised learning: a reproducible laboratory."""

__version__ = '0.1.0'
