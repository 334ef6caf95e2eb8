"""Excerpt informativeness measures and difference-in-differences estimators."""

__version__ = "0.1.0"
