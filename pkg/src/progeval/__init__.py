"""Synthetic program evaluation with character-level deep LSTMs."""

__version__ = "0.1.0"
