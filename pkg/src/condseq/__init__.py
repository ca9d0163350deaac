"""Conditional logics of sequences: models, bounded decision procedures and probabilities."""

__version__ = "0.1.0"
