"""Interpretable music tagging: perceptual features, boosted trees, explanations."""

__version__ = "0.1.0"
