"""Aspect sentiment triplet extraction with prompt attention and a grid GCN."""

__version__ = "0.1.0"
