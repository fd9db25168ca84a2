"""Projection workbench: generate, score, rate, and rank 2-D projections."""

__version__ = "0.1.0"
