"""Determinantal wave fields of random matrices and their topological defects."""

__version__ = "0.3.0"
