"""Certified chiral extensions of cubic toroids."""

__version__ = "0.1.0"
