"""Dyadic calculus of charges on the unit cube."""

__version__ = "0.1.0"
