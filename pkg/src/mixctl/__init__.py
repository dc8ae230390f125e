"""Majorization-based state conversion under unital Lindblad dissipation."""

__version__ = "0.1.0"
