"""Ternary ECOC with optimized weighted decoding."""

__version__ = "0.1.0"
