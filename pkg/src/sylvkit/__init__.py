"""Certified verification of Sylvester-type theorems on products of consecutive integers."""

__version__ = "0.1.0"
