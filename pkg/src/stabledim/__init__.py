"""Numerical checks for stable-set dimensions of horseshoes and their tools."""

__version__ = "0.1.0"
