"""Dynamics of a symmetric V-system strongly driven by a thermal bath."""

__version__ = "0.1.0"
