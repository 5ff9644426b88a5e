"""Flatness-based null control of the 2-D heat equation with Neumann flux control."""

__version__ = "0.1.0"
