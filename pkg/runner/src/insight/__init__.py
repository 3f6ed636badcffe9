"""Isolated execution runtime and script-side helper toolkit."""

__version__ = "0.1.0"
