"""Detect where traceroute paths cross Internet exchange points."""

__version__ = "0.1.0"

from .lpm import BACKEND  # noqa: E402
