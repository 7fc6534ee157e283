"""Helipad detection, tracking, and visual-servoing landing stack."""

__version__ = "0.1.0"
