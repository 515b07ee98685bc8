"""Desk-scale toolkit for temporally grounded video-language experiments."""

__version__ = "0.1.0"
