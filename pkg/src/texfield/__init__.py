"""Texture fields: continuous neural color functions over 3D space."""

__version__ = "0.1.0"
