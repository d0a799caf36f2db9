"""Numerical laboratory for Szego-kernel quantization of Legendrian tori in spheres."""

__version__ = "0.1.0"
