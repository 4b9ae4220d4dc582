"""Darcy flow and heat transport on discrete fracture networks."""

__version__ = "0.1.0"
