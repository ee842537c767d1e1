"""Monotone-metric volume elements and the thermodynamics built on them."""
__version__ = "0.1.0"
