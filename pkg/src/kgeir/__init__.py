"""Adaptive exercise selection driven by informativeness, knowledge coverage and cognitive diagnosis."""

__version__ = "0.1.0"
