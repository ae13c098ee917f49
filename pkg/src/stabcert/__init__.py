"""Stability certificates for parametric programs with disjunctive constraints."""

__version__ = "0.1.0"
