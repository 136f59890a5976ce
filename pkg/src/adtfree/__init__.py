"""Removal of algebraic data types from constrained Horn clauses."""

__version__ = "0.1.0"
