"""Numerical laboratory for attracting sets of small topological degree on P^k."""

__version__ = "0.1.0"
