"""Embedded bitemporal property graph database."""
__version__ = "0.1.0"
