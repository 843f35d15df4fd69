"""Multirate infinitesimal GARK time integrators."""

__version__ = "0.1.0"
