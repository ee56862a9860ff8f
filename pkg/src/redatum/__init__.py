"""Redatuming of acoustic wavefields from Neumann-to-Dirichlet boundary data."""

__version__ = "0.1.0"
