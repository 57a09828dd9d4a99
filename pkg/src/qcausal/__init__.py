"""Causal structure of quantum networks and their relativistic embeddings."""

__version__ = "0.1.0"
