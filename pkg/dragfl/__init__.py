"""Federated learning simulator with divergence-based adaptive aggregation (DRAG)."""

__version__ = "0.1.0"
