"""Weakly supervised construction of probabilistic knowledge graphs from incident reports."""

__version__ = "0.1.0"
