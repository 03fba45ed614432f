"""Workbench for conventional and knowledge-based (non-deterministic) SECD machines."""

__version__ = "0.1.0"
