"""Deterministic simulator and protocol library for containerized in-storage
processing over a computing-enabled storage pool."""

__version__ = "0.1.0"
