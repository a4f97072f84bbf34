"""Entanglement-preservation measures for two-qubit quantum processes."""

__version__ = "0.1.0"
