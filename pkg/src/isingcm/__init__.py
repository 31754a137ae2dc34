"""Ising models on configuration-model random graphs: exact solutions, samplers and CLT checks."""

__version__ = "0.1.0"
