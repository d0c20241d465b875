"""Random k-cycle walks on the symmetric group: simulation and exact oracles."""

__version__ = "0.1.0"
