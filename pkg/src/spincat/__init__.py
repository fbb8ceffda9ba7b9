"""Spin-cat codes on qubit-controlled collective spins: simulation and analysis."""

__version__ = "0.1.0"
