"""Quantum walks with classical randomness and detectors of their localization transition."""

__version__ = "0.1.0"
