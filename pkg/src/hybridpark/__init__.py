"""Hybrid fuzzy control for autonomous parking, with a kinematic simulator."""

__version__ = "0.1.0"
