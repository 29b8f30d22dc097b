"""Cooperative overloaded signaling in gridworlds: the Imagined-We model,
its baselines, and the simulation harness that compares them."""

__version__ = "0.1.0"
