"""Reconstruct continuous transit-vehicle trajectories from GPS heartbeat data."""

__version__ = "0.1.0"
