"""Simulation and exact analysis of load balancing and maximum processes on graphs."""

from .graph import Graph

__all__ = ["Graph"]
__version__ = "0.1.0"
