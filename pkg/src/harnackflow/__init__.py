"""Curvature flows of convex hypersurfaces of revolution and Harnack diagnostics."""

__version__ = "0.1.0"
