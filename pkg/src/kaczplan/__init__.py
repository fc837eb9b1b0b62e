"""Constraint-manifold projection and constrained RRT planning for
cooperative multi-robot manipulation."""

__version__ = "0.1.0"
