"""Stochastic hypothesis scoring for multi-view human pose triangulation
and two-view relative camera pose estimation."""

__version__ = "0.1.0"
