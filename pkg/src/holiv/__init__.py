"""Holonomy inversion toolkit: character-based conjugacy recovery, cocycles over
hyperbolic toral automorphisms, an approximate Livsic solver, and Wilson-loop
inversion on surface groups."""

__version__ = "0.1.0"
