"""Sphere cover lab: excursion counting, Galton-Watson laws and cover-time
experiments for Brownian motion on the two-dimensional sphere."""

__version__ = "0.1.0"
