"""Rotationally symmetric self-expanders of mean curvature flow."""
__version__ = "0.1.0"
