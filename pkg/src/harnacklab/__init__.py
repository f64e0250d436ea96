"""Numerical laboratory for Harnack, log-Sobolev, isoperimetric and transport
inequalities of diffusion semigroups under curvature-dimension bounds."""

__version__ = "0.1.0"
