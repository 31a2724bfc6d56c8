"""Numerical verification engine for Minkowski-type identities of hypersurfaces in cones."""

__version__ = "0.1.0"
