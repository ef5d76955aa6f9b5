"""Spectral geodesic dynamics on diffeomorphism groups of flat tori,
Fisher-Rao geometry of densities and optimal information transport."""

__version__ = "0.1.0"
