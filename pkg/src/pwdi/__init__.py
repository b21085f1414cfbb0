"""Planewave density interpolation solvers for exterior Helmholtz scattering.

Nystrom (Chebyshev patches) and P1 Galerkin boundary element discretizations
of the combined-field equations for sound-soft and sound-hard obstacles.
"""

__version__ = "0.1.0"
