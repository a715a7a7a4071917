"""Poisson solvers for plasma simulation: reference solvers, convolutional surrogates and coupled test cases."""

__version__ = "0.1.0"

from .field import AXISYMMETRIC, CARTESIAN, GridSpec, ScalarField, VectorField  # noqa: E402

__all__ = ["AXISYMMETRIC", "CARTESIAN", "GridSpec", "ScalarField", "VectorField", "__version__"]
