"""Numerical laboratory for the spatially homogeneous Landau equation."""

from ._backend import BACKEND
from .kernel import KernelParams
from .grid import VelocityGrid, ScalarField, CoefficientField, PointMeasure

__version__ = "0.1.0"
