"""Exterior scattering in two dimensions with a non-singular Robin-type
artificial boundary condition and P1 finite elements."""

from .curves import ParametricCurve
from .kernels import KernelSet

__version__ = "0.1.0"

__all__ = ["ParametricCurve", "KernelSet", "__version__"]
