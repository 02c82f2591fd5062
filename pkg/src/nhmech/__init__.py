"""Constrained mechanical systems on T*Q: flows, candidate one-form
verification, and exact-solution benchmarks for four classic examples."""

__version__ = "0.1.0"

from . import geometry, hj, integrate, mechanics, nonholo, systems  # noqa: F401
from ._kernels import HAVE_COMPILED  # noqa: F401
