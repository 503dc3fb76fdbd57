"""Sample-based prophet inequality rules with exact and Monte Carlo verification."""

from .kernels import BACKEND
from .values import (ALMIGHTY, FIXED_ORDER, NEVER, Distribution, Empirical, Exponential, FiniteDiscrete,
                     Instance, PointMass, TaggedValue, Uniform, compare_tagged)

__version__ = "0.1.0"

__all__ = [
    "ALMIGHTY",
    "BACKEND",
    "Distribution",
    "Empirical",
    "Exponential",
    "FIXED_ORDER",
    "FiniteDiscrete",
    "Instance",
    "NEVER",
    "PointMass",
    "TaggedValue",
    "Uniform",
    "compare_tagged",
]
