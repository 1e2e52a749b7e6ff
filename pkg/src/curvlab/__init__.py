"""curvlab: weak scalar curvature, metric mollification, background-anchored
parabolic metric flow, and its monotone monitors on periodic grids."""

from ._kernels import NAME as kernel_backend
from .grid import (
    ChristoffelField,
    CurvatureBundle,
    GridSpec,
    MetricField,
    ScalarField,
    SymTensorField,
    VectorField,
    flat_metric,
)

__version__ = "0.1.0"

__all__ = [
    "ChristoffelField",
    "CurvatureBundle",
    "GridSpec",
    "MetricField",
    "ScalarField",
    "SymTensorField",
    "VectorField",
    "flat_metric",
    "kernel_backend",
    "__version__",
]
