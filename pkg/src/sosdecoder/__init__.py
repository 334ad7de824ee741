"""Moment-hierarchy decoders for CSS codes, with exact baselines and a Monte-Carlo harness."""

from .codes import CssCode, build_code, build_color_code, build_rotated_surface
from .problem import MldInstance, PolyProblem, to_polynomial, to_qubo

__all__ = [
    "CssCode",
    "MldInstance",
    "PolyProblem",
    "build_code",
    "build_color_code",
    "build_rotated_surface",
    "to_polynomial",
    "to_qubo",
]

__version__ = "0.1.0"
