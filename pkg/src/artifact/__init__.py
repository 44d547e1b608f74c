"""Vanishing orders at line intersections, CGO corner asymptotics and polygonal scattering."""

from __future__ import annotations

from .expansion import AtLeast, Expansion, Finite, Infinite, VanishingOrder
from .lines import IRRATIONAL, NODAL, SINGULAR, AngleClass, LineCondition, Segment, classify_angle, impedance
from .scatter import MeshConfig, PlaneWave, PointSource, PolygonalObstacle, solve_forward
from .vanishing import CornerConfig, predict, run_recursion

__version__ = "0.1.0"

__all__ = [
    "AngleClass",
    "AtLeast",
    "CornerConfig",
    "Expansion",
    "Finite",
    "IRRATIONAL",
    "Infinite",
    "LineCondition",
    "MeshConfig",
    "NODAL",
    "PlaneWave",
    "PointSource",
    "PolygonalObstacle",
    "SINGULAR",
    "Segment",
    "VanishingOrder",
    "classify_angle",
    "impedance",
    "predict",
    "run_recursion",
    "solve_forward",
]
