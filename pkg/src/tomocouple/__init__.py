"""Parallel-beam projector/backprojector coupling laboratory."""

from tomocouple.core import Geometry, ShapeError, reconstruction_circle_mask, is_undersampled
from tomocouple.projectors import ProjectorKind, ProjectorPair, get_projector

__version__ = "0.1.0"

__all__ = [
    "Geometry",
    "ShapeError",
    "ProjectorKind",
    "ProjectorPair",
    "get_projector",
    "reconstruction_circle_mask",
    "is_undersampled",
]
