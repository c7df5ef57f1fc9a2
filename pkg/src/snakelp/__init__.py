"""Image segmentation with a snake fitted by a linear program.

The pipeline turns an image into edge maps, samples model points, casts snake
fitting as a standard-form LP, solves it with affine scaling and snaps the
snake values back onto edge pixels to obtain a contour and a filled mask.
"""
from .edgemap import EdgePack, PointSample, Roi, build_edges, sample_points
from .errors import SnakeLPError
from .evaluate import DiceReport, dice, report
from .imagecore import FloatField, GrayImage, ShapeKind, generate_shape
from .ipsolve import SolveOptions, SolveOutcome, Status, oracle_solve, solve
from .lpbuild import LPStandardForm, build_lp, initial_point
from .segment import SegmentConfig, SegmentationResult, run

__version__ = "0.1.0"

__all__ = [
    "DiceReport", "EdgePack", "FloatField", "GrayImage", "LPStandardForm", "PointSample",
    "Roi", "SegmentConfig", "SegmentationResult", "ShapeKind", "SnakeLPError",
    "SolveOptions", "SolveOutcome", "Status", "build_edges", "build_lp", "dice",
    "generate_shape", "initial_point", "oracle_solve", "report", "run", "sample_points",
    "solve",
]
