"""Continuous and binary edge maps, and the point sample the LP is built on."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import AllZero, BudgetTooSmall, EmptyRoi, NoEdges, TooSmall
from .imagecore import FloatField, GrayImage

DEFAULT_THETA = 0.4
DEFAULT_BUDGET = 1000
DEFAULT_MIN_COMPONENT = 16


@dataclass(frozen=True)
class Roi:
    """Half-open pixel rectangle ``[row0, row1) x [col0, col1)``."""

    row0: int
    col0: int
    row1: int
    col1: int

    @classmethod
    def full(cls, width: int, height: int) -> "Roi":
        return cls(0, 0, height, width)

    @property
    def shape(self) -> tuple[int, int]:
        return self.row1 - self.row0, self.col1 - self.col0

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.row0, self.row1), slice(self.col0, self.col1)

    def check(self, width: int, height: int) -> None:
        if self.row1 <= self.row0 or self.col1 <= self.col0:
            raise EmptyRoi(f"empty roi {self}")
        if self.row0 < 0 or self.col0 < 0 or self.row1 > height or self.col1 > width:
            raise EmptyRoi(f"roi {self} lies outside the {width}x{height} image")

    def as_list(self) -> list[int]:
        return [self.row0, self.col0, self.row1, self.col1]


@dataclass(frozen=True)
class EdgePack:
    continuous: FloatField
    binary: GrayImage

    def __post_init__(self):
        if self.continuous.values.shape != self.binary.pixels.shape:
            raise ValueError("continuous and binary maps must share dimensions")

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(self.binary.pixels == 255))

    @property
    def width(self) -> int:
        return self.binary.width

    @property
    def height(self) -> int:
        return self.binary.height


@dataclass(frozen=True, eq=False)
class PointSample:
    """Sampled pixels: ``coords[i] = (row, col)`` carries value ``values[i]``.

    ``edge_idx`` indexes the binary-edge pixels inside ``coords``/``values``.
    """

    coords: np.ndarray
    values: np.ndarray
    edge_idx: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.int64).reshape(-1, 2)
        values = np.asarray(self.values, dtype=np.float64)
        edge_idx = np.asarray(self.edge_idx, dtype=np.int64)
        if len(values) != len(coords):
            raise ValueError("coords and values differ in length")
        if len(np.unique(edge_idx)) != len(edge_idx):
            raise ValueError("edge indices must be distinct")
        if len(edge_idx) and (edge_idx.min() < 0 or edge_idx.max() >= len(values)):
            raise ValueError("edge index out of range")
        if len(np.unique(coords, axis=0)) != len(coords):
            raise ValueError("sample coordinates must be distinct")
        for name, arr in (("coords", coords), ("values", values), ("edge_idx", edge_idx)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def T(self) -> int:
        return len(self.values)

    @property
    def M(self) -> int:
        return len(self.edge_idx)

    @property
    def edge_values(self) -> np.ndarray:
        return self.values[self.edge_idx]

    @property
    def edge_coords(self) -> np.ndarray:
        return self.coords[self.edge_idx]

    @property
    def points(self) -> list[tuple[int, int, float]]:
        return [(int(r), int(c), float(v)) for (r, c), v in zip(self.coords, self.values)]


def gradient_magnitude(img: GrayImage) -> FloatField:
    """Sobel gradient magnitude of intensities scaled to [0, 1].

    Borders use edge-replicated padding.
    """
    if img.width < 3 or img.height < 3:
        raise TooSmall(f"gradient needs at least 3x3 pixels, got {img.width}x{img.height}")
    intensity = img.pixels.astype(np.float64) / 255.0
    gx = ndimage.sobel(intensity, axis=1, mode="nearest")
    gy = ndimage.sobel(intensity, axis=0, mode="nearest")
    return FloatField(np.hypot(gx, gy))


def normalize(field: FloatField) -> FloatField:
    peak = field.values.max()
    if not peak > 0:
        raise AllZero("cannot normalize a field whose maximum is not positive")
    out = field.values / peak
    # the peak itself divides to exactly 1.0, but clip guards against negative inputs
    return FloatField(np.clip(out, 0.0, 1.0))


def binary_edges(field: FloatField, theta: float = DEFAULT_THETA) -> GrayImage:
    """Mark every pixel whose normalized value is at least ``theta``."""
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    on = field.values >= theta
    if not on.any():
        raise NoEdges(f"no pixel reaches the edge threshold {theta}")
    return GrayImage.from_mask(on)


def drop_small_components(mask: GrayImage, min_size: int) -> GrayImage:
    """Clear 8-connected edge fragments with fewer than ``min_size`` pixels."""
    on = mask.pixels == 255
    if min_size <= 1:
        return mask
    labels, _ = ndimage.label(on, structure=np.ones((3, 3), dtype=bool))
    sizes = np.bincount(labels.ravel())
    keep = sizes >= min_size
    keep[0] = False
    kept = keep[labels]
    if not kept.any():
        raise NoEdges(f"no edge fragment has {min_size} or more pixels")
    return GrayImage.from_mask(kept)


def build_edges(img: GrayImage, theta: float = DEFAULT_THETA,
                min_component: int = DEFAULT_MIN_COMPONENT) -> EdgePack:
    """Normalized gradient map plus its thresholded, fragment-filtered mask."""
    try:
        continuous = normalize(gradient_magnitude(img))
    except AllZero as exc:
        raise NoEdges("image has no intensity variation") from exc
    binary = drop_small_components(binary_edges(continuous, theta), min_component)
    return EdgePack(continuous, binary)


def sample_points(pack: EdgePack, budget: int = DEFAULT_BUDGET, roi: Roi | None = None,
                  seed: int = 0) -> PointSample:
    """All binary-edge pixels of ``roi`` plus a seeded uniform background sample.

    Points are ordered edges first (row-major), then background (row-major), so
    ``edge_idx`` is ``0..M-1``.  When the roi holds at most ``budget`` pixels
    every pixel is taken.
    """
    roi = roi or Roi.full(pack.width, pack.height)
    roi.check(pack.width, pack.height)
    rs, cs = roi.slices
    on = pack.binary.pixels[rs, cs] == 255
    vals = pack.continuous.values[rs, cs]
    edge_rc = np.argwhere(on)
    back_rc = np.argwhere(~on)
    m = len(edge_rc)
    if m == 0:
        raise NoEdges(f"roi {roi.as_list()} contains no edge pixels")
    if budget <= m or len(back_rc) == 0:
        raise BudgetTooSmall(f"budget {budget} must exceed the {m} edge pixels in the roi "
                             "and leave room for background")
    n_back = min(budget - m, len(back_rc))
    if n_back < len(back_rc):
        rng = np.random.Generator(np.random.PCG64(seed))
        pick = np.sort(rng.choice(len(back_rc), size=n_back, replace=False))
        back_rc = back_rc[pick]
    local = np.vstack([edge_rc, back_rc])
    values = vals[local[:, 0], local[:, 1]]
    coords = local + np.array([roi.row0, roi.col0])
    return PointSample(coords, values, np.arange(m))
