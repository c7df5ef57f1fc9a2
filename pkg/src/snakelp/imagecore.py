"""Raster types, PGM/PFM file I/O, synthetic shapes and seeded Gaussian noise.

Images are held as 2-D numpy arrays indexed ``[row, col]`` (row-major, row 0
at the top).  Both raster types freeze their buffer on construction so they
can be shared freely.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadHeader, BadMagic, Truncated, TooSmall

MIN_SHAPE_DIM = 32


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale raster; also used for 0/255 masks."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"GrayImage needs a non-empty 2-D array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.all(np.isfinite(arr)) or arr.min() < 0 or arr.max() > 255:
                raise ValueError("GrayImage values must lie in [0, 255]")
            if not np.array_equal(arr, np.round(arr)):
                raise ValueError("GrayImage values must be integers")
        arr = np.array(arr, dtype=np.uint8, order="C")
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def data(self) -> bytes:
        return self.pixels.tobytes()

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "GrayImage":
        return cls(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))

    def as_bool(self) -> np.ndarray:
        return self.pixels > 0

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class FloatField:
    """Per-pixel real values, e.g. a gradient magnitude map."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, order="C")
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"FloatField needs a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("FloatField values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def data(self) -> np.ndarray:
        return self.values.ravel()

    def is_normalized(self) -> bool:
        return bool(self.values.min() >= 0.0 and self.values.max() <= 1.0)

    def __eq__(self, other):
        if not isinstance(other, FloatField):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None


# ---------------------------------------------------------------------------
# file formats

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_header_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    tokens = []
    pos = 0
    for _ in range(count):
        m = _TOKEN.match(buf, pos)
        if m is None:
            raise BadHeader("header ended early")
        tokens.append(m.group(1))
        pos = m.end()
    # exactly one whitespace byte separates the header from the payload
    if pos >= len(buf) or not buf[pos:pos + 1].isspace():
        raise BadHeader("missing separator after header")
    return tokens, pos + 1


def _parse_dims(tokens: list[bytes]) -> tuple[int, int]:
    try:
        width, height = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise BadHeader(f"non-numeric dimensions: {tokens[:2]!r}") from exc
    if width <= 0 or height <= 0:
        raise BadHeader(f"dimensions must be positive, got {width}x{height}")
    return width, height


def load_pgm(path) -> GrayImage:
    """Read a binary (P5) PGM with maxval 255."""
    buf = Path(path).read_bytes()
    if buf[:2] != b"P5":
        raise BadMagic(f"{path}: expected P5 magic, got {buf[:2]!r}")
    tokens, offset = _read_header_tokens(buf[2:], 3)
    offset += 2
    width, height = _parse_dims(tokens)
    try:
        maxval = int(tokens[2])
    except ValueError as exc:
        raise BadHeader(f"non-numeric maxval {tokens[2]!r}") from exc
    if maxval != 255:
        raise BadHeader(f"only maxval 255 is supported, got {maxval}")
    need = width * height
    payload = buf[offset:offset + need]
    if len(payload) < need:
        raise Truncated(f"{path}: payload has {len(payload)} bytes, expected {need}")
    return GrayImage(np.frombuffer(payload, dtype=np.uint8).reshape(height, width))


def save_pgm(img: GrayImage, path) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.data)


def load_pfm(path) -> FloatField:
    """Read a single-channel PFM. Rows are stored bottom-to-top."""
    buf = Path(path).read_bytes()
    if buf[:2] != b"Pf":
        raise BadMagic(f"{path}: expected Pf magic, got {buf[:2]!r}")
    tokens, offset = _read_header_tokens(buf[2:], 3)
    offset += 2
    width, height = _parse_dims(tokens)
    try:
        scale = float(tokens[2])
    except ValueError as exc:
        raise BadHeader(f"non-numeric scale {tokens[2]!r}") from exc
    if scale == 0.0:
        raise BadHeader("scale must be non-zero")
    dtype = "<f4" if scale < 0 else ">f4"
    need = 4 * width * height
    payload = buf[offset:offset + need]
    if len(payload) < need:
        raise Truncated(f"{path}: payload has {len(payload)} bytes, expected {need}")
    rows = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return FloatField(np.flipud(rows).astype(np.float64))


def save_pfm(field: FloatField, path) -> None:
    header = f"Pf\n{field.width} {field.height}\n-1.0\n".encode("ascii")
    payload = np.flipud(field.values).astype("<f4").tobytes()
    Path(path).write_bytes(header + payload)


# ---------------------------------------------------------------------------
# synthetic shapes


class ShapeKind(str, enum.Enum):
    ARROW = "arrow"
    HEART = "heart"
    RECTANGLE = "rectangle"
    STAR = "star"
    MULTI = "multi"


def fill_polygon(vertices, width: int, height: int) -> np.ndarray:
    """Even-odd scanline fill sampled at pixel centres.

    Pixel ``(r, c)`` is sampled at ``(x, y) = (c + 0.5, r + 0.5)``.  A centre
    lying exactly on an edge counts as inside.
    """
    pts = np.asarray(vertices, dtype=np.float64)
    out = np.zeros((height, width), dtype=bool)
    x1, y1 = pts[:, 0], pts[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    sloped = y1 != y2
    for r in range(height):
        y = r + 0.5
        hit = sloped & (np.minimum(y1, y2) <= y) & (y < np.maximum(y1, y2))
        xs = np.sort(x1[hit] + (y - y1[hit]) * (x2[hit] - x1[hit]) / (y2[hit] - y1[hit]))
        for xl, xr in zip(xs[0::2], xs[1::2]):
            c0 = max(math.ceil(xl - 0.5), 0)
            c1 = min(math.floor(xr - 0.5), width - 1)
            if c0 <= c1:
                out[r, c0:c1 + 1] = True
        # horizontal edges passing exactly through this row of centres
        flat = ~sloped & (y1 == y)
        for a, b in zip(x1[flat], x2[flat]):
            c0 = max(math.ceil(min(a, b) - 0.5), 0)
            c1 = min(math.floor(max(a, b) - 0.5), width - 1)
            if c0 <= c1:
                out[r, c0:c1 + 1] = True
    return out


def _centered(vertices: np.ndarray, cx: float, cy: float) -> np.ndarray:
    lo, hi = vertices.min(axis=0), vertices.max(axis=0)
    return vertices - (lo + hi) / 2.0 + np.array([cx, cy])


def _star_vertices(cx, cy, outer, inner) -> np.ndarray:
    # first tip points straight up (image y grows downward)
    angles = -np.pi / 2 + np.arange(10) * np.pi / 5
    radii = np.where(np.arange(10) % 2 == 0, outer, inner)
    pts = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
    return _centered(pts, cx, cy)


def _arrow_vertices(cx, cy, size) -> np.ndarray:
    # right-pointing arrow: shaft 0.375 x 0.18, head 0.275 x 0.44 (units of size)
    unit = np.array([
        (-0.325, -0.09), (0.05, -0.09), (0.05, -0.22), (0.325, 0.0),
        (0.05, 0.22), (0.05, 0.09), (-0.325, 0.09),
    ])
    return _centered(unit * size, cx, cy)


def _rect_vertices(x0, y0, x1, y1) -> np.ndarray:
    return np.array([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], dtype=np.float64)


# Vertical extent of the implicit heart curve, found numerically once.
_HEART_Y = (-1.0, 1.236)
_HEART_X = 1.14


def _heart_mask(width, height, cx, cy, size) -> np.ndarray:
    span = _HEART_Y[1] - _HEART_Y[0]
    scale = size / span
    rows, cols = np.mgrid[0:height, 0:width]
    x = (cols + 0.5 - cx) / scale
    # flip so the lobes sit at the top of the image
    y = -(rows + 0.5 - cy) / scale + (_HEART_Y[0] + _HEART_Y[1]) / 2.0
    return (x * x + y * y - 1.0) ** 3 - x * x * y ** 3 <= 0.0


def generate_shape(kind: ShapeKind | str, width: int, height: int) -> GrayImage:
    """Rasterize one of the benchmark shapes as a 0/255 image, foreground 255."""
    kind = ShapeKind(kind)
    if width < MIN_SHAPE_DIM or height < MIN_SHAPE_DIM:
        raise TooSmall(f"shapes need at least {MIN_SHAPE_DIM}x{MIN_SHAPE_DIM}, got {width}x{height}")
    s = min(width, height)
    cx, cy = width / 2.0, height / 2.0
    if kind is ShapeKind.RECTANGLE:
        mask = fill_polygon(_rect_vertices(0.25 * width, 0.25 * height,
                                           0.75 * width, 0.75 * height), width, height)
    elif kind is ShapeKind.STAR:
        mask = fill_polygon(_star_vertices(cx, cy, 0.35 * s, 0.14 * s), width, height)
    elif kind is ShapeKind.ARROW:
        mask = fill_polygon(_arrow_vertices(cx, cy, s), width, height)
    elif kind is ShapeKind.HEART:
        mask = _heart_mask(width, height, cx, cy, 0.6 * s)
    else:
        mask = fill_polygon(_star_vertices(0.24 * width, 0.32 * height, 0.23 * s, 0.092 * s),
                            width, height)
        mask |= fill_polygon(_arrow_vertices(0.7 * width, 0.3 * height, 0.6 * s), width, height)
        mask |= fill_polygon(_rect_vertices(0.2 * width, 0.65 * height,
                                            0.8 * width, 0.88 * height), width, height)
    return GrayImage.from_mask(mask)


# ---------------------------------------------------------------------------
# noise

_TWO_POW_M53 = 2.0 ** -53


def standard_normals(count: int, seed: int) -> np.ndarray:
    """Deterministic N(0, 1) draws: PCG64 raw 64-bit words + Box-Muller.

    Each pair of words ``(r1, r2)`` maps to ``u1 = ((r1 >> 11) + 1) * 2**-53``
    in (0, 1] and ``u2 = (r2 >> 11) * 2**-53`` in [0, 1); the pair yields
    ``sqrt(-2 ln u1) * (cos 2pi u2, sin 2pi u2)``, emitted in that order.
    """
    pairs = (count + 1) // 2
    raw = np.random.PCG64(seed).random_raw(2 * pairs)
    u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_POW_M53
    u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53
    radius = np.sqrt(-2.0 * np.log(u1))
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(2.0 * np.pi * u2)
    out[1::2] = radius * np.sin(2.0 * np.pi * u2)
    return out[:count]


def add_gaussian_noise(img: GrayImage, sigma: float, seed: int) -> GrayImage:
    """Add zero-mean Gaussian noise, then round (half to even) and clamp to [0, 255]."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return img
    noise = standard_normals(img.width * img.height, seed).reshape(img.height, img.width)
    noisy = np.rint(img.pixels.astype(np.float64) + sigma * noise)
    return GrayImage(np.clip(noisy, 0, 255).astype(np.uint8))
