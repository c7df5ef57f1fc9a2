"""End-to-end segmentation: edge maps, LP per region, contour and filled mask."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from . import edgemap, ipsolve, lpbuild
from .edgemap import EdgePack, PointSample, Roi
from .errors import KTooLarge, NoEdges, SnakeLPError
from .imagecore import GrayImage

log = logging.getLogger(__name__)

DEFAULT_TILE = 64
MIN_TILE = 16
MIN_TILE_K = 4
UNTILED_MAX_K = 100
TAU_FRACTION = 0.3


@dataclass(frozen=True)
class SegmentConfig:
    """Pipeline settings.

    ``K=None`` picks the snake size automatically: with tiling every tile gets
    one snake point per edge pixel it holds (floor 4); without tiling
    ``K = min(100, M)``.  An explicit ``K`` is the total, split over tiles in
    proportion to their edge counts.  ``tau_match=None`` means
    ``TAU_FRACTION * R`` of each region's sample.
    """

    K: int | None = None
    t_budget: int = edgemap.DEFAULT_BUDGET
    theta: float = edgemap.DEFAULT_THETA
    min_component: int = edgemap.DEFAULT_MIN_COMPONENT
    tile: int | None = DEFAULT_TILE
    seed: int = 0
    tau_match: float | None = None
    close_iters: int = 2
    solver: ipsolve.SolveOptions = field(default_factory=ipsolve.SolveOptions)

    def __post_init__(self):
        if self.K is not None and self.K < 1:
            raise ValueError("K must be at least 1")
        if self.t_budget < 2 or (self.K is not None and self.t_budget <= self.K and self.tile is None):
            raise ValueError("t_budget must exceed K")
        if self.tile is not None and self.tile < MIN_TILE:
            raise ValueError(f"tile must be at least {MIN_TILE}")
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.tau_match is not None and self.tau_match < 0:
            raise ValueError("tau_match must be non-negative")
        if self.close_iters < 0:
            raise ValueError("close_iters must be non-negative")

    def to_json(self) -> dict:
        out = asdict(self)
        out["solver"] = asdict(self.solver)
        return out


@dataclass
class TileSummary:
    index: int
    roi: list[int]
    edge_count: int
    K: int = 0
    T: int = 0
    status: str = "skipped"
    iterations: int = 0
    objective: float | None = None
    contour_size: int = 0
    message: str = ""


@dataclass
class RoiResult:
    summary: TileSummary
    contour: list[tuple[int, int]] = field(default_factory=list)
    snake_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective_trace: list[float] = field(default_factory=list)


@dataclass
class SegmentationResult:
    config: SegmentConfig
    snake_values: np.ndarray
    contour: list[tuple[int, int]]
    mask: GrayImage
    objective_trace: list[float]
    tiles: list[TileSummary]

    def to_json(self, timings: dict | None = None) -> dict:
        return {
            "config": self.config.to_json(),
            "contour": [[r, c] for r, c in self.contour],
            "objective_trace": self.objective_trace,
            "tiles": [asdict(t) for t in self.tiles],
            "timings": timings,
        }


def init_snake(sample: PointSample, K: int, seed: int) -> np.ndarray:
    """Values of K distinct, uniformly chosen sample points.

    Zeros are nudged to ``1e-6 * R`` so the start point is strictly positive.
    """
    if K > sample.T:
        raise KTooLarge(f"K={K} exceeds the {sample.T} sample points")
    if K < 1:
        raise ValueError("K must be at least 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    pick = rng.permutation(sample.T)[:K]
    values = sample.values[pick].copy()
    R = float(sample.values.max() - sample.values.min())
    floor = 1e-6 * R if R > 0 else 1e-6
    values[values <= 0] = floor
    return values


def extract_contour(sample: PointSample, snake_values, tau_match: float) -> list[tuple[int, int]]:
    """Greedy value-snap of snake points onto distinct edge pixels.

    Snake k (in order) takes the unassigned edge pixel closest in value; ties
    go to the smallest ``(row, col)``.  Matches further than ``tau_match``
    are dropped and leave the pixel free.
    """
    coords = sample.edge_coords
    values = sample.edge_values
    order = np.lexsort((coords[:, 1], coords[:, 0]))
    coords, values = coords[order], values[order]
    free = np.ones(len(values), dtype=bool)
    out = []
    for pk in np.asarray(snake_values, dtype=np.float64):
        if not free.any():
            break
        gap = np.where(free, np.abs(values - pk), np.inf)
        j = int(np.argmin(gap))
        if gap[j] > tau_match:
            continue
        free[j] = False
        out.append((int(coords[j, 0]), int(coords[j, 1])))
    return out


def fill_contour(contour_mask: np.ndarray, close_iters: int = 2) -> np.ndarray:
    """Close small gaps (3x3, ``close_iters`` times), then fill everything the
    border flood fill cannot reach."""
    pad = close_iters + 1
    work = np.pad(np.asarray(contour_mask, dtype=bool), pad)
    if close_iters:
        work = ndimage.binary_closing(work, np.ones((3, 3), dtype=bool), iterations=close_iters)
    # outer padding ring is background and 4-connected to every border pixel
    labels, _ = ndimage.label(~work)
    background = labels == labels[0, 0]
    return ~background[pad:-pad, pad:-pad]


def contour_to_mask(contour, width: int, height: int, close_iters: int = 2) -> GrayImage:
    canvas = np.zeros((height, width), dtype=bool)
    if len(contour):
        rc = np.asarray(contour, dtype=np.int64).reshape(-1, 2)
        canvas[rc[:, 0], rc[:, 1]] = True
    return GrayImage.from_mask(fill_contour(canvas, close_iters))


def overlay(image: GrayImage, contour) -> GrayImage:
    out = image.pixels // 2
    if len(contour):
        rc = np.asarray(contour, dtype=np.int64).reshape(-1, 2)
        out[rc[:, 0], rc[:, 1]] = 255
    return GrayImage(out)


def _tile_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def segment_roi(pack: EdgePack, roi: Roi, cfg: SegmentConfig, K: int | None = None,
                index: int = 0) -> RoiResult:
    """Sample, build, solve and extract inside one region.

    Failures are recorded in the summary rather than raised.
    """
    roi.check(pack.width, pack.height)
    m_roi = int(np.count_nonzero(pack.binary.pixels[roi.slices] == 255))
    summary = TileSummary(index, roi.as_list(), m_roi)
    if m_roi == 0:
        summary.status, summary.message = "no_edges", "no edge pixels in roi"
        return RoiResult(summary)
    if K is None:
        K = cfg.K if cfg.K is not None else min(UNTILED_MAX_K, m_roi)
    seed = _tile_seed(cfg.seed, index)
    try:
        sample = edgemap.sample_points(pack, cfg.t_budget, roi, seed)
        K = min(K, sample.T)
        summary.K, summary.T = K, sample.T
        lp = lpbuild.build_lp(sample, K)
        snake0 = init_snake(sample, K, seed)
        x0 = lpbuild.initial_point(lp, snake0)
        outcome = ipsolve.solve(lp, x0, cfg.solver)
    except SnakeLPError as exc:
        summary.status, summary.message = type(exc).__name__, str(exc)
        log.warning("tile %d %s: %s", index, summary.status, exc)
        return RoiResult(summary)
    *_, snake = lp.columns.split(outcome.x)
    tau = cfg.tau_match if cfg.tau_match is not None else TAU_FRACTION * lp.constants.R
    contour = extract_contour(sample, snake, tau)
    summary.status = outcome.status.value
    summary.message = outcome.message
    summary.iterations = outcome.iterations
    summary.objective = outcome.objective
    summary.contour_size = len(contour)
    trace = [e.objective for e in outcome.trace]
    return RoiResult(summary, contour, snake.copy(), trace)


def tile_grid(roi: Roi, tile: int) -> list[Roi]:
    return [Roi(r, c, min(r + tile, roi.row1), min(c + tile, roi.col1))
            for r in range(roi.row0, roi.row1, tile)
            for c in range(roi.col0, roi.col1, tile)]


def tile_budgets(edge_counts, K_total: int | None) -> list[int]:
    """Snake size per tile: ``max(4, round(K_total * M_tile / M_total))``."""
    counts = np.asarray(edge_counts, dtype=np.int64)
    total = int(counts.sum())
    if K_total is None:
        K_total = total
    return [max(MIN_TILE_K, int(round(K_total * m / total))) if total else MIN_TILE_K
            for m in counts]


def _merge_traces(traces: list[list[float]]) -> list[float]:
    traces = [t for t in traces if t]
    if not traces:
        return []
    length = max(len(t) for t in traces)
    total = np.zeros(length)
    for t in traces:
        total += np.concatenate([t, np.full(length - len(t), t[-1])])
    return total.tolist()


def run(image: GrayImage, cfg: SegmentConfig | None = None, roi: Roi | None = None) -> SegmentationResult:
    cfg = cfg or SegmentConfig()
    pack = edgemap.build_edges(image, cfg.theta, cfg.min_component)
    roi = roi or Roi.full(image.width, image.height)
    roi.check(image.width, image.height)
    if cfg.tile is None:
        results = [segment_roi(pack, roi, cfg)]
    else:
        tiles = tile_grid(roi, cfg.tile)
        counts = [int(np.count_nonzero(pack.binary.pixels[t.slices] == 255)) for t in tiles]
        if sum(counts) == 0:
            raise NoEdges("roi contains no edge pixels")
        budgets = tile_budgets(counts, cfg.K)
        results = [segment_roi(pack, t, cfg, k, i) if m else
                   RoiResult(TileSummary(i, t.as_list(), 0, message="no edge pixels in tile"))
                   for i, (t, m, k) in enumerate(zip(tiles, counts, budgets))]
    contour = [pt for r in results for pt in r.contour]
    snake = np.concatenate([r.snake_values for r in results]) if results else np.zeros(0)
    mask = contour_to_mask(contour, image.width, image.height, cfg.close_iters)
    return SegmentationResult(cfg, snake, contour, mask,
                              _merge_traces([r.objective_trace for r in results]),
                              [r.summary for r in results])
