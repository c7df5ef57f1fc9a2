"""``snakelp`` command-line front end.

Exit codes: 0 success, 1 runtime failure, 2 bad flags or malformed input.
Diagnostics go to stderr; verbosity follows ``SNAKELP_LOG``
(error, warn, info, debug; default warn).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from . import edgemap, evaluate, imagecore, ipsolve, lpbuild, segment
from .edgemap import Roi
from .errors import SnakeLPError

log = logging.getLogger("snakelp")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
              "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    """Flag or input-format problem; exits with status 2."""


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _nonneg_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not np.isfinite(value) or value < 0:
        raise argparse.ArgumentTypeError(f"must be a finite non-negative number, got {text}")
    return value


def _theta(text: str) -> float:
    value = _nonneg_float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError(f"theta must lie in (0, 1], got {text}")
    return value


def _roi(text: str) -> Roi:
    parts = text.split(",")
    try:
        r0, c0, r1, c1 = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"roi must be row0,col0,row1,col1; got {text!r}") from None
    return Roi(r0, c0, r1, c1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snakelp", description="LP snake segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic shape and its truth mask")
    p.add_argument("--shape", required=True, choices=[k.value for k in imagecore.ShapeKind])
    p.add_argument("--width", type=_positive_int, default=400)
    p.add_argument("--height", type=_positive_int, default=320)
    p.add_argument("--noise-sigma", type=_nonneg_float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True, help="image PGM")
    p.add_argument("--truth", help="exact truth mask PGM")

    p = sub.add_parser("edgemap", help="continuous (PFM) and binary (PGM) edge maps")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--theta", type=_theta, default=edgemap.DEFAULT_THETA)
    p.add_argument("--min-component", type=int, default=edgemap.DEFAULT_MIN_COMPONENT)
    p.add_argument("--cont-out", help="continuous map PFM")
    p.add_argument("--bin-out", help="binary map PGM")

    p = sub.add_parser("segment", help="run the full segmentation pipeline")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--roi", type=_roi, help="row0,col0,row1,col1 (half-open)")
    p.add_argument("--k", type=_positive_int, help="total snake count")
    p.add_argument("--t-budget", type=_positive_int, default=edgemap.DEFAULT_BUDGET)
    tiles = p.add_mutually_exclusive_group()
    tiles.add_argument("--tile", type=_positive_int,
                       help=f"tile side in pixels (default {segment.DEFAULT_TILE})")
    tiles.add_argument("--no-tile", action="store_true", help="solve the roi as one LP")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=_theta, default=edgemap.DEFAULT_THETA)
    p.add_argument("--min-component", type=int, default=edgemap.DEFAULT_MIN_COMPONENT)
    p.add_argument("--tau-match", type=_nonneg_float)
    p.add_argument("--max-iter", type=_positive_int, default=ipsolve.SolveOptions.max_iter)
    p.add_argument("--out-json")
    p.add_argument("--mask-out")
    p.add_argument("--overlay-out")
    p.add_argument("--timings", action="store_true",
                   help="record wall-clock timings in the JSON (output no longer reproducible)")

    p = sub.add_parser("evaluate", help="Dice similarity of predicted vs truth masks")
    p.add_argument("--pred", required=True, nargs="+")
    p.add_argument("--truth", required=True, nargs="+")
    p.add_argument("--name", nargs="+", help="case names (default: prediction file names)")
    p.add_argument("--out", help=".csv or .json report (default: JSON on stdout)")

    p = sub.add_parser("solve-lp", help="solve a JSON LP dump with affine scaling")
    p.add_argument("lp_json")
    p.add_argument("--out", help="outcome JSON (default: stdout)")
    p.add_argument("--max-iter", type=_positive_int, default=ipsolve.SolveOptions.max_iter)
    return parser


def _emit(doc: dict, path: str | None) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_synth(args) -> int:
    truth = imagecore.generate_shape(args.shape, args.width, args.height)
    img = imagecore.add_gaussian_noise(truth, args.noise_sigma, args.seed) if args.noise_sigma else truth
    imagecore.save_pgm(img, args.out)
    if args.truth:
        imagecore.save_pgm(truth, args.truth)
    return 0


def cmd_edgemap(args) -> int:
    pack = edgemap.build_edges(imagecore.load_pgm(args.input), args.theta, args.min_component)
    if args.cont_out:
        imagecore.save_pfm(pack.continuous, args.cont_out)
    if args.bin_out:
        imagecore.save_pgm(pack.binary, args.bin_out)
    log.info("%d edge pixels", pack.edge_count)
    return 0


def cmd_segment(args) -> int:
    try:
        cfg = segment.SegmentConfig(
            K=args.k, t_budget=args.t_budget, theta=args.theta,
            min_component=args.min_component, tile=None if args.no_tile else (args.tile or segment.DEFAULT_TILE),
            seed=args.seed, tau_match=args.tau_match,
            solver=ipsolve.SolveOptions(max_iter=args.max_iter))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    img = imagecore.load_pgm(args.input)
    start = time.perf_counter()
    result = segment.run(img, cfg, args.roi)
    elapsed = time.perf_counter() - start
    if args.out_json:
        timings = {"total_seconds": elapsed} if args.timings else None
        _emit(result.to_json(timings), args.out_json)
    if args.mask_out:
        imagecore.save_pgm(result.mask, args.mask_out)
    if args.overlay_out:
        imagecore.save_pgm(segment.overlay(img, result.contour), args.overlay_out)
    log.info("%d contour pixels in %.2fs", len(result.contour), elapsed)
    return 0


def cmd_evaluate(args) -> int:
    if len(args.pred) != len(args.truth):
        raise UsageError("--pred and --truth need the same number of files")
    names = args.name or [os.path.basename(p) for p in args.pred]
    if len(names) != len(args.pred):
        raise UsageError("--name needs one entry per prediction")
    cases = [(n, imagecore.load_pgm(p), imagecore.load_pgm(t))
             for n, p, t in zip(names, args.pred, args.truth)]
    rep = evaluate.report(cases)
    if args.out:
        rep.write(args.out)
    else:
        _emit(rep.to_json(), None)
    return 0


def cmd_solve_lp(args) -> int:
    with open(args.lp_json) as fh:
        text = fh.read()
    try:
        doc = json.loads(text)
        lp, x0 = lpbuild.lp_from_json(doc)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed LP file: {exc}") from exc
    opts = ipsolve.SolveOptions(max_iter=args.max_iter)
    outcome = ipsolve.solve(lp, x0, opts) if x0 is not None else ipsolve.solve_without_start(lp, opts)
    out = outcome.to_json()
    out["x"] = [float(v) for v in outcome.x]
    _emit(out, args.out)
    return 0


COMMANDS = {"synth": cmd_synth, "edgemap": cmd_edgemap, "segment": cmd_segment,
            "evaluate": cmd_evaluate, "solve-lp": cmd_solve_lp}


def _configure_logging() -> None:
    level = os.environ.get("SNAKELP_LOG", "warn").lower()
    if level not in LOG_LEVELS:
        raise UsageError(f"SNAKELP_LOG must be one of {', '.join(LOG_LEVELS)}; got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], stream=sys.stderr,
                        format="snakelp: %(levelname)s: %(message)s", force=True)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _configure_logging()
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"snakelp: error: {exc}", file=sys.stderr)
        return 2
    except (SnakeLPError, OSError) as exc:
        print(f"snakelp: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
