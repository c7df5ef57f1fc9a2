"""Dice similarity scoring and per-case reports."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch
from .imagecore import GrayImage

CSV_COLUMNS = ("name", "dsi", "pred_area", "truth_area", "overlap")


def _on(mask) -> np.ndarray:
    if isinstance(mask, GrayImage):
        return mask.pixels != 0
    return np.asarray(mask) != 0


def dice(pred, truth) -> float:
    """``2 |pred & truth| / (|pred| + |truth|)``; 1.0 when both are empty.

    Any non-zero pixel counts as foreground.
    """
    p, t = _on(pred), _on(truth)
    if p.shape != t.shape:
        raise DimensionMismatch(f"mask shapes differ: {p.shape} vs {t.shape}")
    total = int(p.sum()) + int(t.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.count_nonzero(p & t)) / total


@dataclass(frozen=True)
class DiceEntry:
    name: str
    dsi: float
    pred_area: int
    truth_area: int
    overlap: int


@dataclass
class DiceReport:
    entries: list[DiceEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def to_json(self) -> dict:
        return {"entries": [asdict(e) for e in self.entries]}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for e in self.entries:
            writer.writerow([e.name, repr(e.dsi), e.pred_area, e.truth_area, e.overlap])
        return buf.getvalue()

    def write(self, path) -> None:
        """Write CSV when ``path`` ends in ``.csv``, JSON otherwise."""
        path = Path(path)
        if path.suffix.lower() == ".csv":
            path.write_text(self.to_csv())
        else:
            path.write_text(json.dumps(self.to_json(), indent=2) + "\n")


def score(name: str, pred, truth) -> DiceEntry:
    p, t = _on(pred), _on(truth)
    d = dice(p, t)
    return DiceEntry(name, d, int(p.sum()), int(t.sum()), int(np.count_nonzero(p & t)))


def report(cases) -> DiceReport:
    """One entry per ``(name, pred, truth)`` case, in input order."""
    return DiceReport([score(name, pred, truth) for name, pred, truth in cases])
