"""Model constants and the standard-form snake LP.

Given sample values ``P_t`` (``t < T``), edge values ``P_m`` (``m < M``) and a
snake size ``K``, the LP is::

    minimize    sum_t c_t sum_k (a_tk + b_tk)
    subject to  sum_k (a_tk + b_tk) - e_t = K R - K^2 c_t       (one row per t)
                a_tk - b_tk + P_k        = P_t                 (one row per (t, k))
                a, b, e, P >= 0

with ``R`` the value range of the sample and
``c_t = (R - mean_m |P_t - P_m|) / K``.

Row layout: the T "sum" rows first, then the (t, k) rows in t-major order.
Column layout: every ``a(t, k)`` (t-major), then every ``b(t, k)``, then
``e(t)``, then ``P(k)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sps
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .edgemap import PointSample
from .errors import (DegenerateEdgeMap, FactorizationFailure, NonPositiveComponent,
                     ZeroSnakeValue)


def _values(sample) -> np.ndarray:
    if isinstance(sample, PointSample):
        return sample.values
    return np.asarray(sample, dtype=np.float64)


def compute_R(sample) -> float:
    """Largest absolute difference between two sample values."""
    v = _values(sample)
    if len(v) < 2:
        raise DegenerateEdgeMap("need at least two points to measure a value range")
    r = float(v.max() - v.min())
    if r <= 0:
        raise DegenerateEdgeMap("all sample values are equal")
    return r


def mean_abs_deviation(points, refs) -> np.ndarray:
    """``out[i] = mean_j |points[i] - refs[j]|``."""
    points = np.asarray(points, dtype=np.float64)
    refs = np.asarray(refs, dtype=np.float64)
    out = np.empty(len(points))
    step = max(1, 4_000_000 // max(len(refs), 1))
    for i in range(0, len(points), step):
        out[i:i + step] = np.abs(points[i:i + step, None] - refs[None, :]).mean(axis=1)
    return out


def compute_ct(values, edge_values, R: float, K: int) -> np.ndarray:
    if K < 1:
        raise ValueError("K must be at least 1")
    if R <= 0:
        raise DegenerateEdgeMap("R must be positive")
    c = (R - mean_abs_deviation(values, edge_values)) / K
    # round-off can push the extremes a hair outside [0, R/K]
    return np.clip(c, 0.0, R / K)


@dataclass(frozen=True)
class ModelConstants:
    R: float
    K: int
    c: np.ndarray

    @property
    def T(self) -> int:
        return len(self.c)


@dataclass(frozen=True)
class EdgeAffinity:
    VE: np.ndarray
    VS: np.ndarray

    @property
    def dot(self) -> float:
        return float(self.VE @ self.VS)


def edge_affinity(values, edge_values, snake_values, R: float) -> EdgeAffinity:
    """Affinity of every sample point to the edge set and to the snake set."""
    VE = R - mean_abs_deviation(values, edge_values)
    VS = R - mean_abs_deviation(values, snake_values)
    return EdgeAffinity(VE, VS)


@dataclass(frozen=True)
class VarColumns:
    K: int
    T: int

    @property
    def n(self) -> int:
        return 2 * self.K * self.T + self.K + self.T

    def a(self, t, k):
        return np.asarray(t) * self.K + k

    def b(self, t, k):
        return self.K * self.T + np.asarray(t) * self.K + k

    def e(self, t):
        return 2 * self.K * self.T + np.asarray(t)

    def P(self, k):
        return 2 * self.K * self.T + self.T + np.asarray(k)

    def decode(self, col: int) -> tuple[str, int | None, int | None]:
        K, T = self.K, self.T
        if not 0 <= col < self.n:
            raise IndexError(col)
        if col < K * T:
            return "a", col // K, col % K
        if col < 2 * K * T:
            return "b", (col - K * T) // K, (col - K * T) % K
        if col < 2 * K * T + T:
            return "e", col - 2 * K * T, None
        return "P", None, col - 2 * K * T - T

    def encode(self, kind: str, t: int | None = None, k: int | None = None) -> int:
        return int({"a": lambda: self.a(t, k), "b": lambda: self.b(t, k),
                    "e": lambda: self.e(t), "P": lambda: self.P(k)}[kind]())

    def split(self, x: np.ndarray):
        """Views ``(a, b, e, P)`` of a full variable vector; a and b are T x K."""
        K, T = self.K, self.T
        return (x[:K * T].reshape(T, K), x[K * T:2 * K * T].reshape(T, K),
                x[2 * K * T:2 * K * T + T], x[2 * K * T + T:])


@dataclass(eq=False)
class LPStandardForm:
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    b: np.ndarray
    c: np.ndarray
    columns: VarColumns
    constants: ModelConstants
    point_values: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.b)

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def triplets(self):
        return zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist())

    @cached_property
    def A(self) -> sps.csr_matrix:
        return sps.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.m, self.n))

    def direction_solver(self):
        return SnakeDirections(self)


def assemble_lp(values, c, R: float, K: int) -> LPStandardForm:
    """Lay out the standard-form LP for given sample values and weights ``c``."""
    values = np.asarray(values, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    T = len(values)
    if K < 1 or T < 1:
        raise ValueError("need K >= 1 and T >= 1")
    cols = VarColumns(K, T)
    t = np.repeat(np.arange(T), K)
    k = np.tile(np.arange(K), T)
    tk_row = T + t * K + k
    rows = np.concatenate([t, t, np.arange(T), tk_row, tk_row, tk_row])
    colidx = np.concatenate([cols.a(t, k), cols.b(t, k), cols.e(np.arange(T)),
                             cols.a(t, k), cols.b(t, k), cols.P(k)])
    vals = np.concatenate([np.ones(2 * K * T), -np.ones(T),
                           np.ones(K * T), -np.ones(K * T), np.ones(K * T)])
    m = T + K * T
    flat = rows.astype(np.int64) * cols.n + colidx
    if len(np.unique(flat)) != len(flat):
        raise AssertionError("duplicate (row, col) entry in LP assembly")
    rhs = np.concatenate([K * R - K * K * c, np.repeat(values, K)])
    cost = np.concatenate([np.repeat(c, K), np.repeat(c, K), np.zeros(T + K)])
    assert len(rhs) == m and len(cost) == cols.n
    return LPStandardForm(rows, colidx, vals, rhs, cost, cols,
                          ModelConstants(float(R), int(K), c), values)


def build_lp(sample: PointSample, K: int) -> LPStandardForm:
    if K < 1:
        raise ValueError("K must be at least 1")
    R = compute_R(sample)
    c = compute_ct(sample.values, sample.edge_values, R, K)
    return assemble_lp(sample.values, c, R, K)


def initial_point(lp: LPStandardForm, snake_values, epsilon: float | None = None) -> np.ndarray:
    """Strictly positive feasible start built from a snake selection.

    ``epsilon`` defaults to ``R``, which makes every ``e_t`` at least
    ``K * (maxdiff + R)``.
    """
    K, T = lp.columns.K, lp.columns.T
    R = lp.constants.R
    Pk = np.asarray(snake_values, dtype=np.float64)
    if Pk.shape != (K,):
        raise ValueError(f"expected {K} snake values, got shape {Pk.shape}")
    if np.any(Pk <= 0):
        raise ZeroSnakeValue("snake values must be strictly positive")
    eps = R if epsilon is None else float(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    Pt = lp.point_values
    maxdiff = max(Pk.max() - Pt.min(), Pt.max() - Pk.min())
    diff = Pk[None, :] - Pt[:, None]
    b = np.full((T, K), maxdiff + eps)
    a = b - diff
    e = (a + b).sum(axis=1) - (K * R - K * K * lp.constants.c)
    if np.any(e <= 0):
        raise NonPositiveComponent(f"epsilon={eps} leaves e_t <= 0; increase it")
    return np.concatenate([a.ravel(), b.ravel(), e, Pk])


# ---------------------------------------------------------------------------
# search directions


def _spd_solve(G: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Cholesky solve with symmetric diagonal scaling."""
    scale = 1.0 / np.sqrt(np.diag(G))
    Gs = G * scale[:, None] * scale[None, :]
    try:
        chol = cho_factor(Gs, lower=True, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        raise FactorizationFailure(str(exc)) from exc
    return scale * cho_solve(chol, scale * rhs)


class SnakeNormalSolver:
    """Solves ``A D^2 A^T y = r`` for the snake LP in O(T K^2 + K^3).

    With the row layout above the matrix is ``N + U U^T`` where ``N`` is
    block diagonal over t (each block an arrow matrix coupling the sum row
    with its K pair rows) and ``U`` has one column per snake variable
    ``P(k)``.  ``N`` is inverted block-wise and the rank-K term is handled
    with the Woodbury identity.  Accurate while ``D`` is well scaled; the
    solver uses it for feasibility corrections (``D = I``).
    """

    def __init__(self, lp: LPStandardForm, refine: int = 2):
        self.lp = lp
        self.refine = refine

    def factor(self, d: np.ndarray):
        lp = self.lp
        cols = lp.columns
        K, T = cols.K, cols.T
        d = np.asarray(d, dtype=np.float64)
        xa, xb, xe, xp = cols.split(d)
        alpha, beta = xa * xa, xb * xb
        g = alpha + beta
        if not (np.all(g > 0) and np.all(xe > 0) and np.all(xp > 0)):
            raise FactorizationFailure("scaling vector has vanished components")
        v = (alpha - beta) / g
        s = (4.0 * alpha * beta / g).sum(axis=1) + xe * xe
        p = xp
        gram = (v / s[:, None]).T @ v
        gram[np.diag_indices(K)] += (1.0 / g).sum(axis=0)
        C = p[:, None] * gram * p[None, :]
        C[np.diag_indices(K)] += 1.0
        try:
            chol = cho_factor(C, lower=True, check_finite=True)
        except (LinAlgError, ValueError) as exc:
            raise FactorizationFailure(str(exc)) from exc

        def n_solve(r1, r2):
            z1 = (r1 - (v * r2).sum(axis=1)) / s
            z2 = r2 / g - v * z1[:, None]
            return z1, z2

        A = lp.A
        d2 = d * d

        def apply(y):
            return A @ (d2 * (A.T @ y))

        def solve_once(r):
            r1, r2 = r[:T], r[T:].reshape(T, K)
            z1, z2 = n_solve(r1, r2)
            q = p * cho_solve(chol, p * z2.sum(axis=0))
            w1, w2 = n_solve(np.zeros(T), np.broadcast_to(q, (T, K)))
            return np.concatenate([z1 - w1, (z2 - w2).ravel()])

        def solve(r):
            y = solve_once(r)
            for _ in range(self.refine):
                y = y + solve_once(r - apply(y))
            return y

        return solve


class SnakeDirections:
    """Affine-scaling steps for the snake LP by null-space elimination.

    Moves are parameterized by the snake change ``dP`` and the pair midpoints
    ``m = (da + db) / 2``: ``da = m - dP/2``, ``db = m + dP/2`` and
    ``de_t = sum_k (da + db)``, so every direction satisfies ``A d = 0`` by
    construction.  Minimizing ``||D^-1 d + D c||^2`` over that family leaves a
    K x K system whose per-pair weight is ``1 / (x_a^2 + x_b^2)``; nothing in
    it cancels as pairs approach zero, which the normal equations do not
    survive on this highly degenerate LP.
    """

    def __init__(self, lp: LPStandardForm):
        self.lp = lp
        self._unit = None

    def direction(self, x: np.ndarray) -> np.ndarray:
        cols = self.lp.columns
        K = cols.K
        c = self.lp.constants.c
        xa, xb, xe, xp = cols.split(np.asarray(x, dtype=np.float64))
        alpha, beta, eps = xa * xa, xb * xb, xe * xe
        g = alpha + beta
        v = (alpha - beta) / g
        inv_q = alpha * beta / g
        s = 4.0 * inv_q.sum(axis=1) + eps
        G = (v / s[:, None]).T @ v
        G[np.diag_indices(K)] += (1.0 / g).sum(axis=0) + 1.0 / (xp * xp)
        h = -(c * eps / s) @ v
        dP = _spd_solve(G, -h)
        phi = -(v @ dP / 2.0 + 2.0 * c * inv_q.sum(axis=1)) / s
        m = -(dP[None, :] * v + (4.0 * c + 8.0 * phi)[:, None] * inv_q) / 2.0
        da = m - dP[None, :] / 2.0
        db = m + dP[None, :] / 2.0
        de = (da + db).sum(axis=1)
        return np.concatenate([da.ravel(), db.ravel(), de, dP])

    def correct(self, x: np.ndarray) -> np.ndarray:
        """Least-squares pull back onto ``A x = b``."""
        lp = self.lp
        if self._unit is None:
            self._unit = SnakeNormalSolver(lp).factor(np.ones(lp.n))
        return x - lp.A.T @ self._unit(lp.A @ x - lp.b)


def lp_to_json(lp, path=None) -> dict:
    """Serialize ``{m, n, triplets, b, c, constants}``; constants is null for generic LPs."""
    A = sps.coo_matrix(lp.A)
    doc = {
        "m": int(A.shape[0]),
        "n": int(A.shape[1]),
        "triplets": [[int(r), int(c), float(v)] for r, c, v in zip(A.row, A.col, A.data)],
        "b": [float(x) for x in lp.b],
        "c": [float(x) for x in lp.c],
        "constants": None,
    }
    if isinstance(lp, LPStandardForm):
        doc["constants"] = {
            "R": lp.constants.R,
            "K": lp.constants.K,
            "T": lp.columns.T,
            "c_t": [float(x) for x in lp.constants.c],
            "P_t": [float(x) for x in lp.point_values],
        }
    if path is not None:
        Path(path).write_text(json.dumps(doc))
    return doc


def default_snake(point_values, K: int, seed: int = 0) -> np.ndarray:
    """Values of K seeded, distinct sample points; zeros nudged to ``1e-6 * R``."""
    values = np.asarray(point_values, dtype=np.float64)
    if K > len(values):
        raise ValueError(f"K={K} exceeds the {len(values)} sample points")
    pick = np.random.Generator(np.random.PCG64(seed)).permutation(len(values))[:K]
    out = values[pick].copy()
    R = float(values.max() - values.min())
    out[out <= 0] = 1e-6 * R if R > 0 else 1e-6
    return out


def lp_from_json(doc: dict):
    """Inverse of :func:`lp_to_json`; returns ``(lp, x0)``.

    ``x0`` is taken from an optional ``"x0"`` entry; otherwise snake LPs
    (non-null ``constants``) get the closed-form start from seeded snake
    values and generic LPs get ``None``.
    """
    from .ipsolve import StandardLP

    m, n = int(doc["m"]), int(doc["n"])
    trip = np.asarray(doc["triplets"], dtype=np.float64).reshape(-1, 3)
    rows, cols = trip[:, 0].astype(np.int64), trip[:, 1].astype(np.int64)
    if len(trip) and (rows.min() < 0 or rows.max() >= m or cols.min() < 0 or cols.max() >= n):
        raise ValueError("triplet index out of range")
    b = np.asarray(doc["b"], dtype=np.float64)
    c = np.asarray(doc["c"], dtype=np.float64)
    if b.shape != (m,) or c.shape != (n,):
        raise ValueError("b or c does not match m, n")
    A = sps.csr_matrix((trip[:, 2], (rows, cols)), shape=(m, n))
    x0 = doc.get("x0")
    consts = doc.get("constants")
    if consts is None:
        return StandardLP(A, b, c), (None if x0 is None else np.asarray(x0, dtype=np.float64))
    lp = assemble_lp(consts["P_t"], consts["c_t"], float(consts["R"]), int(consts["K"]))
    if lp.columns.T != int(consts["T"]) or (lp.m, lp.n) != (m, n):
        raise ValueError("constants disagree with the LP dimensions")
    if abs(lp.A - A).max() > 0 or not np.allclose(lp.b, b) or not np.allclose(lp.c, c):
        raise ValueError("constants do not reproduce the stored LP")
    if x0 is None:
        x0 = initial_point(lp, default_snake(lp.point_values, lp.constants.K))
    return lp, np.asarray(x0, dtype=np.float64)
