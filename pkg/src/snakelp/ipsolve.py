"""Affine-scaling interior-point solver for ``min c.x  s.t.  A x = b, x >= 0``.

Each iteration rescales by the current iterate ``D = diag(x)``, projects the
scaled cost ``D c`` onto the null space of ``B = A D`` and moves along

    delta = -D (D c - B^T y),   (B B^T) y = B D c

with a ratio-test step that keeps the iterate strictly positive.  A tiny
vertex-enumeration solver is included as a test oracle.
"""
from __future__ import annotations

import enum
import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .errors import (FactorizationFailure, InfeasibleProblem, InfeasibleStart,
                     NumericalFailure, TooLarge, UnboundedProblem)

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    RUNNING = "running"
    CONVERGED = "converged"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


class Stationary(Exception):
    """The search direction vanished; the iterate cannot be improved."""


@dataclass(frozen=True)
class SolveOptions:
    alpha: float = 0.95
    obj_tol: float = 1e-9
    feas_tol: float = 1e-8
    max_iter: int = 500
    stall_window: int = 3

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.obj_tol <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1 or self.stall_window < 1:
            raise ValueError("max_iter and stall_window must be at least 1")


@dataclass(eq=False)
class StandardLP:
    """A plain standard-form LP; ``A`` may be dense or sparse."""

    A: sps.csr_matrix
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.A = sps.csr_matrix(self.A, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.c = np.asarray(self.c, dtype=np.float64)
        m, n = self.A.shape
        if self.b.shape != (m,) or self.c.shape != (n,):
            raise ValueError(f"inconsistent shapes: A {self.A.shape}, b {self.b.shape}, c {self.c.shape}")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def direction_solver(self):
        return NormalEquations(self)


@dataclass
class TraceEntry:
    objective: float
    step: float
    direction_norm: float


@dataclass
class IPState:
    x: np.ndarray
    iter: int
    objective: float
    last_step: float = 0.0
    status: Status = Status.RUNNING


@dataclass
class SolveOutcome:
    x: np.ndarray
    objective: float
    status: Status
    trace: list[TraceEntry] = field(default_factory=list)
    message: str = ""

    @property
    def iterations(self) -> int:
        return len(self.trace)

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "objective": self.objective,
            "iterations": self.iterations,
            "trace": [{"objective": e.objective, "step": e.step,
                       "direction_norm": e.direction_norm} for e in self.trace],
        }


class SparseNormalSolver:
    """Factorizes ``A D^2 A^T`` with a sparse LU in symmetric ordering mode.

    On failure the diagonal is regularized by ``1e-10 * trace / m``, then by
    10x and 100x that, before giving up.
    """

    def __init__(self, A, refine: int = 1):
        self.A = sps.csr_matrix(A)
        self.refine = refine

    def factor(self, d):
        A = self.A
        B = A @ sps.diags(d)
        M = (B @ B.T).tocsc()
        m = M.shape[0]
        base = 1e-10 * M.diagonal().sum() / max(m, 1)
        lu = None
        for delta in (0.0, base, 10 * base, 100 * base):
            Mr = M if delta == 0.0 else (M + delta * sps.identity(m, format="csc"))
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("error", spla.MatrixRankWarning)
                    lu = spla.splu(Mr, permc_spec="MMD_AT_PLUS_A",
                                   options={"SymmetricMode": True})
            except (RuntimeError, spla.MatrixRankWarning):
                continue
            if delta:
                log.debug("normal matrix regularized with delta=%.3g", delta)
            break
        if lu is None:
            raise FactorizationFailure("A D^2 A^T is singular beyond regularization")

        def solve(r):
            y = lu.solve(r)
            for _ in range(self.refine):
                y = y + lu.solve(r - M @ y)
            if not np.all(np.isfinite(y)):
                raise FactorizationFailure("non-finite solution of the normal equations")
            return y

        return solve


class NormalEquations:
    """Directions from the normal equations ``(B B^T) y = B D c`` with ``B = A D``."""

    def __init__(self, lp, factorizer=None):
        self.lp = lp
        self.factorizer = factorizer or SparseNormalSolver(lp.A)
        self._unit = None

    def direction(self, x: np.ndarray) -> np.ndarray:
        A = self.lp.A
        w = x * self.lp.c
        y = self.factorizer.factor(x)(A @ (x * w))
        return -x * (w - x * (A.T @ y))

    def correct(self, x: np.ndarray) -> np.ndarray:
        """``x - A^T (A A^T)^-1 (A x - b)``."""
        if self._unit is None:
            self._unit = self.factorizer.factor(np.ones(self.lp.n))
        A = self.lp.A
        return x - A.T @ self._unit(A @ x - self.lp.b)


def direction_solver(lp):
    make = getattr(lp, "direction_solver", None)
    return make() if make is not None else NormalEquations(lp)


def direction(lp, x: np.ndarray, solver=None) -> np.ndarray:
    """Affine-scaling search direction ``-D (I - B^T (B B^T)^-1 B) D c`` at ``x > 0``."""
    return (solver or direction_solver(lp)).direction(np.asarray(x, dtype=np.float64))


def step_size(x: np.ndarray, delta: np.ndarray, alpha: float, c: np.ndarray | None = None) -> float:
    """Ratio test ``alpha * min(x_i / -delta_i)`` over the decreasing components."""
    scale = 1.0 + float(np.abs(x).max())
    if float(np.abs(delta).max()) <= 1e-15 * scale:
        raise Stationary("zero search direction")
    neg = delta < 0
    if not neg.any():
        if c is not None and float(c @ delta) < -1e-12 * scale:
            raise UnboundedProblem("improving direction with no blocking component")
        raise Stationary("no decreasing component and no cost improvement")
    return float(alpha * np.min(x[neg] / -delta[neg]))


def _residual(lp, x) -> float:
    return float(np.abs(lp.A @ x - lp.b).max()) if lp.m else 0.0


def _feas_limit(lp, opts: SolveOptions) -> float:
    bnorm = float(np.abs(lp.b).max()) if lp.m else 0.0
    return opts.feas_tol * (1.0 + bnorm)


def iterate(lp, state: IPState, opts: SolveOptions, solver=None) -> tuple[IPState, np.ndarray]:
    """One affine-scaling step; returns the new state and the direction taken."""
    if state.status is not Status.RUNNING:
        raise ValueError(f"cannot iterate from status {state.status}")
    solver = solver or direction_solver(lp)
    delta = solver.direction(state.x)
    lam = step_size(state.x, delta, opts.alpha, lp.c)
    x = state.x + lam * delta
    if _residual(lp, x) > _feas_limit(lp, opts):
        x = solver.correct(x)
        if _residual(lp, x) > _feas_limit(lp, opts):
            raise NumericalFailure("feasibility drift could not be corrected")
    if not np.all(x > 0):
        raise NumericalFailure("iterate left the positive orthant")
    new = IPState(x, state.iter + 1, float(lp.c @ x), lam, Status.RUNNING)
    return new, delta


def _prune_zero_rows(lp):
    A = sps.csr_matrix(lp.A)
    nnz = np.diff(A.indptr)
    live = nnz > 0
    if live.all():
        return lp
    dead = ~live
    if np.any(np.abs(lp.b[dead]) > 0):
        raise InfeasibleStart("an all-zero constraint row has a non-zero right-hand side")
    warnings.warn(f"dropping {int(dead.sum())} all-zero constraint rows", RuntimeWarning)
    return StandardLP(A[live], lp.b[live], lp.c)


def solve(lp, x0: np.ndarray, opts: SolveOptions | None = None, solver=None,
          callback=None) -> SolveOutcome:
    """Run affine scaling from a strictly positive feasible ``x0``.

    Stops when the relative objective change stays below ``obj_tol`` for
    ``stall_window`` consecutive iterations, when the direction vanishes, on
    unboundedness, numerical failure, or after ``max_iter`` iterations.  The
    lowest-objective accepted iterate is returned.
    ``callback(old_state, delta, new_state)`` runs after every accepted step.
    """
    opts = opts or SolveOptions()
    x = np.array(x0, dtype=np.float64)
    if x.shape != (lp.n,):
        raise InfeasibleStart(f"x0 has shape {x.shape}, expected ({lp.n},)")
    if not np.all(x > 0):
        raise InfeasibleStart("x0 must be strictly positive")
    if _residual(lp, x) > _feas_limit(lp, opts):
        raise InfeasibleStart(f"x0 violates A x = b (residual {_residual(lp, x):.3g})")
    pruned = _prune_zero_rows(lp)
    if pruned is not lp:
        solver = None
    lp = pruned
    solver = solver or direction_solver(lp)

    state = IPState(x, 0, float(lp.c @ x))
    best = state
    trace: list[TraceEntry] = []
    quiet = 0
    status, message = Status.MAX_ITERATIONS, ""
    for _ in range(opts.max_iter):
        try:
            new, delta = iterate(lp, state, opts, solver)
        except Stationary as exc:
            status, message = Status.CONVERGED, str(exc)
            break
        except UnboundedProblem as exc:
            status, message = Status.UNBOUNDED, str(exc)
            break
        except (NumericalFailure, FactorizationFailure) as exc:
            status, message = Status.NUMERICAL_FAILURE, str(exc)
            break
        trace.append(TraceEntry(new.objective, new.last_step, float(np.abs(delta).max())))
        if callback is not None:
            callback(state, delta, new)
        change = abs(state.objective - new.objective)
        if new.objective > state.objective + 1e-12 * (1.0 + abs(state.objective)):
            log.debug("objective rose by %.3g at iteration %d", change, new.iter)
        state = new
        if state.objective <= best.objective:
            best = state
        quiet = quiet + 1 if change < opts.obj_tol * max(1.0, abs(state.objective)) else 0
        if quiet >= opts.stall_window:
            status, message = Status.CONVERGED, "objective change below tolerance"
            break
    return SolveOutcome(best.x, best.objective, status, trace, message)


def big_m_start(lp, weight: float | None = None):
    """Augment ``lp`` with one artificial column so that all-ones is feasible.

    The column is ``b - A 1`` with cost ``weight`` (default
    ``1e6 * (1 + ||c||_inf)``); returns ``(augmented_lp, x0)``.
    """
    A = sps.csr_matrix(lp.A)
    c = np.asarray(lp.c, dtype=np.float64)
    b = np.asarray(lp.b, dtype=np.float64)
    if weight is None:
        weight = 1e6 * (1.0 + (float(np.abs(c).max()) if len(c) else 0.0))
    r = b - A @ np.ones(A.shape[1])
    aug = StandardLP(sps.hstack([A, sps.csr_matrix(r[:, None])]).tocsr(), b,
                     np.concatenate([c, [weight]]))
    return aug, np.ones(A.shape[1] + 1)


def solve_without_start(lp, opts: SolveOptions | None = None) -> SolveOutcome:
    """Solve from the big-M start; raises InfeasibleProblem if the artificial stays positive."""
    opts = opts or SolveOptions()
    aug, x0 = big_m_start(lp)
    out = solve(aug, x0, opts)
    x, art = out.x[:-1], out.x[-1]
    scale = 1.0 + float(np.abs(x).max())
    if out.status is Status.CONVERGED and art > 1e3 * opts.feas_tol * scale:
        raise InfeasibleProblem(f"artificial variable stays at {art:.3g}")
    return SolveOutcome(x, float(np.asarray(lp.c) @ x), out.status, out.trace, out.message)


# ---------------------------------------------------------------------------
# oracle

ORACLE_MAX_N = 14
ORACLE_MAX_M = 8


def _independent_rows(A: np.ndarray, b: np.ndarray, tol: float = 1e-10):
    import scipy.linalg as sla

    if A.shape[0] == 0:
        return A, b
    _, r, piv = sla.qr(A.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol * max(1.0, diag.max() if len(diag) else 1.0)))
    keep = np.sort(piv[:rank])
    Ak, bk = A[keep], b[keep]
    sol, *_ = np.linalg.lstsq(Ak, bk, rcond=None)
    if np.abs(A @ sol - b).max() > 1e-8 * (1.0 + np.abs(b).max()):
        raise InfeasibleProblem("equality constraints are inconsistent")
    return Ak, bk


def _basic_solutions(A: np.ndarray, b: np.ndarray, tol: float):
    m, n = A.shape
    for basis in itertools.combinations(range(n), m):
        Bm = A[:, basis]
        if abs(np.linalg.det(Bm)) < 1e-12:
            continue
        xb = np.linalg.solve(Bm, b)
        if np.all(xb >= -tol):
            x = np.zeros(n)
            x[list(basis)] = np.maximum(xb, 0.0)
            yield x


def oracle_solve(lp) -> SolveOutcome:
    """Exact optimum of a tiny LP by enumerating every basis.

    Unboundedness is certified by enumerating the extreme rays, i.e. the
    vertices of ``{d >= 0, A d = 0, sum(d) = 1}``.
    """
    A = lp.A.toarray() if sps.issparse(lp.A) else np.asarray(lp.A, dtype=np.float64)
    b = np.asarray(lp.b, dtype=np.float64)
    c = np.asarray(lp.c, dtype=np.float64)
    m, n = A.shape
    if n > ORACLE_MAX_N or m > ORACLE_MAX_M:
        raise TooLarge(f"oracle handles n <= {ORACLE_MAX_N}, m <= {ORACLE_MAX_M}; got n={n}, m={m}")
    tol = 1e-9 * (1.0 + (np.abs(b).max() if m else 0.0))
    A, b = _independent_rows(A, b)
    best = None
    for x in _basic_solutions(A, b, tol):
        if best is None or c @ x < c @ best - 1e-15:
            best = x
    if best is None:
        raise InfeasibleProblem("no basic feasible solution exists")
    ray_A = np.vstack([A, np.ones((1, n))])
    ray_b = np.concatenate([np.zeros(A.shape[0]), [1.0]])
    try:
        ray_A, ray_b = _independent_rows(ray_A, ray_b)
    except InfeasibleProblem:
        # no non-zero d >= 0 with A d = 0: the feasible set is bounded
        return SolveOutcome(best, float(c @ best), Status.CONVERGED, [], "vertex enumeration")
    for d in _basic_solutions(ray_A, ray_b, 1e-12):
        if c @ d < -1e-9 * (1.0 + np.abs(c).max()):
            raise UnboundedProblem("improving extreme ray found")
    return SolveOutcome(best, float(c @ best), Status.CONVERGED, [], "vertex enumeration")
