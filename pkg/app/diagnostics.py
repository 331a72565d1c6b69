"""
Convergence diagnostics for the ADMM solver and the baseline.
- IterationTrace rows (what ends up in the CSV)
- TraceRecorder: computes every row online, accumulating q(k) = sum_{t<=k} x(t)
- numerical checks of the analytic guarantees (Lyapunov differences,
  restricted monotonicity, rate surrogate, natural residual)
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.errors import UnsupportedTraceError
from app.games import GameModel, pseudo_gradient
from app.graph import CommGraph, algebraic_connectivity

logger = logging.getLogger(__name__)

CSV_FIELDS = (
    "k",
    "rel_error",
    "consensus_residual",
    "dual_sum_norm",
    "delta_x_norm",
    "delta_z_phi",
    "rate_product",
)

VIOLATION_TOL = 1e-9


@dataclass
class IterationTrace:
    k: int
    rel_error: float
    consensus_residual: float
    dual_sum_norm: float
    delta_x_norm: float
    delta_z_phi: float
    rate_product: float
    condition_flags: Tuple[str, ...] = ()
    actions: Optional[np.ndarray] = None
    estimates: Optional[np.ndarray] = None

    def row(self) -> Tuple[float, ...]:
        return tuple(getattr(self, f) for f in CSV_FIELDS)


# ---------- scalar metrics

def consensus_residual(X: np.ndarray, g: CommGraph) -> float:
    """x^T (L kron I) x as the edge sum of squared block differences."""
    X = np.asarray(X, dtype=float).reshape(g.n, -1)
    if not g.edges:
        return 0.0
    i, j = np.array(g.edges).T
    diff = X[i] - X[j]
    return float(np.sum(diff * diff))


def kron_quadratic(M: np.ndarray, X: np.ndarray) -> float:
    """x^T (M kron I_N) x for the stacked x whose blocks are the rows of X."""
    return float(np.sum(M * (X @ X.T)))


def relative_error(x: np.ndarray, x_star: np.ndarray, x0: np.ndarray) -> float:
    """||x - x*|| / ||x0 - x*||; the plain distance when x0 is already x*."""
    num = float(np.linalg.norm(x - x_star))
    den = float(np.linalg.norm(x0 - x_star))
    return num / den if den > 0 else num


def ne_residual(x: np.ndarray, game: GameModel, tau: float) -> float:
    """Natural residual ||x - T_Omega(x - tau F(x))||_inf; zero exactly at a NE."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    x = np.asarray(x, dtype=float)
    return float(np.max(np.abs(x - game.project(x - tau * pseudo_gradient(game, x)))))


# ---------- online recording

class TraceRecorder:
    """
    Builds IterationTrace rows from consecutive states. Works for the ADMM
    solver (params given: delta_z_phi available) and for the baseline
    (params None: delta_z_phi is NaN).
    """

    def __init__(self, graph: CommGraph, params=None, *, x_star: Optional[np.ndarray] = None,
                 flags: Sequence[str] = (), keep_estimates: bool = False):
        self.graph = graph
        self.params = params
        self.x_star = None if x_star is None else np.asarray(x_star, dtype=float)
        self.flags = tuple(flags)
        self.keep_estimates = keep_estimates
        self.trace: List[IterationTrace] = []
        self.pending: Optional[IterationTrace] = None
        self.q: Optional[np.ndarray] = None
        self._x0: Optional[np.ndarray] = None
        if params is not None:
            from app.admm import h_matrix
            self._H = h_matrix(params, graph)
        else:
            self._H = None

    @property
    def last_k(self) -> int:
        return self.trace[-1].k if self.trace else -1

    def _rel(self, X: np.ndarray) -> float:
        if self.x_star is None:
            return math.nan
        return relative_error(np.diag(X), self.x_star, self._x0)

    def _entry(self, k: int, X: np.ndarray, W: Optional[np.ndarray], delta_x: float, delta_z: float) -> IterationTrace:
        dual_sum = float(np.max(np.abs(W.sum(axis=0)))) if W is not None else 0.0
        return IterationTrace(
            k=k,
            rel_error=self._rel(X),
            consensus_residual=consensus_residual(X, self.graph),
            dual_sum_norm=dual_sum,
            delta_x_norm=delta_x,
            delta_z_phi=delta_z,
            rate_product=k * delta_z,
            condition_flags=self.flags,
            actions=np.diag(X).copy(),
            estimates=X.copy() if self.keep_estimates else None,
        )

    def start(self, state) -> IterationTrace:
        X = state.estimates
        self._x0 = np.diag(X).copy()
        self.q = X.copy()
        entry = self._entry(state.iteration, X, state.duals, 0.0, math.nan)
        self.record(entry)
        return entry

    def observe(self, prev, new) -> IterationTrace:
        X = new.estimates
        dX = X - prev.estimates
        self.q = self.q + X
        if self._H is not None:
            # Delta q(k) = x(k), so the cL-block contributes c x^T (L kron I) x
            delta_z = kron_quadratic(self._H, dX) + self.params.c * consensus_residual(X, self.graph)
        else:
            delta_z = math.nan
        entry = self._entry(new.iteration, X, new.duals, float(np.max(np.abs(dX))), delta_z)
        self.pending = entry
        return entry

    def record(self, entry: IterationTrace) -> None:
        if entry.k != self.last_k:
            self.trace.append(entry)


# ---------- analytic checks

def lyapunov_difference_series(trace: Sequence[IterationTrace], params, graph: CommGraph) -> List[Tuple[int, float]]:
    """
    (k, ||z(k-1) - z(k)||^2_{Phi kron I}) for k >= 1, recomputed from stored
    estimates: ||dx(k)||^2_{H kron I} + c x(k)^T (L kron I) x(k).
    Requires record_every=1 and keep_estimates=True.
    """
    from app.admm import h_matrix

    if len(trace) < 2:
        return []
    for a, b in zip(trace, trace[1:]):
        if b.k != a.k + 1:
            raise UnsupportedTraceError(f"trace has a gap between k={a.k} and k={b.k}")
    if any(t.estimates is None for t in trace):
        raise UnsupportedTraceError("trace was recorded without estimates")
    H = h_matrix(params, graph)
    out = []
    for a, b in zip(trace, trace[1:]):
        dX = b.estimates - a.estimates
        out.append((b.k, kron_quadratic(H, dX) + params.c * consensus_residual(b.estimates, graph)))
    return out


def is_non_increasing(values: Sequence[float], slack: float = 1e-12) -> bool:
    return all(b <= a + slack * max(1.0, abs(a)) for a, b in zip(values, values[1:]))


def rate_surrogate_holds(trace: Sequence[IterationTrace]) -> bool:
    """k * consensus_residual: max over the last quarter below max over the first quarter (k >= 1)."""
    rows = [t for t in trace if t.k >= 1]
    if len(rows) < 4:
        return True
    q = len(rows) // 4
    first = max(t.k * t.consensus_residual for t in rows[:q])
    last = max(t.k * t.consensus_residual for t in rows[-q:])
    return last < first or (first == 0.0 and last == 0.0)


@dataclass(frozen=True)
class MonotonicityCheck:
    min_margin: float
    violations: int
    mu_bar: float
    min_ratio: float    # min of lhs / ||x - y||^2, the empirical monotonicity modulus


def restricted_monotonicity_margin(
    game: GameModel, graph: CommGraph, c0: float, X: np.ndarray, y: np.ndarray, mu_bar_: float
) -> Tuple[float, float]:
    """
    lhs = (x - y)^T (R F(x) - R F(y) + c0 L (x - y)) with y = 1 kron y.
    Returns (lhs - mu_bar ||x - y||^2, ||x - y||^2).
    """
    n = game.n_players
    X = np.asarray(X, dtype=float).reshape(n, n)
    Y = np.broadcast_to(np.asarray(y, dtype=float), (n, n))
    D = X - Y
    own = np.diag(D) * (game.block_gradient(X) - game.block_gradient(Y))
    lhs = float(own.sum()) + c0 * consensus_residual(D, graph)
    sq = float(np.sum(D * D))
    return lhs - mu_bar_ * sq, sq


def restricted_monotonicity_check(
    game: GameModel,
    graph: CommGraph,
    c0: float,
    n_samples: int = 1000,
    seed: int = 0,
    box: Optional[Tuple[float, float]] = None,
) -> MonotonicityCheck:
    from app.admm import mu_bar

    k = game.constants()
    mb = mu_bar(k.mu, k.theta, k.theta0, game.n_players, algebraic_connectivity(graph), c0)
    rng = np.random.default_rng(seed)
    n = game.n_players
    lo, hi = (game.lower, game.upper) if box is None else (np.full(n, box[0]), np.full(n, box[1]))
    min_margin, min_ratio, violations = math.inf, math.inf, 0
    for _ in range(n_samples):
        X = rng.uniform(lo, hi, size=(n, n))
        y = rng.uniform(lo, hi)
        margin, sq = restricted_monotonicity_margin(game, graph, c0, X, y, mb)
        min_margin = min(min_margin, margin)
        if sq > 0:
            min_ratio = min(min_ratio, (margin + mb * sq) / sq)
        if margin < -VIOLATION_TOL:
            violations += 1
    if violations:
        logger.info("restricted monotonicity: %d/%d violations (min margin %.3g)", violations, n_samples, min_margin)
    return MonotonicityCheck(min_margin=min_margin, violations=violations, mu_bar=mb, min_ratio=min_ratio)
