"""
Inexact-ADMM Nash equilibrium seeking under partial-decision information.

Every player i keeps an estimate x^i of the whole action profile (row i of an
N x N array; the stacked vector is its row-major ravel) and a dual w^i. One
synchronous iteration reads only the k-1 snapshot:

  Step 5  w^i(k)      = w^i(k-1) + c sum_{j in N_i} (x^i(k-1) - x^j(k-1))
  Step 6  x_i^i(k)    = T_Omega_i( [ -grad_i J_i(x^i(k-1)) - w_i^i(k) + beta_i x_i^i(k-1)
                                     + cbar sum_{j in N_i} (x_i^i(k-1) + x_i^j(k-1)) ] / alpha_i )
  Step 7  x_{-i}^i(k) = [ beta_i x_{-i}^i(k-1) + cbar sum_{j in N_i} (x_{-i}^i(k-1) + x_{-i}^j(k-1))
                          - w_{-i}^i(k) ] / alpha_i

with cbar = c + c0 and alpha_i = beta_i + 2 cbar |N_i|. The same map is also
available in stacked operator form (step_vectorized).
"""
from __future__ import annotations
import logging
import math
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from app.errors import DisconnectedGraphError, GameDomainError, ParameterError, StepError
from app.games import GameConstants, GameModel
from app.graph import CommGraph, algebraic_connectivity, is_connected, max_degree
from app.settings import settings

logger = logging.getLogger(__name__)

Engine = Literal["agents", "stacked"]


# ---------- parameters

@dataclass(frozen=True, eq=False)
class AdmmParams:
    c: float
    c0: float
    beta: np.ndarray

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float, ndmin=1)
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if not self.c > 0:
            raise ParameterError(f"c must be positive, got {self.c}")
        if not self.c0 > 0:
            raise ParameterError(f"c0 must be positive, got {self.c0}")
        if np.any(~(beta > 0)):
            raise ParameterError("every beta_i must be positive")

    @classmethod
    def create(cls, c: float, c0: float, beta: Union[float, Sequence[float]], n: int) -> "AdmmParams":
        b = np.asarray(beta, dtype=float)
        if b.ndim == 0:
            b = np.full(n, float(b))
        if b.shape != (n,):
            raise ParameterError(f"beta must be a scalar or have length {n}, got shape {b.shape}")
        return cls(c=float(c), c0=float(c0), beta=b)

    @property
    def c_bar(self) -> float:
        return self.c + self.c0

    def alpha(self, graph: CommGraph) -> np.ndarray:
        if self.beta.shape != (graph.n,):
            raise ParameterError(f"beta has length {self.beta.shape[0]}, graph has {graph.n} vertices")
        return self.beta + 2.0 * self.c_bar * graph.degrees


@dataclass
class AugmentedState:
    estimates: np.ndarray       # (N, N), row i = x^i
    duals: np.ndarray           # (N, N), row i = w^i
    iteration: int = 0

    @property
    def n(self) -> int:
        return int(self.estimates.shape[0])

    def actions(self) -> np.ndarray:
        """Own actions x_i^i."""
        return np.diag(self.estimates).copy()

    def stacked(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.estimates.ravel().copy(), self.duals.ravel().copy()

    @classmethod
    def from_stacked(cls, x: np.ndarray, w: np.ndarray, iteration: int = 0) -> "AugmentedState":
        n = math.isqrt(x.shape[0])
        return cls(np.array(x, dtype=float).reshape(n, n), np.array(w, dtype=float).reshape(n, n), iteration)


def initial_state(
    game: GameModel,
    rng: np.random.Generator,
    own_range: Optional[Tuple[float, float]] = None,
    others_range: Tuple[float, float] = (0.0, 1.0),
) -> AugmentedState:
    """w(0) = 0; x_i^i(0) at the game's interior point (or drawn, clamped to Omega_i); others drawn."""
    n = game.n_players
    X = rng.uniform(others_range[0], others_range[1], size=(n, n))
    if own_range is None:
        own = game.interior_point()
    else:
        own = game.project(rng.uniform(own_range[0], own_range[1], size=n))
    X[np.arange(n), np.arange(n)] = own
    return AugmentedState(X, np.zeros((n, n)), 0)


# ---------- parameter theory

def c_min(theta: float, theta0: float, mu: float, lambda2: float) -> float:
    for name, v in (("theta", theta), ("theta0", theta0), ("mu", mu), ("lambda2", lambda2)):
        if not v > 0:
            raise ParameterError(f"{name} must be positive, got {v}")
    return ((theta + theta0) ** 2 / (4.0 * mu) + theta) / lambda2


def psi_matrix(mu: float, theta: float, theta0: float, n: int, lambda2: float, c0: float) -> np.ndarray:
    off = -(theta + theta0) / (2.0 * math.sqrt(n))
    return np.array([[mu / n, off], [off, c0 * lambda2 - theta]])


def mu_bar(mu: float, theta: float, theta0: float, n: int, lambda2: float, c0: float) -> float:
    """Smaller eigenvalue of the 2x2 matrix Psi (closed form); <= 0 when c0 <= c_min."""
    if n < 2:
        raise ParameterError(f"mu_bar needs n >= 2, got {n}")
    (a, b), (_, d) = psi_matrix(mu, theta, theta0, n, lambda2, c0)
    return float(0.5 * ((a + d) - math.sqrt((a - d) ** 2 + 4.0 * b * b)))


def theta_bar(theta: float, c0: float, d_star: int) -> float:
    return theta + 2.0 * c0 * d_star


def h_matrix(params: AdmmParams, graph: CommGraph) -> np.ndarray:
    """H = B + 2 cbar D - c L."""
    return np.diag(params.beta) + 2.0 * params.c_bar * np.diag(graph.degrees) - params.c * graph.laplacian


def check_beta_condition(
    params: AdmmParams, graph: CommGraph, theta_bar_: float, mu_bar_: float
) -> Tuple[bool, float, float]:
    lhs = float(linalg.eigh(h_matrix(params, graph), eigvals_only=True)[0])
    if not mu_bar_ > 0:
        return False, lhs, math.inf
    rhs = float(theta_bar_**2 / (2.0 * mu_bar_))
    return bool(lhs > rhs), lhs, rhs


def sufficient_beta(theta_bar_: float, mu_bar_: float, margin: float = 1.01) -> float:
    """
    Scalar beta for which the condition holds on any graph:
    2 cbar D - c L = 2 c0 D + c (D + A) is PSD, so lambda_min(H) >= min beta_i.
    """
    if not mu_bar_ > 0:
        raise ParameterError(f"no beta satisfies the condition when mu_bar <= 0 (mu_bar={mu_bar_:.3g})")
    return margin * theta_bar_**2 / (2.0 * mu_bar_)


def auto_c0(constants: GameConstants, graph: CommGraph, factor: Optional[float] = None) -> float:
    factor = settings.AUTO_C0_FACTOR if factor is None else factor
    return factor * c_min(constants.theta, constants.theta0, constants.mu, algebraic_connectivity(graph))


@dataclass(frozen=True)
class TheoryConstants:
    mu: float
    theta0: float
    theta: float
    lambda2: float
    d_star: int
    c_min: float
    mu_bar: float
    theta_bar: float
    beta_condition_lhs: float
    beta_condition_rhs: float
    condition_satisfied: bool
    exact: bool = True

    def flags(self) -> Tuple[str, ...]:
        out = []
        if not self.condition_satisfied:
            out.append("condition_unsatisfied")
        if not self.mu_bar > 0:
            out.append("mu_bar_nonpositive")
        if not self.exact:
            out.append("sampled_constants")
        return tuple(out)


def theory_constants(
    game: GameModel, graph: CommGraph, params: AdmmParams, constants: Optional[GameConstants] = None
) -> TheoryConstants:
    k = constants or game.constants()
    lam2 = algebraic_connectivity(graph)
    d_star = max_degree(graph)
    cm = c_min(k.theta, k.theta0, k.mu, lam2)
    mb = mu_bar(k.mu, k.theta, k.theta0, graph.n, lam2, params.c0)
    tb = theta_bar(k.theta, params.c0, d_star)
    ok, lhs, rhs = check_beta_condition(params, graph, tb, mb)
    return TheoryConstants(
        mu=k.mu, theta0=k.theta0, theta=k.theta, lambda2=lam2, d_star=d_star,
        c_min=cm, mu_bar=mb, theta_bar=tb,
        beta_condition_lhs=lhs, beta_condition_rhs=rhs, condition_satisfied=ok,
        exact=k.exact,
    )


# ---------- one synchronous iteration, per agent

def _run_phase(executor: Optional[Executor], fn, n: int) -> None:
    if executor is None:
        for i in range(n):
            fn(i)
    else:
        # list() forces completion (barrier) and re-raises worker exceptions
        list(executor.map(fn, range(n)))


def step(
    state: AugmentedState,
    game: GameModel,
    graph: CommGraph,
    params: AdmmParams,
    executor: Optional[Executor] = None,
) -> AugmentedState:
    X, W = state.estimates, state.duals
    n = game.n_players
    alpha = params.alpha(graph)
    c, c_bar = params.c, params.c_bar
    new_W = np.empty_like(W)
    new_X = np.empty_like(X)

    def dual_update(i: int) -> None:
        nb = list(graph.neighbors(i))
        new_W[i] = W[i] + c * (len(nb) * X[i] - X[nb].sum(axis=0))

    def primal_update(i: int) -> None:
        nb = list(graph.neighbors(i))
        pair_sum = len(nb) * X[i] + X[nb].sum(axis=0)
        beta_i = params.beta[i]
        row = (beta_i * X[i] + c_bar * pair_sum - new_W[i]) / alpha[i]
        grad = game.partial_gradient(i, X[i])
        own = (-grad - new_W[i, i] + beta_i * X[i, i] + c_bar * pair_sum[i]) / alpha[i]
        lo, hi = game.action_interval(i)
        row[i] = min(max(own, lo), hi)
        new_X[i] = row

    k = state.iteration + 1
    _run_phase(executor, dual_update, n)
    try:
        _run_phase(executor, primal_update, n)
    except GameDomainError as e:
        raise StepError(f"iteration {k}: {e}", iteration=k, player=e.player, link=e.link) from e
    return AugmentedState(new_X, new_W, k)


# ---------- the same iteration in stacked operator form

@dataclass(frozen=True, eq=False)
class StackedOperators:
    L: np.ndarray            # L kron I_N
    R: np.ndarray            # N^2 x N, block i = e_i
    pair: np.ndarray         # (D + A) kron I_N
    own_index: np.ndarray    # positions of x_i^i in the stacked vector


@lru_cache(maxsize=16)
def _operators(graph: CommGraph) -> StackedOperators:
    n = graph.n
    eye = np.eye(n)
    lap = graph.laplacian.astype(float)
    R = np.zeros((n * n, n))
    own = np.arange(n) * n + np.arange(n)
    R[own, np.arange(n)] = 1.0
    pair = np.diag(graph.degrees).astype(float) + graph.adjacency
    ops = StackedOperators(L=np.kron(lap, eye), R=R, pair=np.kron(pair, eye), own_index=own)
    for arr in (ops.L, ops.R, ops.pair, ops.own_index):
        arr.setflags(write=False)
    return ops


def stacked_operators(graph: CommGraph) -> StackedOperators:
    return _operators(graph)


def step_vectorized(
    state: AugmentedState, game: GameModel, graph: CommGraph, params: AdmmParams
) -> AugmentedState:
    n = game.n_players
    ops = stacked_operators(graph)
    x, w = state.stacked()
    w_new = w + params.c * (ops.L @ x)
    k = state.iteration + 1
    try:
        rf = ops.R @ game.block_gradient(state.estimates)
    except GameDomainError as e:
        raise StepError(f"iteration {k}: {e}", iteration=k, player=e.player, link=e.link) from e
    alpha = np.repeat(params.alpha(graph), n)
    beta = np.repeat(params.beta, n)
    x_new = (beta * x + params.c_bar * (ops.pair @ x) - w_new - rf) / alpha
    # resolvent of the interval indicator on the own-action coordinates
    x_new[ops.own_index] = game.project(x_new[ops.own_index])
    return AugmentedState.from_stacked(x_new, w_new, k)


# ---------- the loop

@dataclass(frozen=True, eq=False)
class StoppingRule:
    tol: float = field(default_factory=lambda: settings.DEFAULT_TOL)
    max_iterations: int = field(default_factory=lambda: settings.DEFAULT_MAX_ITER)
    reference: Optional[np.ndarray] = None   # stop on relative error to this point instead

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ParameterError("max_iterations must be >= 0")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")


@dataclass
class RunResult:
    state: AugmentedState
    trace: List["IterationTrace"]
    converged: bool
    theory: Optional[TheoryConstants] = None

    @property
    def iterations(self) -> int:
        return self.state.iteration

    def __iter__(self):
        # allows `state, trace = run(...)`
        return iter((self.state, self.trace))


def validate_init(game: GameModel, init: AugmentedState) -> None:
    n = game.n_players
    if init.estimates.shape != (n, n) or init.duals.shape != (n, n):
        raise ParameterError(f"initial state must be {n} x {n}")
    own = np.diag(init.estimates)
    if np.any(own < game.lower) or np.any(own > game.upper):
        raise ParameterError("initial own actions must lie in their action intervals")
    if np.any(init.duals != 0.0):
        raise ParameterError("duals must start at zero")


def run(
    game: GameModel,
    graph: CommGraph,
    params: AdmmParams,
    init: AugmentedState,
    stop: Optional[StoppingRule] = None,
    *,
    record_every: int = 1,
    x_star: Optional[np.ndarray] = None,
    engine: Engine = "agents",
    threads: int = 1,
    keep_estimates: bool = False,
    theory: Optional[TheoryConstants] = None,
) -> RunResult:
    from app.diagnostics import TraceRecorder

    stop = stop or StoppingRule()
    if not is_connected(graph):
        raise DisconnectedGraphError("communication graph must be connected")
    if graph.n != game.n_players:
        raise ParameterError(f"graph has {graph.n} vertices, game has {game.n_players} players")
    if record_every < 1:
        raise ParameterError("record_every must be >= 1")
    validate_init(game, init)
    if theory is None:
        try:
            theory = theory_constants(game, graph, params)
        except (GameDomainError, ParameterError) as e:
            logger.warning("theory constants unavailable: %s", e)
    flags = theory.flags() if theory is not None else ("constants_unavailable",)
    if theory is not None and not theory.condition_satisfied:
        logger.warning("beta condition not satisfied (lhs=%.4g rhs=%.4g mu_bar=%.4g); running anyway",
                       theory.beta_condition_lhs, theory.beta_condition_rhs, theory.mu_bar)

    reference = stop.reference if stop.reference is not None else x_star
    recorder = TraceRecorder(graph, params, x_star=reference, flags=flags, keep_estimates=keep_estimates)
    state = replace(init, estimates=init.estimates.astype(float, copy=True),
                    duals=init.duals.astype(float, copy=True))
    recorder.start(state)
    logger.info("admm start: N=%d c=%.4g c0=%.4g engine=%s threads=%d", graph.n, params.c, params.c0,
                engine, threads)

    executor = ThreadPoolExecutor(max_workers=threads) if engine == "agents" and threads > 1 else None
    converged = False
    try:
        for _ in range(stop.max_iterations):
            if engine == "agents":
                new = step(state, game, graph, params, executor)
            else:
                new = step_vectorized(state, game, graph, params)
            entry = recorder.observe(state, new)
            state = new
            if stop.reference is not None:
                done = entry.rel_error < stop.tol
            else:
                done = entry.delta_x_norm + entry.consensus_residual < stop.tol
            if done:
                converged = True
                recorder.record(entry)
                break
            if state.iteration % record_every == 0:
                recorder.record(entry)
        else:
            if recorder.pending is not None and recorder.last_k != state.iteration:
                recorder.record(recorder.pending)
    except StepError as e:
        logger.error("admm aborted: %s", e)
        raise
    finally:
        if executor is not None:
            executor.shutdown()

    logger.info("admm done: iterations=%d converged=%s", state.iteration, converged)
    return RunResult(state=state, trace=recorder.trace, converged=converged, theory=theory)
