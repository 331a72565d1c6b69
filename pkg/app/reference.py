"""
Reference solvers.
- centralized_ne: projected pseudo-gradient iteration with full information,
  the ground truth every distributed run is compared against; adaptive_ne
  (backtracked forward-backward-forward) when constants are only sampled
- baseline_consensus_gradient: synchronous consensus + diminishing-step
  gradient method, the slow comparison point for the ADMM solver
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, replace
from typing import Literal, Optional

import numpy as np

from app.admm import AugmentedState, RunResult, StoppingRule, validate_init
from app.diagnostics import TraceRecorder
from app.errors import DisconnectedGraphError, GameDomainError, NonConvergenceError, ParameterError, StepError
from app.games import GameConstants, GameModel, QuadraticGame, pseudo_gradient
from app.graph import CommGraph, is_connected, max_degree

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepSchedule:
    kind: Literal["constant", "diminishing"]
    tau: float = 0.0
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind == "constant" and not self.tau > 0:
            raise ParameterError(f"constant step must be positive, got {self.tau}")
        if self.kind == "diminishing" and not (self.a > 0 and self.b >= 1):
            raise ParameterError(f"diminishing step needs a > 0 and b >= 1, got a={self.a} b={self.b}")

    @classmethod
    def constant(cls, tau: float) -> "StepSchedule":
        return cls(kind="constant", tau=tau)

    @classmethod
    def diminishing(cls, a: float = 1.0, b: float = 1.0) -> "StepSchedule":
        return cls(kind="diminishing", a=a, b=b)

    def step(self, k: int) -> float:
        """Step used for the k-th update, k = 0, 1, ..."""
        if self.kind == "constant":
            return self.tau
        return self.a / (k + self.b)


def default_tau(game: GameModel) -> float:
    k = game.constants()
    return k.mu / k.theta0**2


def max_tau(consts: GameConstants) -> float:
    return 2.0 * consts.mu / consts.theta0**2


def residual_tau(game: GameModel) -> float:
    """Step for reporting the natural residual: mu / theta0^2 with exact constants, else 1."""
    try:
        consts = game.constants()
    except (GameDomainError, ParameterError):
        return 1.0
    return default_tau(game) if consts.exact else 1.0


def centralized_ne(
    game: GameModel,
    tau: Optional[float] = None,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
    x0: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    x <- T_Omega(x - tau F(x)) until ||dx||_inf < tol, with tau = mu / theta0^2
    unless given. Games whose constants are sampled or unavailable run
    adaptive_ne instead when no tau is given.
    """
    try:
        consts = game.constants()
    except (GameDomainError, ParameterError) as e:
        consts = None
        logger.warning("oracle step not validated, constants unavailable: %s", e)
    x = game.interior_point() if x0 is None else game.project(np.asarray(x0, dtype=float))
    if tau is None:
        if consts is None or not consts.exact:
            return adaptive_ne(game, x, tol=tol, max_iter=max_iter)
        tau = default_tau(game)
    if not tau > 0:
        raise ParameterError(f"tau must be positive, got {tau}")
    if consts is not None and tau >= max_tau(consts):
        msg = f"tau={tau:.4g} outside (0, {max_tau(consts):.4g})"
        if consts.exact:
            raise ParameterError(msg)
        logger.warning("%s (sampled constants)", msg)
    return _projected_iteration(game, x, tau, tol, max_iter)


def adaptive_ne(
    game: GameModel,
    x0: np.ndarray,
    *,
    tau: float = 1.0,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
    backtrack: float = 0.5,
    expand: float = 1.25,
    nu: float = 0.9,
    min_tau: float = 1e-14,
) -> np.ndarray:
    """
    Forward-backward-forward iteration with a backtracked step:
        y    = T_Omega(x - tau F(x))
        x(+) = T_Omega(y - tau (F(y) - F(x)))
    tau is multiplied by `backtrack` until tau ||F(y) - F(x)|| <= nu ||y - x||
    and both y and x(+) lie in F's domain, then by `expand` for the next
    iteration. Needs only monotonicity and local Lipschitz continuity of F.
    Stops when the natural residual ||x - T_Omega(x - F(x))||_inf < tol.
    """
    if not 0 < backtrack < 1 < expand or not 0 < nu < 1:
        raise ParameterError(f"need 0 < backtrack < 1 < expand and 0 < nu < 1, "
                             f"got backtrack={backtrack} expand={expand} nu={nu}")
    x = game.project(np.asarray(x0, dtype=float))
    fx = pseudo_gradient(game, x)
    residual = float("inf")
    backtracks = 0
    for it in range(1, max_iter + 1):
        residual = float(np.max(np.abs(x - game.project(x - fx))))
        if residual < tol:
            logger.debug("adaptive oracle converged in %d iterations (%d backtracks, tau=%.3g)",
                         it - 1, backtracks, tau)
            return x
        accepted = _fbf_step(game, x, fx, tau, nu)
        while accepted is None:
            tau *= backtrack
            backtracks += 1
            if tau < min_tau:
                raise NonConvergenceError(f"adaptive step collapsed below {min_tau:g} at iteration {it}",
                                          residual=residual, iterations=it)
            accepted = _fbf_step(game, x, fx, tau, nu)
        x, fx = accepted
        tau *= expand
    raise NonConvergenceError(f"adaptive iteration did not converge in {max_iter} iterations "
                              f"(last residual {residual:.3g})", residual=residual, iterations=max_iter)


def _fbf_step(game: GameModel, x: np.ndarray, fx: np.ndarray, tau: float, nu: float):
    """(x(+), F(x(+))), or None when tau fails the local Lipschitz test or leaves the domain."""
    try:
        y = game.project(x - tau * fx)
        fy = pseudo_gradient(game, y)
        if tau * np.linalg.norm(fy - fx) > nu * np.linalg.norm(y - x):
            return None
        x_new = game.project(y - tau * (fy - fx))
        return x_new, pseudo_gradient(game, x_new)
    except GameDomainError:
        return None


def potential_ne(game: QuadraticGame, tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    """
    Projected gradient on the potential 0.5 x^T Q x + r^T x (symmetric Q only),
    step 1 / ||Q||_2. Same fixed point as centralized_ne, far fewer iterations
    when mu / theta0 is small.
    """
    if not isinstance(game, QuadraticGame) or not np.allclose(game.Q, game.Q.T, rtol=0.0, atol=1e-12):
        raise ParameterError("potential_ne needs a quadratic game with symmetric Q")
    return _projected_iteration(game, game.interior_point(), 1.0 / game.constants().theta0, tol, max_iter)


def _projected_iteration(game: GameModel, x: np.ndarray, tau: float, tol: float, max_iter: int) -> np.ndarray:
    residual = float("inf")
    for it in range(1, max_iter + 1):
        x_new = game.project(x - tau * pseudo_gradient(game, x))
        residual = float(np.max(np.abs(x_new - x)))
        x = x_new
        if residual < tol:
            logger.debug("oracle converged in %d iterations", it)
            return x
    raise NonConvergenceError(f"centralized iteration did not converge in {max_iter} iterations "
                              f"(last residual {residual:.3g})", residual=residual, iterations=max_iter)


def baseline_consensus_gradient(
    game: GameModel,
    graph: CommGraph,
    schedule: StepSchedule,
    gamma: float,
    init: AugmentedState,
    stop: Optional[StoppingRule] = None,
    *,
    record_every: int = 1,
    x_star: Optional[np.ndarray] = None,
) -> RunResult:
    """
    Per iteration:
      v^i = x^i + gamma sum_{j in N_i} (x^j - x^i)
      x_i^i <- T_Omega_i(v_i^i - alpha_k grad_i J_i(v^i))
      x_{-i}^i <- v_{-i}^i
    """
    stop = stop or StoppingRule()
    d_star = max_degree(graph)
    if not 0 < gamma < 1.0 / (d_star + 1):
        raise ParameterError(f"gamma must lie in (0, 1/(d*+1) = {1.0 / (d_star + 1):.4g}), got {gamma}")
    if not is_connected(graph):
        raise DisconnectedGraphError("communication graph must be connected")
    if graph.n != game.n_players:
        raise ParameterError(f"graph has {graph.n} vertices, game has {game.n_players} players")
    validate_init(game, init)

    reference = stop.reference if stop.reference is not None else x_star
    recorder = TraceRecorder(graph, None, x_star=reference, flags=("baseline",))
    state = replace(init, estimates=init.estimates.astype(float, copy=True),
                    duals=init.duals.astype(float, copy=True))
    recorder.start(state)
    lap = graph.laplacian.astype(float)
    n = game.n_players
    diag = (np.arange(n), np.arange(n))
    logger.info("baseline start: N=%d gamma=%.4g schedule=%s", n, gamma, schedule)

    converged = False
    for _ in range(stop.max_iterations):
        k = state.iteration + 1
        V = state.estimates - gamma * (lap @ state.estimates)
        try:
            grads = game.block_gradient(V)
        except GameDomainError as e:
            raise StepError(f"iteration {k}: {e}", iteration=k, player=e.player, link=e.link) from e
        X = V.copy()
        X[diag] = game.project(V[diag] - schedule.step(k - 1) * grads)
        new = AugmentedState(X, state.duals, k)
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
        if k % record_every == 0:
            recorder.record(entry)
    else:
        if recorder.pending is not None:
            recorder.record(recorder.pending)

    logger.info("baseline done: iterations=%d converged=%s", state.iteration, converged)
    return RunResult(state=state, trace=recorder.trace, converged=converged)
