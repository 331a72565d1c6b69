"""
Games played over the communication graph.

A game is described to the solvers only through
- per-player action intervals Omega_i = [lo_i, hi_i]
- partial gradients grad_i J_i(y), evaluated at any estimate vector y
- the monotonicity / Lipschitz constants (mu, theta0, theta)

Two concrete games ship with the package: a networked Nash-Cournot game with
linear inverse demand (quadratic, constants exact) and a rate-control game on a
multi-hop network (non-quadratic, constants sampled).
"""
from __future__ import annotations
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from app import presets
from app.errors import GameDomainError, InvalidGameError

logger = logging.getLogger(__name__)

Sampler = Callable[[np.random.Generator], np.ndarray]

SLACK_FLOOR = 1e-9
FD_STEP = 1e-6


@dataclass(frozen=True)
class GameConstants:
    mu: float
    theta0: float
    theta: float
    exact: bool = True
    samples: int = 0
    skipped: int = 0


class GameModel(ABC):
    """N-player game with scalar actions on closed intervals."""

    def __init__(self, lower: Sequence[float], upper: Sequence[float]):
        lo = np.asarray(lower, dtype=float).copy()
        hi = np.asarray(upper, dtype=float).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InvalidGameError("action bounds must be two vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidGameError("action intervals must be bounded")
        if np.any(lo >= hi):
            bad = [int(i) + 1 for i in np.flatnonzero(lo >= hi)]
            raise InvalidGameError(f"empty action interval for players {bad}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lower = lo
        self.upper = hi
        self._constants: Optional[GameConstants] = None

    @property
    def n_players(self) -> int:
        return int(self.lower.shape[0])

    def action_interval(self, i: int) -> Tuple[float, float]:
        return float(self.lower[i]), float(self.upper[i])

    def project(self, v: np.ndarray) -> np.ndarray:
        return np.clip(v, self.lower, self.upper)

    def interior_point(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @abstractmethod
    def cost(self, i: int, y: np.ndarray) -> float:
        ...

    @abstractmethod
    def partial_gradient(self, i: int, y: np.ndarray) -> float:
        ...

    def block_gradient(self, X: np.ndarray) -> np.ndarray:
        """Row i of X is player i's estimate; returns [grad_i J_i(X[i])]_i."""
        return np.array([self.partial_gradient(i, X[i]) for i in range(self.n_players)])

    @abstractmethod
    def compute_constants(self) -> GameConstants:
        ...

    def constants(self) -> GameConstants:
        if self._constants is None:
            self._constants = self.compute_constants()
        return self._constants


# ---------- operations shared by every game

def pseudo_gradient(game: GameModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = game.n_players
    return game.block_gradient(np.broadcast_to(x, (n, n)))


def extended_pseudo_gradient(game: GameModel, X: np.ndarray) -> np.ndarray:
    n = game.n_players
    return game.block_gradient(np.asarray(X, dtype=float).reshape(n, n))


def project_action(game: GameModel, i: int, v: float) -> float:
    lo, hi = game.action_interval(i)
    return min(max(float(v), lo), hi)


def jacobian_fd(game: GameModel, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central finite-difference Jacobian of the pseudo-gradient."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    jac = np.empty((n, n))
    for k in range(n):
        h = step * max(1.0, abs(x[k]))
        e = np.zeros(n)
        e[k] = h
        jac[:, k] = (pseudo_gradient(game, x + e) - pseudo_gradient(game, x - e)) / (2.0 * h)
    return jac


def estimate_constants_sampled(
    game: GameModel,
    sampler: Optional[Sampler] = None,
    n_samples: int = 200,
    rng: Optional[np.random.Generator] = None,
) -> GameConstants:
    """
    Sampled (mu, theta0, theta); estimates, not certificates.
    theta uses the row structure of the extended Jacobian: row i only touches
    block i, so its spectral norm is the largest row norm of DF over the points.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    sampler = sampler or default_sampler(game)
    mu, theta0, theta = np.inf, 0.0, 0.0
    used = skipped = 0
    for _ in range(n_samples):
        x = np.asarray(sampler(rng), dtype=float)
        try:
            jac = jacobian_fd(game, x)
        except GameDomainError:
            skipped += 1
            continue
        used += 1
        sym = 0.5 * (jac + jac.T)
        mu = min(mu, float(linalg.eigh(sym, eigvals_only=True)[0]))
        theta0 = max(theta0, float(linalg.norm(jac, 2)))
        theta = max(theta, float(np.max(np.linalg.norm(jac, axis=1))))
    if skipped:
        logger.warning("constant sampling skipped %d of %d out-of-domain points", skipped, n_samples)
    if used == 0:
        raise GameDomainError("no sampled point was inside the game's domain")
    return GameConstants(mu=mu, theta0=theta0, theta=theta, exact=False, samples=used, skipped=skipped)


def default_sampler(game: GameModel) -> Sampler:
    if isinstance(game, RateControlGame) and game.sampling == "fair_share":
        return feasible_sampler(game)
    return omega_sampler(game)


def omega_sampler(game: GameModel, vertex_share: float = 0.5) -> Sampler:
    """Uniform points of Omega, mixed with random vertices of Omega at rate vertex_share."""
    lo, hi = game.lower, game.upper

    def draw(rng: np.random.Generator) -> np.ndarray:
        if rng.random() < vertex_share:
            return np.where(rng.random(lo.shape[0]) < 0.5, lo, hi)
        return rng.uniform(lo, hi)
    return draw


# ---------- games with an affine pseudo-gradient

class QuadraticGame(GameModel):
    """
    F(x) = Q x + r on a box. J_i(x) = 0.5 Q_ii x_i^2 + x_i sum_{k != i} Q_ik x_k + r_i x_i.
    Constants are exact: mu = lambda_min(sym Q), theta0 = theta = ||Q||_2.
    """

    def __init__(self, Q: Sequence[Sequence[float]], r: Sequence[float],
                 upper: Sequence[float], lower: Optional[Sequence[float]] = None):
        Qm = np.array(Q, dtype=float)
        rv = np.array(r, dtype=float)
        n = rv.shape[0]
        if Qm.shape != (n, n):
            raise InvalidGameError(f"Q must be {n} x {n}, got {Qm.shape}")
        super().__init__(np.zeros(n) if lower is None else lower, upper)
        if self.n_players != n:
            raise InvalidGameError(f"action bounds must have length N={n}")
        Qm.setflags(write=False)
        rv.setflags(write=False)
        self.Q = Qm
        self.r = rv

    def cost(self, i: int, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float)
        cross = self.Q[i] @ y - self.Q[i, i] * y[i]
        return float(0.5 * self.Q[i, i] * y[i] ** 2 + y[i] * cross + self.r[i] * y[i])

    def partial_gradient(self, i: int, y: np.ndarray) -> float:
        return float(self.Q[i] @ np.asarray(y, dtype=float) + self.r[i])

    def block_gradient(self, X: np.ndarray) -> np.ndarray:
        return np.einsum("ik,ik->i", self.Q, X) + self.r

    def compute_constants(self) -> GameConstants:
        return cournot_constants(self)

    def extended_matrix(self) -> np.ndarray:
        """Qbar = R^T (I_N kron Q): N x N^2, row i holds Q[i] in block i."""
        n = self.n_players
        qbar = np.zeros((n, n * n))
        for i in range(n):
            qbar[i, i * n:(i + 1) * n] = self.Q[i]
        return qbar


def cournot_constants(game: QuadraticGame) -> GameConstants:
    """mu = lambda_min(sym Q), theta0 = theta = ||Q||_2 (= lambda_max for symmetric Q)."""
    sym = 0.5 * (game.Q + game.Q.T)
    mu = float(linalg.eigh(sym, eigvals_only=True)[0])
    if mu <= 0:
        raise InvalidGameError(f"pseudo-gradient is not strongly monotone (lambda_min = {mu:.3g})")
    theta = float(linalg.norm(game.Q, 2))
    return GameConstants(mu=mu, theta0=theta, theta=theta, exact=True)


# ---------- Nash-Cournot over networked markets

class CournotGame(QuadraticGame):
    """
    Firm i supplies x_i to each of its n_i markets (column A_i of A).
    J_i(x) = n_i^2 q_i x_i^2 + n_i b_i x_i - (Pbar - Z A x)^T A_i x_i
    F(x) = Q x + r,  Q = Sigma + A^T Z A,  Sigma = diag(2 n_i^2 q_i + A_i^T Z A_i).
    With normalize=True each J_i is divided by 2 n_i^2 q_i, the leading coefficient of
    grad_i J_i, so Q has a unit diagonal up to the market coupling (rows of Q and r scaled).
    """

    def __init__(
        self,
        participation: Sequence[Sequence[float]],
        price_intercepts: Sequence[float],
        price_slopes: Sequence[float],
        cost_quad: Sequence[float],
        cost_lin: Sequence[float],
        upper: Sequence[float],
        lower: Optional[Sequence[float]] = None,
        normalize: bool = False,
    ):
        A = np.array(participation, dtype=float)
        if A.ndim != 2:
            raise InvalidGameError("participation must be an m x N matrix")
        m, n = A.shape
        if not np.all((A == 0) | (A == 1)):
            raise InvalidGameError("participation entries must be 0 or 1")
        pbar = np.array(price_intercepts, dtype=float)
        z = np.array(price_slopes, dtype=float)
        q = np.array(cost_quad, dtype=float)
        b = np.array(cost_lin, dtype=float)
        if pbar.shape != (m,) or z.shape != (m,):
            raise InvalidGameError(f"price vectors must have length m={m}")
        if q.shape != (n,) or b.shape != (n,):
            raise InvalidGameError(f"cost vectors must have length N={n}")
        if np.any(pbar <= 0) or np.any(z <= 0):
            raise InvalidGameError("price intercepts and slopes must be positive")
        if np.any(q <= 0):
            raise InvalidGameError("quadratic cost coefficients must be positive")
        n_mk = A.sum(axis=0)
        if np.any(n_mk < 1):
            raise InvalidGameError(f"firms in no market: {[int(i) + 1 for i in np.flatnonzero(n_mk < 1)]}")

        AZA = A.T @ (z[:, None] * A)
        sigma = np.diag(2.0 * n_mk**2 * q + np.diag(AZA))
        scale = 2.0 * n_mk**2 * q if normalize else np.ones(n)
        Q = (sigma + AZA) / scale[:, None]
        r = (n_mk * b - A.T @ pbar) / scale
        super().__init__(Q, r, upper, lower)

        self.participation = A
        self.price_intercepts = pbar
        self.price_slopes = z
        self.cost_quad = q
        self.cost_lin = b
        self.markets_per_firm = n_mk
        self.normalize = normalize
        self.sigma = sigma
        self.scale = scale
        for arr in (A, pbar, z, q, b, n_mk, sigma, scale):
            arr.setflags(write=False)

    @property
    def n_markets(self) -> int:
        return int(self.participation.shape[0])

    def cost(self, i: int, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float)
        n_i, q_i, b_i = self.markets_per_firm[i], self.cost_quad[i], self.cost_lin[i]
        price = self.price_intercepts - self.price_slopes * (self.participation @ y)
        val = n_i**2 * q_i * y[i] ** 2 + n_i * b_i * y[i] - price @ self.participation[:, i] * y[i]
        return float(val / self.scale[i])


def random_cournot(
    n_firms: int,
    n_markets: int,
    rng: np.random.Generator,
    *,
    slope: float = 0.01,
    normalize: bool = True,
    participation: Optional[Sequence[Sequence[float]]] = None,
    max_markets: int = 3,
) -> CournotGame:
    """
    Example-1 style instance: q_i, b_i ~ U(1,2), z_k = slope,
    Omega_i = [0, 1/n_i], Pbar_k ~ z_k [A hi]_k + U(1,2).
    """
    if participation is None:
        A = np.zeros((n_markets, n_firms))
        for i in range(n_firms):
            k = int(rng.integers(1, min(max_markets, n_markets) + 1))
            A[rng.choice(n_markets, size=k, replace=False), i] = 1.0
    else:
        A = np.asarray(participation, dtype=float)
    n_mk = A.sum(axis=0)
    q = rng.uniform(1.0, 2.0, n_firms)
    b = rng.uniform(1.0, 2.0, n_firms)
    hi = 1.0 / np.maximum(n_mk, 1.0)
    z = np.full(n_markets, slope)
    pbar = z * (A @ hi) + rng.uniform(1.0, 2.0, n_markets)
    return CournotGame(A, pbar, z, q, b, upper=hi, normalize=normalize)


def example1_game(rng: np.random.Generator, variant: str = "standard") -> CournotGame:
    A = np.asarray(presets.participation_matrix(), dtype=float)
    if variant == "standard":
        return random_cournot(presets.EXAMPLE1_FIRMS, presets.EXAMPLE1_MARKETS, rng,
                              slope=0.01, normalize=True, participation=A)
    if variant == "extreme":
        m, n = A.shape
        n_mk = A.sum(axis=0)
        level = np.where(np.arange(n) < n // 2, 0.01, 100.0)
        q = level * rng.uniform(1.0, 2.0, n)
        b = level * rng.uniform(1.0, 2.0, n)
        hi = 100.0 / n_mk
        z = rng.uniform(1.0, 10.0, m)
        # prices stay positive for every feasible supply
        pbar = z * (A @ hi) + rng.uniform(1.0, 2.0, m)
        return CournotGame(A, pbar, z, q, b, upper=hi, normalize=False)
    raise InvalidGameError(f"unknown Example 1 variant {variant!r}")


# ---------- rate control over a multi-hop network

class RateControlGame(GameModel):
    """
    User i sends y_i over route R_i (column i of the link/user incidence).
    J_i(y) = sum_{j in R_i} kappa / (C_j - sum_{w: j in R_w} y_w) - chi_i log(y_i + 1)
    grad_i J_i(y) = sum_{j in R_i} kappa / slack_j^2 - chi_i / (y_i + 1)
    Defined only while every link on R_i keeps slack >= SLACK_FLOOR * C_j.

    Constants are sampled over Omega (sampling="omega"), skipping points where
    a link saturates, or below each user's fair share (sampling="fair_share")
    when most of Omega lies outside the domain.
    """

    def __init__(
        self,
        incidence: Sequence[Sequence[float]],
        capacities: Sequence[float],
        kappa: float,
        chi: Sequence[float],
        upper: Optional[Sequence[float]] = None,
        lower: Optional[Sequence[float]] = None,
        n_samples: int = 400,
        seed: int = 0,
        sampling: Literal["omega", "fair_share"] = "omega",
    ):
        if sampling not in ("omega", "fair_share"):
            raise InvalidGameError(f"unknown sampling domain {sampling!r}")
        inc = np.array(incidence, dtype=float)
        if inc.ndim != 2:
            raise InvalidGameError("incidence must be a links x users matrix")
        m, n = inc.shape
        if not np.all((inc == 0) | (inc == 1)):
            raise InvalidGameError("incidence entries must be 0 or 1")
        if np.any(inc.sum(axis=0) < 1):
            raise InvalidGameError(f"users without a route: {[int(i) + 1 for i in np.flatnonzero(inc.sum(axis=0) < 1)]}")
        cap = np.array(capacities, dtype=float)
        chi_v = np.array(chi, dtype=float)
        if cap.shape != (m,) or np.any(cap <= 0):
            raise InvalidGameError(f"capacities must be {m} positive numbers")
        if chi_v.shape != (n,) or np.any(chi_v <= 0):
            raise InvalidGameError(f"chi must be {n} positive numbers")
        if kappa <= 0:
            raise InvalidGameError("kappa must be positive")
        super().__init__(np.zeros(n) if lower is None else lower,
                         np.full(n, 10.0) if upper is None else upper)
        if self.n_players != n:
            raise InvalidGameError(f"action bounds must have length N={n}")
        self.incidence = inc
        self.capacities = cap
        self.kappa = float(kappa)
        self.chi = chi_v
        self.routes = tuple(tuple(int(j) for j in np.flatnonzero(inc[:, i])) for i in range(n))
        self.n_samples = n_samples
        self.seed = seed
        self.sampling = sampling
        for arr in (self.incidence, self.capacities, self.chi):
            arr.setflags(write=False)

    @property
    def n_links(self) -> int:
        return int(self.incidence.shape[0])

    def fair_share(self) -> np.ndarray:
        """Per-user flow at which its tightest link would be exactly full if all its users sent it."""
        users_on = self.incidence.sum(axis=1)
        share = np.array([min(self.capacities[j] / users_on[j] for j in route) for route in self.routes])
        return np.minimum(share, self.upper)

    def interior_point(self) -> np.ndarray:
        return np.maximum(self.lower, 0.5 * self.fair_share())

    def _slack(self, i: int, y: np.ndarray) -> np.ndarray:
        slack = self.capacities - self.incidence @ y
        for j in self.routes[i]:
            if slack[j] < SLACK_FLOOR * self.capacities[j]:
                raise GameDomainError(
                    f"link {j + 1} saturated for player {i + 1} (slack {slack[j]:.3g})",
                    player=i, link=j,
                )
        if y[i] <= -1.0:
            raise GameDomainError(f"rate {y[i]:.3g} of player {i + 1} outside log domain", player=i)
        return slack

    def cost(self, i: int, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float)
        slack = self._slack(i, y)
        congestion = sum(self.kappa / slack[j] for j in self.routes[i])
        return float(congestion - self.chi[i] * np.log(y[i] + 1.0))

    def partial_gradient(self, i: int, y: np.ndarray) -> float:
        y = np.asarray(y, dtype=float)
        slack = self._slack(i, y)
        congestion = sum(self.kappa / slack[j] ** 2 for j in self.routes[i])
        return float(congestion - self.chi[i] / (y[i] + 1.0))

    def block_gradient(self, X: np.ndarray) -> np.ndarray:
        slack = self.capacities[None, :] - X @ self.incidence.T       # (N, links)
        on_route = self.incidence.T > 0
        bad = on_route & (slack < SLACK_FLOOR * self.capacities[None, :])
        if bad.any():
            i, j = (int(v) for v in np.argwhere(bad)[0])
            raise GameDomainError(f"link {j + 1} saturated for player {i + 1} (slack {slack[i, j]:.3g})",
                                  player=i, link=j)
        own = np.diag(X)
        if np.any(own <= -1.0):
            i = int(np.flatnonzero(own <= -1.0)[0])
            raise GameDomainError(f"rate {own[i]:.3g} of player {i + 1} outside log domain", player=i)
        safe = np.where(on_route, slack, 1.0)
        congestion = np.where(on_route, self.kappa / safe**2, 0.0).sum(axis=1)
        return congestion - self.chi / (own + 1.0)

    def compute_constants(self) -> GameConstants:
        rng = np.random.default_rng(self.seed)
        consts = estimate_constants_sampled(self, default_sampler(self), self.n_samples, rng)
        logger.warning("rate-control constants are sampled estimates over %s (mu=%.4g theta0=%.4g theta=%.4g)",
                       self.sampling, consts.mu, consts.theta0, consts.theta)
        return consts


def feasible_sampler(game: RateControlGame, fill: float = 0.95) -> Sampler:
    """Uniform flows below each user's fair share, so every link keeps slack."""
    top = np.maximum(game.lower, fill * game.fair_share())
    return lambda rng: rng.uniform(game.lower, top)


def example2_game(
    kappa: float = presets.EXAMPLE2_DEFAULTS["kappa"],
    capacity: float = presets.EXAMPLE2_DEFAULTS["capacity"],
    chi: float = presets.EXAMPLE2_DEFAULTS["chi"],
    incidence: Optional[Sequence[Sequence[float]]] = None,
    seed: int = 0,
    sampling: Literal["omega", "fair_share"] = "fair_share",
) -> RateControlGame:
    inc = np.asarray(incidence if incidence is not None else presets.incidence_matrix(), dtype=float)
    m, n = inc.shape
    # two users share almost every link, so Omega = [0, 10]^15 is mostly saturated
    return RateControlGame(inc, np.full(m, capacity), kappa, np.full(n, chi),
                           upper=np.full(n, presets.EXAMPLE2_DEFAULTS["upper"]), seed=seed,
                           sampling=sampling)


# ---------- building a game from its description

def load_game(spec, seed: int = 0) -> GameModel:
    """
    Game from a config.GameSpec. Random instances draw from the "game" stream
    of the description's own seed, or of `seed` when it has none.
    """
    from app.rng import stream

    rng = stream(spec.seed if getattr(spec, "seed", None) is not None else seed, "game")
    if spec.kind == "quadratic":
        return QuadraticGame(spec.Q, spec.r, spec.upper, spec.lower)
    if spec.kind == "cournot":
        if spec.preset == "example1":
            return example1_game(rng, spec.variant)
        if spec.price_intercepts is not None:
            return CournotGame(spec.participation, spec.price_intercepts, spec.price_slopes, spec.cost_quad,
                               spec.cost_lin, spec.upper, spec.lower, normalize=spec.normalize)
        return random_cournot(spec.n_firms, spec.n_markets, rng, slope=spec.slope, normalize=spec.normalize,
                              participation=spec.participation)
    if spec.kind == "rate_control":
        sample_seed = int(rng.integers(2**63))
        if spec.preset == "example2-default":
            return example2_game(kappa=spec.kappa, capacity=spec.capacity, chi=spec.chi_value, seed=sample_seed,
                                 sampling=spec.sampling or "fair_share")
        inc = np.asarray(spec.incidence, dtype=float)
        m, n = inc.shape
        caps = spec.capacities if spec.capacities is not None else np.full(m, spec.capacity)
        chi = spec.chi if spec.chi is not None else np.full(n, spec.chi_value)
        return RateControlGame(inc, caps, spec.kappa, chi, upper=spec.upper, lower=spec.lower,
                               n_samples=spec.n_samples, seed=sample_seed, sampling=spec.sampling or "omega")
    raise InvalidGameError(f"unknown game kind {spec.kind!r}")
