import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from app.admm import AugmentedState, StoppingRule
from app.diagnostics import ne_residual
from app.errors import DisconnectedGraphError, NonConvergenceError, ParameterError
from app.games import QuadraticGame, example2_game, random_cournot
from app.graph import from_edge_list
from app.reference import (
    StepSchedule,
    adaptive_ne,
    baseline_consensus_gradient,
    centralized_ne,
    default_tau,
    max_tau,
    potential_ne,
    residual_tau,
)


def _init(X):
    X = np.asarray(X, dtype=float)
    return AugmentedState(X, np.zeros_like(X), 0)


# ---------- step schedules

def test_constant_schedule():
    s = StepSchedule.constant(0.3)
    assert s.step(0) == s.step(1000) == 0.3


def test_diminishing_schedule():
    s = StepSchedule.diminishing(2.0, 4.0)
    assert s.step(0) == 0.5
    assert s.step(4) == 0.25


@pytest.mark.parametrize("make", [
    lambda: StepSchedule.constant(0.0),
    lambda: StepSchedule.diminishing(0.0, 1.0),
    lambda: StepSchedule.diminishing(1.0, 0.5),
])
def test_invalid_schedule(make):
    with pytest.raises(ParameterError):
        make()


# ---------- centralized oracle

def test_two_firm_ne(two_firm):
    assert_allclose(centralized_ne(two_firm, tau=0.2), [2.25, 2.25], atol=1e-9)


def test_default_tau(two_firm):
    assert default_tau(two_firm) == pytest.approx(2.0 / 16.0)
    assert max_tau(two_firm.constants()) == pytest.approx(0.25)
    assert_allclose(centralized_ne(two_firm), [2.25, 2.25], atol=1e-9)


def test_zero_solution():
    game = QuadraticGame([[2.0, 0.0], [0.0, 2.0]], [0.0, 0.0], upper=[1.0, 1.0], lower=[-1.0, -1.0])
    assert_array_equal(centralized_ne(game), [0.0, 0.0])


def test_boundary_ne(boundary_game):
    x = centralized_ne(boundary_game)
    assert_allclose(x, [1.0, -0.5], atol=1e-9)


def test_boundary_ne_is_the_only_grid_zero(boundary_game):
    grid = np.linspace(-1.0, 1.0, 201)
    res = np.array([[ne_residual(np.array([a, b]), boundary_game, 0.1) for b in grid] for a in grid])
    i, j = np.unravel_index(np.argmin(res), res.shape)
    assert_allclose([grid[i], grid[j]], [1.0, -0.5], atol=1e-12)
    assert np.count_nonzero(res < 1e-3) == 1


def test_tau_outside_range_rejected(boundary_game):
    # mu = 1, theta0 = 3: admissible steps are (0, 2/9)
    with pytest.raises(ParameterError):
        centralized_ne(boundary_game, tau=0.3)
    with pytest.raises(ParameterError):
        centralized_ne(boundary_game, tau=-0.1)


def test_non_convergence(two_firm):
    with pytest.raises(NonConvergenceError) as exc:
        centralized_ne(two_firm, tau=0.2, max_iter=1)
    assert exc.value.iterations == 1
    assert exc.value.residual > 0


def test_oracle_is_idempotent(two_firm):
    x = centralized_ne(two_firm)
    assert_allclose(centralized_ne(two_firm, x0=x), x, atol=1e-12)


def test_normalization_keeps_the_ne():
    raw = random_cournot(6, 3, np.random.default_rng(21), normalize=False)
    norm = random_cournot(6, 3, np.random.default_rng(21), normalize=True)
    assert_allclose(centralized_ne(norm), centralized_ne(raw), atol=1e-8)


def test_potential_ne_agrees(two_firm, boundary_game):
    assert_allclose(potential_ne(two_firm), centralized_ne(two_firm), atol=1e-9)
    assert_allclose(potential_ne(boundary_game), [1.0, -0.5], atol=1e-9)


def test_potential_ne_needs_symmetric_q():
    game = QuadraticGame([[2.0, 1.0], [0.0, 2.0]], [0.0, 0.0], upper=[1.0, 1.0])
    with pytest.raises(ParameterError):
        potential_ne(game)


# ---------- adaptive oracle

def test_adaptive_single_user(single_user):
    # 1/(2-y)^2 = 1/(1+y) at y^2 - 5y + 3 = 0
    x = centralized_ne(single_user)
    assert x[0] == pytest.approx((5 - np.sqrt(13)) / 2, abs=1e-10)


def test_adaptive_agrees_on_quadratic_games(two_firm, boundary_game):
    assert_allclose(adaptive_ne(two_firm, np.zeros(2)), [2.25, 2.25], atol=1e-10)
    assert_allclose(adaptive_ne(boundary_game, np.zeros(2), tau=50.0), [1.0, -0.5], atol=1e-10)


def test_rate_control_oracle_needs_no_fixed_step():
    game = example2_game()
    x = centralized_ne(game)
    assert x[0] == pytest.approx(3.040289, abs=1e-6)
    assert x[7] == pytest.approx(2.831832, abs=1e-6)
    assert np.all((x >= 0.0) & (x <= 10.0))
    assert ne_residual(x, game, 1.0) < 1e-10
    assert_allclose(centralized_ne(game, tau=0.2, x0=np.ones(15)), x, atol=1e-9)


@pytest.mark.parametrize("kwargs", [{"backtrack": 1.0}, {"expand": 0.9}, {"nu": 1.0}, {"backtrack": 0.0}])
def test_adaptive_rejects_bad_factors(two_firm, kwargs):
    with pytest.raises(ParameterError):
        adaptive_ne(two_firm, np.zeros(2), **kwargs)


def test_adaptive_non_convergence(two_firm):
    with pytest.raises(NonConvergenceError) as exc:
        adaptive_ne(two_firm, np.zeros(2), max_iter=1)
    assert exc.value.iterations == 1


def test_residual_tau(two_firm, single_user):
    assert residual_tau(two_firm) == pytest.approx(default_tau(two_firm))
    assert residual_tau(single_user) == 1.0


# ---------- consensus + gradient baseline

@pytest.mark.parametrize("gamma", [0.0, 0.5, 0.7])
def test_baseline_gamma_bounds(two_firm, k2, gamma):
    with pytest.raises(ParameterError):
        baseline_consensus_gradient(two_firm, k2, StepSchedule.constant(0.1), gamma, _init(np.ones((2, 2))))


def test_baseline_rejects_disconnected(random_game):
    game = random_game(0, n=4)
    g = from_edge_list(4, [(1, 2), (3, 4)])
    with pytest.raises(DisconnectedGraphError):
        baseline_consensus_gradient(game, g, StepSchedule.constant(0.1), 0.2, _init(np.zeros((4, 4))))


def test_baseline_fixed_point(two_firm, k2):
    result = baseline_consensus_gradient(
        two_firm, k2, StepSchedule.diminishing(), 0.3, _init(np.full((2, 2), 2.25)),
        StoppingRule(tol=1e-300, max_iterations=5),
    )
    assert_allclose(result.state.estimates, 2.25, atol=1e-14)


def test_baseline_agreeing_rows_take_a_gradient_step(two_firm, k2):
    # v = x when the rows agree, so only the diagonal moves: 1 - 0.1 * (3 + 1 - 9)
    result = baseline_consensus_gradient(
        two_firm, k2, StepSchedule.constant(0.1), 0.3, _init(np.ones((2, 2))),
        StoppingRule(tol=1e-300, max_iterations=1),
    )
    assert_allclose(result.state.estimates, [[1.5, 1.0], [1.0, 1.5]], rtol=1e-15)
    assert_array_equal(result.state.duals, 0.0)


def test_baseline_converges_constant_step(two_firm, k2):
    x_star = np.array([2.25, 2.25])
    stop = StoppingRule(tol=1e-6, max_iterations=5000, reference=x_star)
    result = baseline_consensus_gradient(
        two_firm, k2, StepSchedule.constant(0.1), 0.3, _init([[0.0, 0.0], [1.0, 1.0]]), stop
    )
    assert result.converged
    assert result.iterations < 1000
    assert_allclose(result.state.actions(), x_star, atol=1e-5)
    assert all(np.isnan(t.delta_z_phi) for t in result.trace)
    assert result.trace[0].condition_flags == ("baseline",)


def test_baseline_converges_diminishing_step(two_firm, k2):
    stop = StoppingRule(tol=1e-3, max_iterations=5000, reference=np.array([2.25, 2.25]))
    result = baseline_consensus_gradient(
        two_firm, k2, StepSchedule.diminishing(), 0.3, _init([[0.0, 0.0], [1.0, 1.0]]), stop
    )
    assert result.converged
    assert result.trace[-1].rel_error < 1e-3
