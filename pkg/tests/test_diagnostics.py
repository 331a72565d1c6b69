import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.admm import AdmmParams, AugmentedState, StoppingRule, c_min, run
from app.diagnostics import (
    CSV_FIELDS,
    IterationTrace,
    consensus_residual,
    is_non_increasing,
    kron_quadratic,
    lyapunov_difference_series,
    ne_residual,
    rate_surrogate_holds,
    relative_error,
    restricted_monotonicity_check,
)
from app.errors import UnsupportedTraceError
from app.graph import algebraic_connectivity


def _init():
    return AugmentedState(np.array([[0.0, 0.0], [1.0, 1.0]]), np.zeros((2, 2)), 0)


def _row(k, consensus):
    return IterationTrace(k, math.nan, consensus, 0.0, 0.0, math.nan, math.nan)


# ---------- metrics

def test_consensus_residual_k2(k2):
    assert consensus_residual(np.array([[0.0, 0.0], [1.0, 1.0]]), k2) == 2.0
    assert consensus_residual(np.ones((2, 2)), k2) == 0.0


def test_consensus_residual_matches_laplacian(fig2):
    X = np.random.default_rng(0).normal(size=(20, 20))
    x = X.ravel()
    lap = np.kron(fig2.laplacian, np.eye(20))
    assert consensus_residual(X, fig2) == pytest.approx(x @ lap @ x, rel=1e-12)


def test_kron_quadratic_matches_kron():
    rng = np.random.default_rng(1)
    M = rng.normal(size=(4, 4))
    X = rng.normal(size=(4, 4))
    x = X.ravel()
    assert kron_quadratic(M, X) == pytest.approx(x @ np.kron(M, np.eye(4)) @ x, rel=1e-12)


def test_relative_error():
    assert relative_error(np.array([1.0, 1.0]), np.zeros(2), np.array([2.0, 2.0])) == pytest.approx(0.5)
    # x0 already at x*: plain distance
    assert relative_error(np.array([3.0, 4.0]), np.zeros(2), np.zeros(2)) == pytest.approx(5.0)


def test_ne_residual(two_firm, boundary_game):
    assert ne_residual(np.array([2.25, 2.25]), two_firm, 0.1) == pytest.approx(0.0, abs=1e-15)
    assert ne_residual(np.zeros(2), two_firm, 0.1) == pytest.approx(0.9)
    assert ne_residual(np.array([1.0, -0.5]), boundary_game, 0.1) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(ValueError):
        ne_residual(np.zeros(2), two_firm, 0.0)


# ---------- recorded traces

def test_first_row_has_no_lyapunov_difference(two_firm, k2):
    result = run(two_firm, k2, AdmmParams.create(1.0, 13.0, 10.0, 2), _init(), StoppingRule(max_iterations=3))
    first = result.trace[0]
    assert first.k == 0
    assert math.isnan(first.delta_z_phi) and math.isnan(first.rate_product)
    assert first.consensus_residual == 2.0
    assert math.isnan(first.rel_error)
    assert all(not math.isnan(t.delta_z_phi) for t in result.trace[1:])
    assert len(first.row()) == len(CSV_FIELDS)


def test_rate_product_is_k_times_delta_z(two_firm, k2):
    result = run(two_firm, k2, AdmmParams.create(1.0, 13.0, 10.0, 2), _init(), StoppingRule(max_iterations=10))
    for t in result.trace[1:]:
        assert t.rate_product == pytest.approx(t.k * t.delta_z_phi)


def test_lyapunov_differences_non_increasing(two_firm, k2):
    # c0 = 24 > c_min = 6 and lambda_min(H) = 2048 above theta_bar^2 / (2 mu_bar)
    params = AdmmParams.create(1.0, 24.0, 2000.0, 2)
    result = run(two_firm, k2, params, _init(), StoppingRule(tol=1e-300, max_iterations=300), keep_estimates=True)
    assert result.theory.condition_satisfied
    series = lyapunov_difference_series(result.trace, params, k2)
    assert [k for k, _ in series] == list(range(1, len(result.trace)))
    values = [v for _, v in series]
    assert_allclose(values, [t.delta_z_phi for t in result.trace[1:]], rtol=1e-10)
    assert is_non_increasing(values)


def test_lyapunov_needs_every_iteration(two_firm, k2):
    params = AdmmParams.create(1.0, 13.0, 10.0, 2)
    gappy = run(two_firm, k2, params, _init(), StoppingRule(tol=1e-300, max_iterations=10),
                record_every=2, keep_estimates=True)
    with pytest.raises(UnsupportedTraceError):
        lyapunov_difference_series(gappy.trace, params, k2)
    bare = run(two_firm, k2, params, _init(), StoppingRule(tol=1e-300, max_iterations=10))
    with pytest.raises(UnsupportedTraceError):
        lyapunov_difference_series(bare.trace, params, k2)


def test_is_non_increasing():
    assert is_non_increasing([3.0, 2.0, 2.0, 1.0])
    assert is_non_increasing([1.0, 1.0 + 1e-14])
    assert not is_non_increasing([1.0, 2.0])


def test_rate_surrogate_on_converging_run(two_firm, k2):
    result = run(two_firm, k2, AdmmParams.create(1.0, 13.0, 10.0, 2), _init(),
                 StoppingRule(tol=1e-300, max_iterations=400))
    assert rate_surrogate_holds(result.trace)


def test_rate_surrogate_fails_for_constant_disagreement():
    trace = [_row(k, 1.0) for k in range(0, 41)]
    assert not rate_surrogate_holds(trace)
    assert rate_surrogate_holds(trace[:3])


# ---------- restricted monotonicity

def test_monotonicity_two_firm_above_c_min(two_firm, k2):
    c0 = 2 * c_min(4.0, 4.0, 2.0, 2.0)
    found = restricted_monotonicity_check(two_firm, k2, c0, n_samples=2000, seed=3)
    assert found.mu_bar > 0
    assert found.violations == 0
    assert found.min_margin >= 0


def test_monotonicity_random_games_above_c_min(random_game, ring_with_chord):
    g = ring_with_chord(6)
    lam2 = algebraic_connectivity(g)
    for seed in range(10):
        game = random_game(seed)
        k = game.constants()
        c0 = 2 * c_min(k.theta, k.theta0, k.mu, lam2)
        found = restricted_monotonicity_check(game, g, c0, n_samples=1000, seed=seed)
        assert found.violations == 0


def test_monotonicity_without_consensus_penalty_loses_monotonicity(two_firm, k2):
    found = restricted_monotonicity_check(two_firm, k2, 0.0, n_samples=500, seed=1)
    assert found.mu_bar < 0
    assert found.min_ratio < 0
