import numpy as np
import pytest

from app.games import CournotGame, QuadraticGame, RateControlGame, random_cournot
from app.graph import from_edge_list, preset_graph


@pytest.fixture
def two_firm():
    """One market, z=1, Pbar=10, q=0.5, b=1: Q=[[3,1],[1,3]], r=(-9,-9), NE (2.25, 2.25)."""
    return CournotGame([[1, 1]], [10.0], [1.0], [0.5, 0.5], [1.0, 1.0], upper=[10.0, 10.0])


@pytest.fixture
def k2():
    return from_edge_list(2, [(1, 2)])


@pytest.fixture
def boundary_game():
    """NE (1, -0.5) with the first action at its upper bound."""
    return QuadraticGame([[2.0, 1.0], [1.0, 2.0]], [-3.0, 0.0], upper=[1.0, 1.0], lower=[-1.0, -1.0])


@pytest.fixture
def single_user():
    """kappa=1, C=2, chi=1, Omega=[0,1]."""
    return RateControlGame([[1]], [2.0], 1.0, [1.0], upper=[1.0])


@pytest.fixture
def random_game():
    def make(seed: int, n: int = 6, m: int = 3):
        rng = np.random.default_rng(seed)
        return random_cournot(n, m, rng)
    return make


@pytest.fixture
def ring_with_chord():
    def make(n: int):
        edges = [(i, i + 1) for i in range(1, n)] + [(1, n)]
        if n >= 5:
            edges.append((1, n // 2 + 1))
        return from_edge_list(n, edges)
    return make


@pytest.fixture
def fig2():
    return preset_graph("fig2-ring20")
