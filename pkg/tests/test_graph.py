import math

import networkx as nx
import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from app.errors import ConfigError, InvalidEdgeError, IsolatedVertexError
from app.graph import (
    algebraic_connectivity,
    from_edge_list,
    from_networkx,
    is_connected,
    laplacian_spectrum,
    max_degree,
    max_eigenvalue,
    preset_graph,
    random_connected_graph,
    read_edge_list,
    write_edge_list,
)


def test_path3_laplacian_and_degrees():
    g = from_edge_list(3, [(1, 2), (2, 3)])
    assert_array_equal(g.laplacian, [[1, -1, 0], [-1, 2, -1], [0, -1, 1]])
    assert_array_equal(g.degrees, [1, 2, 1])
    assert g.edges == ((0, 1), (1, 2))
    assert max_degree(g) == 2


def test_laplacian_rows_sum_to_zero_and_symmetric(fig2):
    assert_array_equal(fig2.laplacian.sum(axis=1), np.zeros(20))
    assert_array_equal(fig2.laplacian, fig2.laplacian.T)


def test_duplicate_and_reversed_edges_collapse():
    g = from_edge_list(3, [(1, 2), (2, 1), (1, 2), (2, 3)])
    assert len(g.edges) == 2
    assert_array_equal(g.degrees, [1, 2, 1])


def test_arrays_are_read_only():
    g = from_edge_list(2, [(1, 2)])
    with pytest.raises(ValueError):
        g.laplacian[0, 0] = 5


@pytest.mark.parametrize("edges", [[(1, 4)], [(0, 1)], [(1, 1)]])
def test_invalid_edges(edges):
    with pytest.raises(InvalidEdgeError):
        from_edge_list(3, edges)


def test_isolated_vertex_rejected():
    with pytest.raises(IsolatedVertexError, match=r"\[3\]"):
        from_edge_list(3, [(1, 2)])


def test_neighbors_sorted():
    g = from_edge_list(4, [(1, 4), (1, 2), (1, 3), (2, 3)])
    assert g.neighbors(0) == (1, 2, 3)
    assert g.neighbors(3) == (0,)


def test_spectrum_path3():
    g = from_edge_list(3, [(1, 2), (2, 3)])
    assert_allclose(laplacian_spectrum(g), [0.0, 1.0, 3.0], atol=1e-12)
    assert algebraic_connectivity(g) == pytest.approx(1.0)
    assert max_eigenvalue(g) == pytest.approx(3.0)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_complete_graph_lambda2_is_n(n):
    assert algebraic_connectivity(preset_graph(f"complete{n}")) == pytest.approx(n)


def test_ring15_lambda2():
    assert algebraic_connectivity(preset_graph("ring15")) == pytest.approx(2 - 2 * math.cos(2 * math.pi / 15))


def test_fig2_preset_lambda2(fig2):
    assert fig2.n == 20
    assert 0.101 <= algebraic_connectivity(fig2) <= 0.103


def test_disconnected_graph():
    g = from_edge_list(4, [(1, 2), (3, 4)])
    assert not is_connected(g)
    assert algebraic_connectivity(g) == pytest.approx(0.0, abs=1e-12)


def test_connected_iff_lambda2_positive():
    rng = np.random.default_rng(3)
    for _ in range(10):
        g = random_connected_graph(7, 0.4, rng)
        assert is_connected(g)
        assert algebraic_connectivity(g) > 1e-9


def _random_graphs(count=200, seed=17):
    """G(n, p) samples with n <= 12 and no isolated vertex, plus disjoint unions of two connected pieces."""
    rng = np.random.default_rng(seed)
    graphs = []
    while len(graphs) < count:
        n = int(rng.integers(2, 13))
        p = float(rng.uniform(0.1, 0.6))
        g = nx.gnp_random_graph(n, p, seed=int(rng.integers(1 << 31)))
        if any(d == 0 for _, d in g.degree()):
            continue
        graphs.append(from_networkx(g))
    for _ in range(count // 4):
        a = random_connected_graph(int(rng.integers(2, 7)), 0.5, rng).to_networkx()
        b = random_connected_graph(int(rng.integers(2, 7)), 0.5, rng).to_networkx()
        graphs.append(from_networkx(nx.disjoint_union(a, b)))
    return graphs


def test_connected_iff_lambda2_positive_including_disconnected():
    seen = {True: 0, False: 0}
    for g in _random_graphs():
        connected = is_connected(g)
        assert connected == nx.is_connected(g.to_networkx())
        assert connected == (algebraic_connectivity(g) > 1e-12)
        seen[connected] += 1
    assert seen[True] > 0 and seen[False] > 0


def test_max_eigenvalue_at_most_twice_max_degree(fig2):
    for g in _random_graphs(count=80, seed=5) + [fig2, preset_graph("ring15"), preset_graph("complete6")]:
        assert max_eigenvalue(g) <= 2 * max_degree(g) + 1e-9


def test_laplacian_quadratic_form_bounded_by_lambda2(fig2):
    rng = np.random.default_rng(8)
    for g in [fig2, preset_graph("ring15"), preset_graph("path9")] + [random_connected_graph(9, 0.3, rng) for _ in range(5)]:
        lam2 = algebraic_connectivity(g)
        lap = g.laplacian.astype(float)
        for _ in range(50):
            x = rng.normal(size=g.n)
            x -= x.mean()
            assert x @ lap @ x >= lam2 * (x @ x) - 1e-9 * (x @ x)


def test_fig2_degrees(fig2):
    expected = np.full(20, 2)
    expected[[1, 5, 12, 14]] = 3    # vertices 2, 6, 13, 15
    assert_array_equal(fig2.degrees, expected)
    assert max_degree(fig2) == 3


def test_networkx_round_trip():
    g = from_networkx(nx.petersen_graph())
    assert g.n == 10
    assert_array_equal(g.degrees, np.full(10, 3))
    assert nx.is_isomorphic(g.to_networkx(), nx.petersen_graph())


def test_preset_unknown():
    with pytest.raises(ConfigError):
        preset_graph("hypercube4")


def test_edge_list_round_trip(tmp_path, fig2):
    path = write_edge_list(fig2, tmp_path / "g.txt")
    g = read_edge_list(path)
    assert g.n == 20
    assert g.edges == fig2.edges
    assert path.read_text().startswith("# n=20\n")


def test_edge_list_comments_and_header(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# a path\n# n=3\n\n1 2   # first\n2 3\n")
    g = read_edge_list(p)
    assert g.n == 3
    assert g.edges == ((0, 1), (1, 2))


def test_edge_list_malformed_line_reports_location(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("1 2\n2 3\n3 x\n")
    with pytest.raises(ConfigError) as exc:
        read_edge_list(p)
    assert exc.value.location == f"{p}:3"


def test_edge_list_header_adds_isolated_vertex(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("# n=4\n1 2\n2 3\n")
    with pytest.raises(IsolatedVertexError):
        read_edge_list(p)
