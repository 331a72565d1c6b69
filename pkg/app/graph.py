"""
Communication graph between players.
- undirected, unweighted, no isolated vertex
- adjacency / degrees / Laplacian kept as read-only integer arrays
- spectral data via a full symmetric eigendecomposition (desk-scale n)
Vertex indices are 1-based at the boundary (edge lists, presets) and
0-based everywhere inside.
"""
from __future__ import annotations
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy import linalg

from app import presets
from app.errors import ConfigError, InvalidEdgeError, IsolatedVertexError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CommGraph:
    n: int
    edges: Tuple[Tuple[int, int], ...]      # 0-based, i < j, sorted
    adjacency: np.ndarray
    degrees: np.ndarray
    laplacian: np.ndarray
    neighbor_lists: Tuple[Tuple[int, ...], ...]

    def neighbors(self, i: int) -> Tuple[int, ...]:
        return self.neighbor_lists[i]

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def from_edge_list(n: int, edges: Iterable[Sequence[int]]) -> CommGraph:
    """Build a validated graph from 1-based (i, j) pairs; duplicates collapse."""
    if n < 1:
        raise InvalidEdgeError(f"graph needs at least one vertex, got n={n}")
    pairs = set()
    for e in edges:
        i, j = int(e[0]), int(e[1])
        if not (1 <= i <= n and 1 <= j <= n):
            raise InvalidEdgeError(f"edge ({i},{j}) out of range 1..{n}")
        if i == j:
            raise InvalidEdgeError(f"self-loop at vertex {i}")
        pairs.add((min(i, j) - 1, max(i, j) - 1))

    adj = np.zeros((n, n), dtype=np.int64)
    for i, j in pairs:
        adj[i, j] = adj[j, i] = 1
    deg = adj.sum(axis=1)
    isolated = [int(v) + 1 for v in np.flatnonzero(deg == 0)]
    if isolated:
        raise IsolatedVertexError(f"isolated vertices: {isolated}")

    lap = np.diag(deg) - adj
    nbrs = tuple(tuple(int(j) for j in np.flatnonzero(adj[i])) for i in range(n))
    return CommGraph(
        n=n,
        edges=tuple(sorted(pairs)),
        adjacency=_frozen(adj),
        degrees=_frozen(deg),
        laplacian=_frozen(lap),
        neighbor_lists=nbrs,
    )


def from_networkx(g: nx.Graph) -> CommGraph:
    nodes = sorted(g.nodes())
    index = {v: k + 1 for k, v in enumerate(nodes)}
    return from_edge_list(len(nodes), [(index[u], index[v]) for u, v in g.edges()])


# ---------- spectral data

def laplacian_spectrum(g: CommGraph) -> np.ndarray:
    return linalg.eigh(g.laplacian.astype(float), eigvals_only=True)


def algebraic_connectivity(g: CommGraph) -> float:
    if g.n < 2:
        return 0.0
    return float(laplacian_spectrum(g)[1])


def max_eigenvalue(g: CommGraph) -> float:
    return float(laplacian_spectrum(g)[-1])


def max_degree(g: CommGraph) -> int:
    return int(g.degrees.max())


def is_connected(g: CommGraph) -> bool:
    # traversal from the first vertex
    return len(nx.node_connected_component(g.to_networkx(), 0)) == g.n


# ---------- edge-list files

_N_HEADER = re.compile(r"^#\s*n\s*=\s*(\d+)\s*$")


def read_edge_list(path: Path | str) -> CommGraph:
    path = Path(path)
    n_header: Optional[int] = None
    edges: List[Tuple[int, int]] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        m = _N_HEADER.match(line)
        if m:
            n_header = int(m.group(1))
            continue
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError("expected 'i j'", location=f"{path}:{lineno}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ConfigError(f"non-integer vertex in {line!r}", location=f"{path}:{lineno}")
    if not edges and n_header is None:
        raise ConfigError("edge list is empty", location=str(path))
    n = n_header if n_header is not None else max(max(e) for e in edges)
    return from_edge_list(n, edges)


def write_edge_list(g: CommGraph, path: Path | str) -> Path:
    path = Path(path)
    lines = [f"# n={g.n}"] + [f"{i + 1} {j + 1}" for i, j in g.edges]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# ---------- presets

_SIZED = re.compile(r"^(ring|path|complete)(\d+)$")


def preset_graph(name: str) -> CommGraph:
    """Resolve 'fig2-ring20', 'ring<n>', 'path<n>', 'complete<n>'."""
    key = name.strip().lower()
    if key == "fig2-ring20":
        return from_edge_list(20, presets.FIG2_EDGES)
    m = _SIZED.match(key)
    if not m:
        raise ConfigError(f"unknown graph preset {name!r}")
    kind, n = m.group(1), int(m.group(2))
    if kind == "ring":
        if n < 3:
            raise ConfigError(f"ring needs n >= 3, got {n}")
        return from_edge_list(n, presets.ring_edges(n))
    if kind == "path":
        return from_edge_list(n, [(i, i + 1) for i in range(1, n)])
    return from_edge_list(n, [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)])


def random_connected_graph(n: int, p: float, rng: np.random.Generator, max_tries: int = 1000) -> CommGraph:
    """Erdos-Renyi G(n, p) resampled until connected."""
    for _ in range(max_tries):
        g = nx.gnp_random_graph(n, p, seed=int(rng.integers(2**31)))
        if nx.is_connected(g):
            return from_networkx(g)
    raise ConfigError(f"no connected G({n},{p}) sample after {max_tries} tries")
