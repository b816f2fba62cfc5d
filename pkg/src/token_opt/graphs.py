"""Finite undirected graphs used as communication topologies.

Nodes are the dense integers ``0..n-1``. Graphs are immutable once built and
every builder either returns a connected graph or raises.
"""

from dataclasses import dataclass, field
import itertools
import math

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from ._rng import STREAM_GRAPH, make_rng
from ._validation import check_int, check_real

MAX_NODES = 5000
GEOMETRIC_MAX_ATTEMPTS = 1000


class GraphError(ValueError):
    """Raised when a graph cannot be built or parsed."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph stored as sorted adjacency lists.

    Parameters
    ----------
    n : int
        Number of nodes.
    adjacency : tuple of tuple of int
        ``adjacency[v]`` is the sorted tuple of neighbours of ``v``.
    name : str
        Free-form label, used in logs and CSV metadata.
    """

    n: int
    adjacency: tuple
    name: str = field(default="graph", compare=False)

    def __post_init__(self):
        if len(self.adjacency) != self.n:
            raise GraphError(f"expected {self.n} adjacency lists, got {len(self.adjacency)}")
        for v, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise GraphError(f"adjacency of node {v} must be sorted and duplicate-free")
            for w in nbrs:
                if w == v:
                    raise GraphError(f"self-loop at node {v}")
                if not 0 <= w < self.n:
                    raise GraphError(f"node {v} has out-of-range neighbour {w}")
                if v not in self.adjacency[w]:
                    raise GraphError(f"edge {v}-{w} is not symmetric")
        if not self.is_connected():
            raise GraphError(f"graph '{self.name}' is not connected")

    @classmethod
    def from_edges(cls, n, edges, name="graph"):
        nbrs = [set() for _ in range(n)]
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise GraphError(f"self-loop at node {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={n}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        return cls(n, tuple(tuple(sorted(s)) for s in nbrs), name=name)

    @property
    def degrees(self):
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    @property
    def edge_count(self):
        return int(self.degrees.sum()) // 2

    def edges(self):
        """Sorted list of ``(u, v)`` pairs with ``u < v``."""
        return [(u, v) for u in range(self.n) for v in self.adjacency[u] if u < v]

    def is_regular(self):
        d = self.degrees
        return bool(np.all(d == d[0]))

    def adjacency_matrix(self):
        A = np.zeros((self.n, self.n))
        for u, v in self.edges():
            A[u, v] = A[v, u] = 1.0
        return A

    def _csr(self):
        rows, cols = [], []
        for v, nbrs in enumerate(self.adjacency):
            rows.extend([v] * len(nbrs))
            cols.extend(nbrs)
        data = np.ones(len(rows))
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def is_connected(self):
        if self.n <= 1:
            return True
        n_comp, _ = csgraph.connected_components(self._csr(), directed=False)
        return n_comp == 1

    def distances(self):
        """All-pairs hop distances (one BFS per source)."""
        return csgraph.shortest_path(self._csr(), directed=False, unweighted=True)

    def to_edge_list(self):
        edges = self.edges()
        lines = [f"{self.n} {len(edges)}"] + [f"{u} {v}" for u, v in edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text, name="file"):
        lines = [ln.split("#")[0].strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines:
            raise GraphError("empty edge-list")
        try:
            n, m = (int(t) for t in lines[0].split())
            edges = [tuple(int(t) for t in ln.split()) for ln in lines[1:]]
        except ValueError as exc:
            raise GraphError(f"malformed edge-list: {exc}") from None
        if len(edges) != m:
            raise GraphError(f"header announces {m} edges, found {len(edges)}")
        for e in edges:
            if len(e) != 2:
                raise GraphError(f"edge line must have two ids, got {e}")
        return cls.from_edges(n, edges, name=name)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_edge_list())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_edge_list(fh.read(), name=str(path))


def build_cycle(n):
    n = check_int(n, "n", minimum=3)
    return Graph.from_edges(n, [(v, (v + 1) % n) for v in range(n)], name=f"cycle{n}")


def build_torus(side, dim, max_nodes=MAX_NODES):
    """Wrap-around grid with ``side**dim`` nodes, each of degree ``2*dim``."""
    side = check_int(side, "side", minimum=3)
    dim = check_int(dim, "dim", minimum=1)
    if side**dim > max_nodes:
        raise GraphError(f"torus with {side}^{dim} nodes exceeds the limit of {max_nodes}")
    shape = (side,) * dim
    n = side**dim
    edges = []
    for coords in itertools.product(range(side), repeat=dim):
        u = int(np.ravel_multi_index(coords, shape))
        for axis in range(dim):
            nxt = list(coords)
            nxt[axis] = (nxt[axis] + 1) % side
            edges.append((u, int(np.ravel_multi_index(nxt, shape))))
    return Graph.from_edges(n, edges, name=f"torus{side}^{dim}")


def build_complete(n):
    n = check_int(n, "n", minimum=2)
    return Graph.from_edges(n, itertools.combinations(range(n), 2), name=f"complete{n}")


def build_star(n_leaves):
    """Star with node 0 as the centre."""
    n_leaves = check_int(n_leaves, "n_leaves", minimum=1)
    return Graph.from_edges(n_leaves + 1, [(0, k) for k in range(1, n_leaves + 1)], name=f"star{n_leaves}")


def build_random_geometric(n, radius, seed, max_attempts=GEOMETRIC_MAX_ATTEMPTS):
    """Random geometric graph on the unit square, conditioned on connectivity.

    Points are drawn i.i.d. uniform on ``[0, 1]^2`` and joined when their
    Euclidean distance is strictly below ``radius``. Disconnected draws are
    rejected and redrawn from the same stream.
    """
    n = check_int(n, "n", minimum=1)
    radius = check_real(radius, "radius", low=0.0, high=math.sqrt(2.0), low_open=True)
    rng = make_rng(seed, STREAM_GRAPH)
    for _ in range(max_attempts):
        pts = rng.random((n, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=-1))
        close = dist < radius
        if radius == math.sqrt(2.0):
            # the diagonal of the square is the only pair at distance sqrt(2)
            close = dist <= radius
        iu, ju = np.nonzero(np.triu(close, k=1))
        try:
            return Graph.from_edges(n, zip(iu.tolist(), ju.tolist()), name=f"geometric{n}_r{radius:g}_s{seed}")
        except GraphError:
            continue
    raise GraphError(f"no connected geometric graph (n={n}, radius={radius}) after {max_attempts} attempts")


def diameter(g):
    """Largest shortest-path distance between two nodes."""
    if g.n == 1:
        return 0
    return int(np.max(g.distances()))
