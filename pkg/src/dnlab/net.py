"""
Network topologies, doubly stochastic weight matrices and their spectra.

Graphs are simple and undirected. Weight matrices are dense, symmetric and
doubly stochastic; the averaging (consensus) step of every solver in this
package is a left multiplication of the stacked node states by one of them.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TOL = 1e-12


class InvariantError(ValueError):
    """A matrix or graph failed one of its structural checks."""


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``.

    Edges are stored as sorted ``(i, j)`` tuples with ``i < j``.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise InvariantError("graph needs at least one node")
        clean = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise InvariantError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise InvariantError(f"edge {(i, j)} out of range for n={self.n}")
            clean.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(clean))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def density(self) -> float:
        """Relative degree ``|E| / (n(n-1)/2)``."""
        if self.n < 2:
            return 0.0
        return self.num_edges / (self.n * (self.n - 1) / 2)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def neighbors(self) -> list[list[int]]:
        nbrs = [[] for _ in range(self.n)]
        for i, j in sorted(self.edges):
            nbrs[i].append(j)
            nbrs[j].append(i)
        return nbrs


def path_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)))


def complete_graph(n: int) -> Graph:
    return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def is_connected(g: Graph) -> bool:
    """Breadth-first reachability from node 0."""
    nbrs = g.neighbors()
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in nbrs[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == g.n


def _edges_within(dist: np.ndarray, radius: float) -> int:
    iu = np.triu_indices(dist.shape[0], k=1)
    return int(np.count_nonzero(dist[iu] < radius))


def generate_geometric(n, target_density, seed, max_retries=100, bisection_steps=40):
    """Connected random geometric graph on the unit square.

    Nodes are placed uniformly at random; two nodes are linked when their
    distance is below a radius. The radius is found by bisection on
    ``(0, sqrt(2)]`` so that the relative degree lands within 0.01 of
    `target_density`. Disconnected placements are redrawn from the same
    generator, so the result is a deterministic function of `seed`.

    Raises
    ------
    InvariantError
        If no connected graph at the requested density is found within
        `max_retries` placements.
    """
    if n < 2:
        raise InvariantError("geometric graph needs n >= 2")
    if not 0 < target_density <= 1:
        raise InvariantError("target_density must lie in (0, 1]")
    pairs = n * (n - 1) / 2
    if target_density + 0.01 < (n - 1) / pairs:
        raise InvariantError(
            f"density {target_density} is below spanning-tree density {(n - 1) / pairs:.4f}"
        )

    rng = np.random.default_rng(seed)
    for _ in range(max_retries):
        pos = rng.uniform(0.0, 1.0, size=(n, 2))
        dist = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        lo, hi = 0.0, math.sqrt(2.0) * (1 + 1e-12)
        target = target_density * pairs
        for _ in range(bisection_steps):
            mid = 0.5 * (lo + hi)
            if _edges_within(dist, mid) < target:
                lo = mid
            else:
                hi = mid
        # pick whichever bracket end is closer to the target count
        best = min((lo, hi), key=lambda r: abs(_edges_within(dist, r) - target))
        iu, ju = np.nonzero(np.triu(dist < best, k=1))
        g = Graph(n, frozenset(zip(iu.tolist(), ju.tolist())))
        if abs(g.density - target_density) <= 0.01 + 1e-12 and is_connected(g):
            return g
    raise InvariantError(
        f"no connected geometric graph with density {target_density} found "
        f"after {max_retries} placements (n={n}, seed={seed})"
    )


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Symmetric doubly stochastic averaging matrix.

    Construction validates symmetry, unit row sums and nonnegativity to
    ``1e-12``. When a graph is attached, off-diagonal support must lie on
    its edges.
    """

    w: np.ndarray
    graph: Graph | None = None

    def __post_init__(self):
        w = np.array(self.w, dtype=float, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvariantError(f"weight matrix must be square, got shape {w.shape}")
        _check_weights(w, self.graph)
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.w, dtype=dtype)


def _check_weights(w, graph):
    n = w.shape[0]
    if not np.all(np.isfinite(w)):
        raise InvariantError("nonfinite entries")
    asym = np.max(np.abs(w - w.T))
    if asym > TOL:
        raise InvariantError(f"symmetry check failed: max |w_ij - w_ji| = {asym:.3e}")
    rows = np.max(np.abs(w.sum(axis=1) - 1.0))
    if rows > TOL:
        raise InvariantError(f"row-sum check failed: max |sum_j w_ij - 1| = {rows:.3e}")
    if np.min(w) < 0:
        raise InvariantError(f"nonnegativity check failed: min entry {np.min(w):.3e}")
    if graph is not None:
        if graph.n != n:
            raise InvariantError(f"graph has {graph.n} nodes, matrix has {n}")
        allowed = np.eye(n, dtype=bool)
        for i, j in graph.edges:
            allowed[i, j] = allowed[j, i] = True
        if np.any((w > 0) & ~allowed):
            raise InvariantError("support check failed: positive weight off the edge set")


def metropolis_weights(g: Graph) -> WeightMatrix:
    """Metropolis rule ``w_ij = 1 / (1 + max(deg_i, deg_j))`` on edges."""
    deg = g.degrees()
    w = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    np.fill_diagonal(w, 0.0)
    w[np.diag_indices(g.n)] = 1.0 - w.sum(axis=1)
    return WeightMatrix(w, g)


def custom_weights(n: int, entries) -> WeightMatrix:
    """Wrap an explicit matrix after validating it; no graph is attached."""
    w = np.asarray(entries, dtype=float)
    if w.shape != (n, n):
        raise InvariantError(f"expected a {n}x{n} matrix, got shape {w.shape}")
    return WeightMatrix(w)


def two_node_weights(off_diagonal: float) -> WeightMatrix:
    """The 2x2 matrix with the given off-diagonal weight."""
    a = float(off_diagonal)
    return custom_weights(2, [[1 - a, a], [a, 1 - a]])


def safeguard_weights(w: WeightMatrix, eta: float) -> WeightMatrix:
    """``((1+eta)/2) I + ((1-eta)/2) W``, which is always ``>= eta I``."""
    if not 0 < eta < 1:
        raise InvariantError("eta must lie in (0, 1)")
    n = w.n
    out = 0.5 * (1 - eta) * w.w
    np.fill_diagonal(out, 0.0)
    out[np.diag_indices(n)] = 1.0 - out.sum(axis=1)
    return WeightMatrix(out, w.graph)


@dataclass(frozen=True, eq=False)
class SpectralInfo:
    """Eigen-summary of a weight matrix.

    `eigenvalues` are sorted by increasing modulus, so the last one is the
    consensus eigenvalue 1. `mu` is the modulus of the second-largest
    eigenvalue (0 for a single node).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mu: float
    lambda_min: float

    @property
    def gap(self) -> float:
        return 1.0 - self.mu

    @property
    def assumption_1a(self) -> bool:
        return self.mu < 1 - TOL

    def assumption_1b(self, eta: float) -> bool:
        return self.lambda_min >= eta - TOL


def spectral(w: WeightMatrix) -> SpectralInfo:
    vals, vecs = np.linalg.eigh(w.w)
    order = np.argsort(np.abs(vals), kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    mu = float(abs(vals[-2])) if w.n > 1 else 0.0
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return SpectralInfo(vals, vecs, min(mu, 1.0), float(np.min(vals)))


# -- plain-text persistence -------------------------------------------------

_HEADER = "# dnlab network v1: 'n <N>', 'edges <M>', M lines 'i j', 'weights', N rows of N values"


def save_network(path, g: Graph, w: WeightMatrix | None = None) -> None:
    """Write a graph (and optionally its weights) as an edge list plus dense matrix.

    Numbers are written with 17 significant digits so a round trip is exact.
    """
    lines = [_HEADER, f"n {g.n}", f"edges {g.num_edges}"]
    lines += [f"{i} {j}" for i, j in sorted(g.edges)]
    if w is not None:
        lines.append("weights")
        lines += [" ".join(f"{v:.17g}" for v in row) for row in w.w]
    Path(path).write_text("\n".join(lines) + "\n")


def load_network(path) -> tuple[Graph, WeightMatrix | None]:
    rows = [ln.strip() for ln in Path(path).read_text().splitlines()]
    rows = [ln for ln in rows if ln and not ln.startswith("#")]
    n = int(rows[0].split()[1])
    m = int(rows[1].split()[1])
    edges = frozenset(tuple(int(t) for t in rows[2 + k].split()) for k in range(m))
    g = Graph(n, edges)
    rest = rows[2 + m:]
    if not rest:
        return g, None
    if rest[0] != "weights":
        raise InvariantError(f"unexpected line {rest[0]!r}")
    w = np.array([[float(t) for t in r.split()] for r in rest[1:1 + n]])
    return g, WeightMatrix(w, g)
