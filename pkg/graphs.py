"""
Undirected interconnection graphs and the Bernoulli packet-loss layer on top of them.

Vertices are labelled 1..N and an edge is stored once as the pair (i, j) with i < j.
Loss is symmetric: a single Bernoulli variable decides whether an undirected edge
carries information in both directions at a given time step.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import networkx as nx
import numpy as np
import scipy.linalg

logger = logging.getLogger(__name__)

Edge = tuple[int, int]

SYMMETRY_TOLERANCE = 1e-10
EIGENVALUE_SLACK = 1e-8


class GraphError(ValueError):
    """Raised for malformed graphs, families or matrices."""


def normalize_edge(i: int, j: int) -> Edge:
    if i == j:
        raise GraphError(f"Self-loop on vertex {i} is not allowed")
    return (i, j) if i < j else (j, i)


# --- GRAPH TYPES ---

@dataclass(frozen=True)
class Graph:
    n_vertices: int
    edges: frozenset[Edge] = frozenset()

    def __post_init__(self):
        if self.n_vertices < 1:
            raise GraphError(f"A graph needs at least one vertex, got {self.n_vertices}")
        for i, j in self.edges:
            if i == j:
                raise GraphError(f"Self-loop on vertex {i} is not allowed")
            if not (1 <= i < j <= self.n_vertices):
                raise GraphError(
                    f"Edge ({i}, {j}) is not a normalized pair in 1..{self.n_vertices}"
                )

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        """Build a graph from pairs in any orientation; repeated pairs are rejected."""
        seen: set[Edge] = set()
        for i, j in edges:
            edge = normalize_edge(int(i), int(j))
            if edge in seen:
                raise GraphError(f"Duplicate edge {edge}")
            seen.add(edge)
        return cls(n_vertices, frozenset(seen))

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(1, self.n_vertices + 1))
        g.add_edges_from(self.edges)
        return g


@dataclass(frozen=True)
class GraphFamily:
    """Admissible topologies with claimed bounds on the nonzero Laplacian spectrum."""
    graphs: tuple[Graph, ...]
    lambda_lo: float
    lambda_hi: float

    def __post_init__(self):
        object.__setattr__(self, "graphs", tuple(self.graphs))
        if not self.lambda_lo > 0:
            raise GraphError(f"lambda_lo must be positive, got {self.lambda_lo}")
        if self.lambda_lo > self.lambda_hi:
            raise GraphError(
                f"lambda_lo ({self.lambda_lo}) exceeds lambda_hi ({self.lambda_hi})"
            )
        sizes = {g.n_vertices for g in self.graphs}
        if len(sizes) > 1:
            raise GraphError(f"Family graphs disagree on the vertex count: {sorted(sizes)}")

    @property
    def n_vertices(self) -> int:
        if not self.graphs:
            raise GraphError("Graph family is empty")
        return self.graphs[0].n_vertices

    def __len__(self) -> int:
        return len(self.graphs)


@dataclass(frozen=True)
class EdgeIndexer:
    """Bijection mu from the union edge set onto 1..|E0| (lexicographic order)."""
    edges: tuple[Edge, ...]
    order: dict[Edge, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ordered = tuple(sorted(set(self.edges)))
        if len(ordered) != len(self.edges):
            raise GraphError("EdgeIndexer edges must be unique")
        object.__setattr__(self, "edges", ordered)
        object.__setattr__(self, "order", {e: k + 1 for k, e in enumerate(ordered)})

    @classmethod
    def for_family(cls, family: GraphFamily) -> "EdgeIndexer":
        return cls(tuple(union_edge_set(family).edges))

    def index(self, edge: Edge) -> int:
        try:
            return self.order[edge]
        except KeyError:
            raise GraphError(f"Edge {edge} is not in the indexed edge set")

    def __len__(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class LossMask:
    """Activity of every edge of E0 at one time step (1 = packet delivered)."""
    domain: tuple[Edge, ...]
    active: frozenset[Edge]

    def __post_init__(self):
        stray = self.active - set(self.domain)
        if stray:
            raise GraphError(f"Active edges outside the mask domain: {sorted(stray)}")

    @classmethod
    def full(cls, domain: Iterable[Edge]) -> "LossMask":
        domain = tuple(sorted(domain))
        return cls(domain, frozenset(domain))

    @classmethod
    def empty(cls, domain: Iterable[Edge]) -> "LossMask":
        return cls(tuple(sorted(domain)), frozenset())

    def __getitem__(self, edge: Edge) -> int:
        if edge not in self.domain:
            raise GraphError(f"Edge {edge} is not in the mask domain")
        return int(edge in self.active)

    def as_dict(self) -> dict[Edge, int]:
        return {e: int(e in self.active) for e in self.domain}


# --- LAPLACIANS AND SPECTRA ---

def laplacian(g: Graph) -> np.ndarray:
    """Graph Laplacian D - A with vertex i in row i - 1."""
    nodes = list(range(1, g.n_vertices + 1))
    return nx.laplacian_matrix(g.to_networkx(), nodelist=nodes).toarray().astype(float)


def check_symmetric(m: np.ndarray, tolerance: float = SYMMETRY_TOLERANCE) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise GraphError(f"Expected a square matrix, got shape {m.shape}")
    if not np.all(np.abs(m - m.T) <= tolerance):
        raise GraphError("Matrix is not symmetric within tolerance")
    return m


def spectrum(m: np.ndarray) -> np.ndarray:
    """Ascending real eigenvalues of a symmetric matrix."""
    m = check_symmetric(m)
    return scipy.linalg.eigvalsh(m)


def is_connected(g: Graph) -> bool:
    return nx.is_connected(g.to_networkx())


def incidence_matrix(edges: Iterable[Edge], n_vertices: int) -> np.ndarray:
    """Oriented incidence matrix M (|E| x N) such that M^T diag(a) M is a lossy Laplacian."""
    edges = list(edges)
    m = np.zeros((len(edges), n_vertices))
    for row, (i, j) in enumerate(edges):
        m[row, i - 1] = 1.0
        m[row, j - 1] = -1.0
    return m


# --- GRAPH FAMILIES ---

@dataclass(frozen=True)
class GraphSpectrumReport:
    index: int
    lambda_2: float
    lambda_n: float
    connected: bool
    inside: bool


@dataclass(frozen=True)
class FamilyReport:
    graphs: tuple[GraphSpectrumReport, ...]
    lambda_lo: float
    lambda_hi: float
    tightest_lo: float
    tightest_hi: float

    @property
    def passed(self) -> bool:
        return all(r.inside for r in self.graphs)

    def failures(self) -> list[GraphSpectrumReport]:
        return [r for r in self.graphs if not r.inside]


def validate_family(family: GraphFamily, slack: float = EIGENVALUE_SLACK) -> FamilyReport:
    """Check the claimed bounds against the exact spectra of every member graph."""
    if len(family) == 0:
        raise GraphError("Graph family is empty")
    if family.n_vertices < 2:
        raise GraphError("Spectral bounds need at least two vertices")

    reports = []
    for index, g in enumerate(family.graphs):
        eigs = spectrum(laplacian(g))
        nonzero = eigs[1:]
        lam_2, lam_n = float(nonzero.min()), float(nonzero.max())
        inside = bool(
            lam_2 >= family.lambda_lo - slack and lam_n <= family.lambda_hi + slack
        )
        reports.append(GraphSpectrumReport(index, lam_2, lam_n, is_connected(g), inside))
        if not inside:
            logger.info(
                f"Graph {index}: spectrum [{lam_2:.6g}, {lam_n:.6g}] leaves "
                f"[{family.lambda_lo}, {family.lambda_hi}]"
            )

    return FamilyReport(
        graphs=tuple(reports),
        lambda_lo=family.lambda_lo,
        lambda_hi=family.lambda_hi,
        tightest_lo=min(r.lambda_2 for r in reports),
        tightest_hi=max(r.lambda_n for r in reports),
    )


def spectral_bounds(graphs: Iterable[Graph]) -> tuple[float, float]:
    """Tightest (min lambda_2, max lambda_N) over a collection of graphs."""
    lows, highs = [], []
    for g in graphs:
        eigs = spectrum(laplacian(g))
        lows.append(eigs[1])
        highs.append(eigs[-1])
    if not lows:
        raise GraphError("No graphs given")
    return float(min(lows)), float(max(highs))


def circulant_graph(n: int, k_forward: int) -> Graph:
    """Ring on n vertices where each vertex links to its k_forward nearest neighbours per side."""
    if n < 3 or not 1 <= k_forward <= (n - 1) // 2:
        raise GraphError(f"k_forward must lie in 1..{max((n - 1) // 2, 0)} for n={n}, got {k_forward}")
    g = nx.circulant_graph(n, range(1, k_forward + 1))
    return Graph.from_edges(n, ((u + 1, v + 1) for u, v in g.edges()))


def union_edge_set(family: GraphFamily) -> Graph:
    merged: set[Edge] = set()
    for g in family.graphs:
        merged |= g.edges
    return Graph(family.n_vertices, frozenset(merged))


# --- PACKET LOSS ---

def sample_loss_mask(family: GraphFamily, p: float, rng: np.random.Generator) -> LossMask:
    """Independent Bernoulli(p) activity for every edge of the union edge set."""
    check_probability(p)
    domain = tuple(union_edge_set(family).sorted_edges())
    draws = rng.random(len(domain)) < p
    return LossMask(domain, frozenset(e for e, on in zip(domain, draws) if on))


def switching_index(
    mask: LossMask,
    family: GraphFamily,
    j: int,
    indexer: Optional[EdgeIndexer] = None,
) -> int:
    """Mode index sigma = 1 + sum over active edges of E_j of 2**(mu(e) - 1)."""
    if not 0 <= j < len(family):
        raise GraphError(f"Topology index {j} outside 0..{len(family) - 1}")
    indexer = indexer or EdgeIndexer.for_family(family)
    sigma = 1
    for edge in family.graphs[j].edges:
        if mask[edge]:
            sigma += 2 ** (indexer.index(edge) - 1)
    return sigma


def lossy_laplacian(g_j: Graph, mask: LossMask) -> np.ndarray:
    """Laplacian of the edges of g_j that are active in the mask."""
    active = [e for e in g_j.sorted_edges() if mask[e]]
    inc = incidence_matrix(active, g_j.n_vertices)
    return inc.T @ inc


def expected_laplacians(g_j: Graph, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form E[L~] and E[L~^T L~] under symmetric Bernoulli(p) loss."""
    check_probability(p)
    lap = laplacian(g_j)
    return p * lap, p ** 2 * (lap @ lap) + 2 * p * (1 - p) * lap


def enumerate_loss_patterns(g: Graph, p: float) -> Iterator[tuple[float, frozenset[Edge]]]:
    """Every subset of g's edges as an active set, with its Bernoulli probability."""
    check_probability(p)
    edges = g.sorted_edges()
    m = len(edges)
    for bits in itertools.product((False, True), repeat=m):
        active = frozenset(e for e, on in zip(edges, bits) if on)
        n_active = len(active)
        yield p ** n_active * (1 - p) ** (m - n_active), active


def check_probability(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Probability must lie in [0, 1], got {p}")
