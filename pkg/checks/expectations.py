"""Exhaustive loss-pattern enumeration against the closed-form Laplacian moments."""

import logging
from typing import Callable

import networkx as nx
import numpy as np

from graphs import Graph, LossMask, enumerate_loss_patterns, expected_laplacians, laplacian, lossy_laplacian
from .report import CheckResult

logger = logging.getLogger(__name__)

PROBABILITIES = (0.1, 0.5, 0.9)
TOLERANCE = 1e-12


def corrupted_expected_laplacians(g: Graph, p: float) -> tuple[np.ndarray, np.ndarray]:
    """Second moment with the loss-variance coefficient 2 replaced by 2.5."""
    first, second = expected_laplacians(g, p)
    return first, second + 0.5 * p * (1 - p) * laplacian(g)


def random_graphs(count: int, seed: int, max_edges: int = 8) -> list[Graph]:
    rng = np.random.default_rng(seed)
    graphs = []
    for _ in range(count):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, min(max_edges, n * (n - 1) // 2) + 1))
        g = nx.gnm_random_graph(n, m, seed=int(rng.integers(2 ** 31)))
        graphs.append(Graph.from_edges(n, ((u + 1, v + 1) for u, v in g.edges())))
    return graphs


def enumerated_moments(g: Graph, p: float) -> tuple[np.ndarray, np.ndarray]:
    first = np.zeros((g.n_vertices, g.n_vertices))
    second = np.zeros_like(first)
    domain = tuple(g.sorted_edges())
    for probability, active in enumerate_loss_patterns(g, p):
        l_tilde = lossy_laplacian(g, LossMask(domain, active))
        first += probability * l_tilde
        second += probability * (l_tilde.T @ l_tilde)
    return first, second


def expected_laplacian_check(
    seed: int = 0,
    count: int = 25,
    expected: Callable[[Graph, float], tuple[np.ndarray, np.ndarray]] = expected_laplacians,
) -> CheckResult:
    result = CheckResult("expected-laplacians")
    for index, g in enumerate(random_graphs(count, seed)):
        for p in PROBABILITIES:
            first, second = enumerated_moments(g, p)
            first_ref, second_ref = expected(g, p)
            residual = max(np.abs(first - first_ref).max(), np.abs(second - second_ref).max())
            result.record(residual, TOLERANCE, f"graph {index} ({len(g.edges)} edges), p={p}")
    logger.info(f"{result.name}: {result.cases} cases, worst {result.worst:.2e}")
    return result
