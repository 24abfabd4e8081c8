"""Agent-level certificates lifted to full size must satisfy the mode-enumerated conditions."""

import logging

from decomposable_model import DecomposableMatrices, SwitchedMas, consensus_example
from graphs import Graph, GraphFamily, circulant_graph, spectral_bounds
from lmi_analysis import NoCertificate, solve_h2_bound, verify_certificate_lifting
from .report import CheckResult

logger = logging.getLogger(__name__)

PROBABILITIES = (0.3, 0.7)


def _path(n: int) -> Graph:
    return Graph.from_edges(n, ((i, i + 1) for i in range(1, n)))


def _complete(n: int) -> Graph:
    return Graph.from_edges(n, ((i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)))


def _cycle(n: int) -> Graph:
    return circulant_graph(n, 1)


def small_families() -> list[GraphFamily]:
    """Connected families for N = 3, 4, 5 with exactly computed spectral bounds."""
    members = [
        [_path(3), _complete(3)],
        [_cycle(4), _complete(4), Graph.from_edges(4, [(1, 2), (2, 3), (3, 4), (1, 4), (1, 3)])],
        [_cycle(5), _complete(5)],
    ]
    return [GraphFamily(tuple(graphs), *spectral_bounds(graphs)) for graphs in members]


def stable_example() -> DecomposableMatrices:
    """Schur-stable agents with lossy coupling in every letter except D."""
    return DecomposableMatrices(1, 1, 1, {
        "A_d": 0.5, "A_c": -0.1,
        "B_d": 1.0, "B_c": 0.2,
        "C_p": 1.0, "D_d": 0.1,
    })


def lifting_check(kappa: float = 0.1) -> CheckResult:
    result = CheckResult("lifting")
    cases = [(consensus_example(kappa), True), (stable_example(), False)]
    for family in small_families():
        for p in PROBABILITIES:
            for blocks, deflated in cases:
                describe = f"N={family.n_vertices} p={p} {'deflated' if deflated else 'full'}"
                mas = SwitchedMas.from_family(family, p, blocks)
                try:
                    cert = solve_h2_bound(mas, deflated=deflated)
                except NoCertificate as e:
                    result.record(1.0, 0.0, f"{describe}: {e}")
                    continue
                report = verify_certificate_lifting(mas, cert)
                offending = ", ".join(str(r.topology) for r in report.failures())
                result.record(report.worst, 0.0, f"{describe} topologies [{offending}]")
    logger.info(f"{result.name}: {result.cases} cases, worst {result.worst:.2e}")
    return result
