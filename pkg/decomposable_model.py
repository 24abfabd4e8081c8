"""
Decomposable switched jump-linear model of a homogeneous multi-agent system.

Every system matrix has the form I_N (x) M^d + L~_i (x) M^c + L_j (x) M^p where L~_i is the
lossy Laplacian of the current mode and L_j the Laplacian of the current topology.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from graphs import (
    EdgeIndexer,
    FamilyReport,
    GraphError,
    GraphFamily,
    LossMask,
    check_probability,
    enumerate_loss_patterns,
    laplacian,
    lossy_laplacian,
    switching_index,
    union_edge_set,
    validate_family,
)

logger = logging.getLogger(__name__)

DEFAULT_ENUMERATION_CAP = 20

PARTS = ("d", "c", "p")
# letter -> (row dimension, column dimension)
SHAPES = {"A": ("n_x", "n_x"), "B": ("n_x", "n_w"), "C": ("n_z", "n_x"), "D": ("n_z", "n_w")}


class EnumerationCapError(ValueError):
    """Raised when a topology has too many edges to enumerate its loss modes."""


@dataclass(frozen=True)
class DecomposableMatrices:
    """The twelve agent-level blocks, keyed "A_d", "A_c", ..., "D_p".

    Missing blocks are zero.
    """
    n_x: int
    n_w: int
    n_z: int
    blocks: dict

    def __post_init__(self):
        for name in ("n_x", "n_w", "n_z"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

        filled = {}
        for letter, (rows, cols) in SHAPES.items():
            shape = (getattr(self, rows), getattr(self, cols))
            for part in PARTS:
                key = f"{letter}_{part}"
                value = self.blocks.get(key)
                if value is None:
                    filled[key] = np.zeros(shape)
                    continue
                value = np.atleast_2d(np.asarray(value, dtype=float))
                if value.shape != shape:
                    raise ValueError(f"Block {key} has shape {value.shape}, expected {shape}")
                filled[key] = value
        unknown = set(self.blocks) - set(filled)
        if unknown:
            raise ValueError(f"Unknown block names: {sorted(unknown)}")
        object.__setattr__(self, "blocks", filled)

    def block(self, letter: str, part: str) -> np.ndarray:
        return self.blocks[f"{letter}_{part}"]

    def triple(self, letter: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(self.block(letter, part) for part in PARTS)


@dataclass(frozen=True)
class SwitchedMas:
    """Problem instance: agent count, Laplacian bounds, transmission probability and blocks.

    The graph family is optional; the agent-count independent analysis needs only the
    bounds, while mode enumeration and simulation need the family itself.
    """
    n_agents: int
    lambda_lo: float
    lambda_hi: float
    p: float
    blocks: DecomposableMatrices
    family: Optional[GraphFamily] = None

    def __post_init__(self):
        check_probability(self.p)
        if self.n_agents < 1:
            raise ValueError(f"n_agents must be positive, got {self.n_agents}")
        if not 0 < self.lambda_lo <= self.lambda_hi:
            raise ValueError(
                f"Need 0 < lambda_lo <= lambda_hi, got [{self.lambda_lo}, {self.lambda_hi}]"
            )
        if self.family is not None and self.family.n_vertices != self.n_agents:
            raise ValueError("Family vertex count does not match n_agents")

    @classmethod
    def from_family(
        cls,
        family: GraphFamily,
        p: float,
        blocks: DecomposableMatrices,
        strict: bool = True,
    ) -> "SwitchedMas":
        """Instance whose bounds are the family's claimed bounds.

        With strict=True the claimed bounds must contain every member spectrum.
        """
        report = validate_family(family)
        if not report.passed:
            offending = ", ".join(
                f"graph {r.index} [{r.lambda_2:.4g}, {r.lambda_n:.4g}]" for r in report.failures()
            )
            message = (
                f"Claimed bounds [{family.lambda_lo}, {family.lambda_hi}] do not contain "
                f"{offending}; tightest valid bounds are "
                f"[{report.tightest_lo:.6g}, {report.tightest_hi:.6g}]"
            )
            if strict:
                raise GraphError(message)
            logger.warning(message)
        return cls(family.n_vertices, family.lambda_lo, family.lambda_hi, p, blocks, family)

    @classmethod
    def from_bounds(
        cls, n_agents: int, lambda_lo: float, lambda_hi: float, p: float,
        blocks: DecomposableMatrices,
    ) -> "SwitchedMas":
        return cls(n_agents, lambda_lo, lambda_hi, p, blocks)

    def assumption_report(self) -> Optional[FamilyReport]:
        return validate_family(self.family) if self.family is not None else None

    def require_family(self) -> GraphFamily:
        if self.family is None:
            raise ValueError("This operation needs an explicit graph family")
        return self.family


@dataclass(frozen=True)
class Mode:
    index: int
    probability: float
    lossy_laplacian: np.ndarray


@dataclass(frozen=True)
class ModeDistribution:
    topology: int
    modes: tuple[Mode, ...]

    def total_probability(self) -> float:
        return float(sum(m.probability for m in self.modes))


# --- MODE ASSEMBLY ---

def assemble_mode(
    blocks: DecomposableMatrices, l_tilde: np.ndarray, l_j: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Full (A, B, C, D) of one mode from the lossy and the deterministic Laplacian."""
    l_tilde = np.asarray(l_tilde, dtype=float)
    l_j = np.asarray(l_j, dtype=float)
    if l_tilde.ndim != 2 or l_tilde.shape[0] != l_tilde.shape[1] or l_tilde.shape != l_j.shape:
        raise ValueError(
            f"Pattern matrices must be square and equal in size, got {l_tilde.shape} and {l_j.shape}"
        )
    eye = np.eye(l_j.shape[0])

    def combine(letter):
        m_d, m_c, m_p = blocks.triple(letter)
        return np.kron(eye, m_d) + np.kron(l_tilde, m_c) + np.kron(l_j, m_p)

    return combine("A"), combine("B"), combine("C"), combine("D")


def mode_distribution(
    mas: SwitchedMas, j: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> ModeDistribution:
    """All loss modes reachable under topology j with nonzero probability."""
    family = mas.require_family()
    if not 0 <= j < len(family):
        raise GraphError(f"Topology index {j} outside 0..{len(family) - 1}")
    graph = family.graphs[j]
    if len(graph.edges) > cap:
        raise EnumerationCapError(
            f"Topology {j} has {len(graph.edges)} edges; enumerating 2^{len(graph.edges)} "
            f"modes exceeds the cap of 2^{cap}. Use the agent-count independent bound "
            f"(lmi_analysis.solve_h2_bound) instead."
        )

    indexer = EdgeIndexer.for_family(family)
    domain = union_edge_set(family).sorted_edges()
    modes = []
    for probability, active in enumerate_loss_patterns(graph, mas.p):
        if probability == 0.0:
            continue
        mask = LossMask(tuple(domain), active)
        sigma = switching_index(mask, family, j, indexer)
        modes.append(Mode(sigma, probability, lossy_laplacian(graph, mask)))
    return ModeDistribution(j, tuple(modes))


# --- CONSENSUS EXAMPLE ---

def consensus_example(kappa: float, swapped: bool = False) -> DecomposableMatrices:
    """First-order consensus x+ = x + u + w with protocol gain kappa.

    The performance output is the consensus error L_j x computed from the deterministic
    Laplacian. With swapped=True the disturbance enters through L_j and the state is the
    output instead.
    """
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    blocks = {"A_d": 1.0, "A_c": -kappa}
    if swapped:
        blocks.update({"B_p": 1.0, "C_d": 1.0})
    else:
        blocks.update({"B_d": 1.0, "C_p": 1.0})
    return DecomposableMatrices(1, 1, 1, blocks)


# --- DISAGREEMENT SPACE ---

def disagreement_projection(n_agents: int) -> np.ndarray:
    """Orthonormal N x (N-1) basis of the complement of the all-ones vector (Helmert columns)."""
    if n_agents < 2:
        raise ValueError(f"Disagreement space needs at least two agents, got {n_agents}")
    return scipy.linalg.helmert(n_agents).T


def project_modes(
    matrices: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    n_agents: int,
    blocks: DecomposableMatrices,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Restriction of (A, B, C, D) to the disagreement subspaces of state, input and output."""
    u = disagreement_projection(n_agents)
    u_x = np.kron(u, np.eye(blocks.n_x))
    u_w = np.kron(u, np.eye(blocks.n_w))
    u_z = np.kron(u, np.eye(blocks.n_z))
    a, b, c, d = matrices
    return u_x.T @ a @ u_x, u_x.T @ b @ u_w, u_z.T @ c @ u_x, u_z.T @ d @ u_w


def topology_laplacians(family: GraphFamily) -> list[np.ndarray]:
    return [laplacian(g) for g in family.graphs]
