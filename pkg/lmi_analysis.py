"""
H2 performance certificates for decomposable multi-agent systems.

Two families of matrix inequalities are built here:

- the agent-count independent conditions on (Q, Z1, Z2) of agent dimension, checked at the
  two ends of the Laplacian spectrum interval, and
- the mode-enumerated conditions on full-size (Q, Z) for every admissible topology, which serve
  as a small-instance oracle and as the target of the lifting check.

All conditions are sufficient only: an infeasible problem means "no certificate", never
"unstable".
"""

import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from decomposable_model import (
    DEFAULT_ENUMERATION_CAP,
    DecomposableMatrices,
    SwitchedMas,
    assemble_mode,
    mode_distribution,
    project_modes,
    topology_laplacians,
)
from sdp_core import (
    AffineMatrixOperator,
    SdpProblem,
    SdpSolution,
    SolverOptions,
    max_eigenvalue,
    solve,
)

logger = logging.getLogger(__name__)


class SpectralRadiusError(ValueError):
    """Raised when the decoupled dynamics are not Schur stable and deflation was not requested."""


class NoCertificate(RuntimeError):
    """The sufficient conditions could not be satisfied at the given data."""


@dataclass(frozen=True)
class ReducedMatrices:
    """Agent-level matrices seen by one Laplacian eigenvalue lam."""
    lam: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    a_c: np.ndarray
    b_c: np.ndarray
    c_c: np.ndarray
    d_c: np.ndarray
    p_bar: float


def reduced_matrices(blocks: DecomposableMatrices, lam: float, p: float) -> ReducedMatrices:
    """M_d + lam (p M_c + M_p) for every letter, and p_bar = 2 p (1 - p) lam."""
    def bar(letter):
        m_d, m_c, m_p = blocks.triple(letter)
        return m_d + lam * (p * m_c + m_p)

    return ReducedMatrices(
        lam=lam,
        a=bar("A"), b=bar("B"), c=bar("C"), d=bar("D"),
        a_c=blocks.block("A", "c"), b_c=blocks.block("B", "c"),
        c_c=blocks.block("C", "c"), d_c=blocks.block("D", "c"),
        p_bar=2.0 * p * (1.0 - p) * lam,
    )


def spectral_radius(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(m))))


@dataclass(frozen=True)
class LmiCertificate:
    Q: np.ndarray
    Z1: np.ndarray
    Z2: Optional[np.ndarray]
    gamma: float
    beta: float
    deflated: bool
    h2_bound: float
    n_agents: int
    lambda_lo: float
    lambda_hi: float
    p: float
    epsilon: float = 0.0
    status: str = "optimal"
    residuals: dict = field(default_factory=dict)
    solution: Optional[SdpSolution] = field(default=None, repr=False, compare=False)

    @property
    def margin(self) -> float:
        return max(self.residuals.values()) if self.residuals else -math.inf


# --- AGENT-COUNT INDEPENDENT CONDITIONS ---

def _sample_points(mas: SwitchedMas) -> tuple[float, float]:
    return (mas.lambda_lo, mas.lambda_hi)


def check_decoupled_stability(blocks: DecomposableMatrices, deflated: bool) -> None:
    if deflated:
        return
    rho = spectral_radius(blocks.block("A", "d"))
    if rho >= 1.0:
        raise SpectralRadiusError(
            f"A_d has spectral radius {rho:.6g} >= 1, so the conditions on the consensus "
            f"direction can never hold. Project onto the disagreement space (deflated mode) to "
            f"analyse the remaining dynamics."
        )


def build_agent_level_problem(mas: SwitchedMas, deflated: bool = False) -> SdpProblem:
    """SDP over (Q, Z1[, Z2]) minimizing trace(Z2) + (N - 1) trace(Z1)."""
    blocks = mas.blocks
    check_decoupled_stability(blocks, deflated)

    problem = SdpProblem()
    q = problem.add_variable("Q", blocks.n_x)
    z1 = problem.add_variable("Z1", blocks.n_w)
    problem.add_trace_objective(z1, float(mas.n_agents - 1))

    points = [(lam, z1) for lam in _sample_points(mas)]
    if not deflated:
        z2 = problem.add_variable("Z2", blocks.n_w)
        problem.add_trace_objective(z2, 1.0)
        points.append((0.0, z2))

    for lam, z in points:
        red = reduced_matrices(blocks, lam, mas.p)
        problem.add_constraint(AffineMatrixOperator.from_terms(
            red.c.T @ red.c + red.p_bar * red.c_c.T @ red.c_c,
            q.term(lambda e, r=red: r.a.T @ e @ r.a + r.p_bar * r.a_c.T @ e @ r.a_c - e),
            label=f"gramian@{lam:g}",
        ))
        problem.add_constraint(AffineMatrixOperator.from_terms(
            red.d.T @ red.d + red.p_bar * red.d_c.T @ red.d_c,
            q.term(lambda e, r=red: r.b.T @ e @ r.b + r.p_bar * r.b_c.T @ e @ r.b_c),
            z.term(lambda e: -e),
            label=f"trace@{lam:g}",
        ))

    problem.add_constraint(AffineMatrixOperator.from_terms(
        np.zeros((blocks.n_x, blocks.n_x)), q.term(lambda e: -e), label="Q positive"
    ))
    return problem


def certificate_residuals(
    mas: SwitchedMas, Q: np.ndarray, Z1: np.ndarray, Z2: Optional[np.ndarray], deflated: bool
) -> dict[str, float]:
    """Largest eigenvalue of every condition evaluated directly at (Q, Z1, Z2)."""
    blocks = mas.blocks
    points = [(lam, Z1) for lam in _sample_points(mas)]
    if not deflated:
        if Z2 is None:
            raise ValueError("Z2 is required unless deflated")
        points.append((0.0, Z2))

    residuals = {}
    for lam, z in points:
        r = reduced_matrices(blocks, lam, mas.p)
        gramian = (r.a.T @ Q @ r.a + r.c.T @ r.c
                   + r.p_bar * (r.a_c.T @ Q @ r.a_c + r.c_c.T @ r.c_c) - Q)
        trace = (r.b.T @ Q @ r.b + r.d.T @ r.d
                 + r.p_bar * (r.b_c.T @ Q @ r.b_c + r.d_c.T @ r.d_c) - z)
        residuals[f"gramian@{lam:g}"] = max_eigenvalue(gramian)
        residuals[f"trace@{lam:g}"] = max_eigenvalue(trace)
    residuals["Q positive"] = max_eigenvalue(-Q)
    return residuals


def solve_h2_bound(
    mas: SwitchedMas, deflated: bool = False, opts: Optional[SolverOptions] = None
) -> LmiCertificate:
    """Smallest H2 bound the agent-count independent conditions certify."""
    problem = build_agent_level_problem(mas, deflated)
    solution = solve(problem, opts)
    describe = (
        f"N={mas.n_agents}, p={mas.p}, lambda in [{mas.lambda_lo}, {mas.lambda_hi}]"
    )
    if not solution.optimal:
        raise NoCertificate(
            f"No certificate at these bounds ({describe}; solver status {solution.status.value}). "
            f"The conditions are sufficient only, so this does not show instability."
        )

    Q = problem.value(problem.variables["Q"], solution.x)
    Z1 = problem.value(problem.variables["Z1"], solution.x)
    Z2 = None if deflated else problem.value(problem.variables["Z2"], solution.x)
    residuals = certificate_residuals(mas, Q, Z1, Z2, deflated)
    worst = max(residuals, key=residuals.get)
    if residuals[worst] >= 0:
        raise NoCertificate(
            f"Solver point fails the post-hoc check on {worst} "
            f"(max eigenvalue {residuals[worst]:.3e}) for {describe}"
        )

    # gamma^2 and beta^2 are padded by the strictness margin so trace(Z) < gamma^2 holds strictly
    gamma = math.sqrt(max(float(np.trace(Z1)), 0.0) + solution.epsilon)
    beta = 0.0 if deflated else math.sqrt(max(float(np.trace(Z2)), 0.0) + solution.epsilon)
    h2_bound = math.sqrt(beta ** 2 + (mas.n_agents - 1) * gamma ** 2)
    logger.debug(f"Certificate for {describe}: gamma={gamma:.10g} h2={h2_bound:.10g}")
    return LmiCertificate(
        Q=Q, Z1=Z1, Z2=Z2, gamma=gamma, beta=beta, deflated=deflated, h2_bound=h2_bound,
        n_agents=mas.n_agents, lambda_lo=mas.lambda_lo, lambda_hi=mas.lambda_hi, p=mas.p,
        epsilon=solution.epsilon, status=solution.status.value, residuals=residuals,
        solution=solution,
    )


# --- SCALAR CLOSED FORMS FOR THE CONSENSUS EXAMPLE ---

def _consensus_denominator(lam: float, kappa: float, p: float) -> float:
    return 1.0 - (1.0 - p * kappa * lam) ** 2 - 2.0 * p * (1.0 - p) * lam * kappa ** 2


@dataclass(frozen=True)
class ClosedForm:
    q_star: float
    gamma_sq: float
    h2_bound: float


def consensus_closed_form(
    n_agents: int, kappa: float, p: float, lambda_lo: float, lambda_hi: float
) -> Optional[ClosedForm]:
    """Optimum of the deflated conditions for the consensus example, None if infeasible."""
    values = []
    for lam in (lambda_lo, lambda_hi):
        den = _consensus_denominator(lam, kappa, p)
        if den <= 0:
            return None
        values.append(lam ** 2 / den)
    q_star = max(values)
    return ClosedForm(q_star, q_star, math.sqrt((n_agents - 1) * q_star))


def swapped_closed_form(
    n_agents: int, kappa: float, p: float, lambda_lo: float, lambda_hi: float
) -> Optional[ClosedForm]:
    """Same for the variant with disturbance through L_j and the state as output."""
    values = []
    for lam in (lambda_lo, lambda_hi):
        den = _consensus_denominator(lam, kappa, p)
        if den <= 0:
            return None
        values.append(1.0 / den)
    q_star = max(values)
    gamma_sq = lambda_hi ** 2 * q_star
    return ClosedForm(q_star, gamma_sq, math.sqrt((n_agents - 1) * gamma_sq))


# --- MODE-ENUMERATED CONDITIONS ---

@dataclass(frozen=True)
class TopologyModes:
    """Probabilities and (possibly projected) mode matrices of one topology."""
    topology: int
    probabilities: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray


def topology_modes(
    mas: SwitchedMas, project: bool = False, cap: int = DEFAULT_ENUMERATION_CAP
) -> list[TopologyModes]:
    family = mas.require_family()
    laplacians = topology_laplacians(family)
    result = []
    for j in range(len(family)):
        dist = mode_distribution(mas, j, cap)
        stacks = [[], [], [], []]
        for mode in dist.modes:
            matrices = assemble_mode(mas.blocks, mode.lossy_laplacian, laplacians[j])
            if project:
                matrices = project_modes(matrices, mas.n_agents, mas.blocks)
            for stack, m in zip(stacks, matrices):
                stack.append(m)
        result.append(TopologyModes(
            j, np.array([m.probability for m in dist.modes]), *(np.stack(s) for s in stacks)
        ))
    return result


def _expected_congruence(weights: np.ndarray, mats: np.ndarray, middle: np.ndarray) -> np.ndarray:
    """sum_i t_i M_i^T middle M_i"""
    return np.einsum("m,mji,jk,mkl->il", weights, mats, middle, mats)


def build_mode_enumerated_problem(
    mas: SwitchedMas, project: bool = False, cap: int = DEFAULT_ENUMERATION_CAP
) -> SdpProblem:
    """Full-size (Q, Z) conditions for every topology, objective trace(Z)."""
    modes = topology_modes(mas, project, cap)
    agents = mas.n_agents - 1 if project else mas.n_agents
    problem = SdpProblem()
    q = problem.add_variable("Q", agents * mas.blocks.n_x)
    z = problem.add_variable("Z", agents * mas.blocks.n_w)
    problem.add_trace_objective(z)

    for tm in modes:
        t = tm.probabilities
        problem.add_constraint(AffineMatrixOperator.from_terms(
            np.einsum("m,mji,mjk->ik", t, tm.c, tm.c),
            q.term(lambda e, tm=tm: _expected_congruence(tm.probabilities, tm.a, e) - e),
            label=f"gramian[{tm.topology}]",
        ))
        problem.add_constraint(AffineMatrixOperator.from_terms(
            np.einsum("m,mji,mjk->ik", t, tm.d, tm.d),
            q.term(lambda e, tm=tm: _expected_congruence(tm.probabilities, tm.b, e)),
            z.term(lambda e: -e),
            label=f"trace[{tm.topology}]",
        ))
    problem.add_constraint(AffineMatrixOperator.from_terms(
        np.zeros((q.size, q.size)), q.term(lambda e: -e), label="Q positive"
    ))
    return problem


@dataclass(frozen=True)
class ModeEnumeratedResult:
    Q: np.ndarray
    Z: np.ndarray
    trace_z: float
    solution: SdpSolution

    @property
    def h2_bound(self) -> float:
        return math.sqrt(max(self.trace_z, 0.0) + self.solution.epsilon)


def solve_mode_enumerated(
    mas: SwitchedMas, project: bool = False, opts: Optional[SolverOptions] = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> ModeEnumeratedResult:
    problem = build_mode_enumerated_problem(mas, project, cap)
    solution = solve(problem, opts)
    if not solution.optimal:
        raise NoCertificate(
            f"Mode-enumerated conditions not satisfied (solver status {solution.status.value}); "
            f"they are sufficient only"
        )
    Q = problem.value(problem.variables["Q"], solution.x)
    Z = problem.value(problem.variables["Z"], solution.x)
    return ModeEnumeratedResult(Q, Z, float(np.trace(Z)), solution)


# --- LIFTING ---

@dataclass(frozen=True)
class TopologyResidual:
    topology: int
    gramian: float
    trace: float

    @property
    def passed(self) -> bool:
        return self.gramian < 0 and self.trace < 0


@dataclass(frozen=True)
class LiftingReport:
    residuals: tuple[TopologyResidual, ...]
    trace_lifted: float

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.residuals)

    def failures(self) -> list[TopologyResidual]:
        return [r for r in self.residuals if not r.passed]

    @property
    def worst(self) -> float:
        return max(max(r.gramian, r.trace) for r in self.residuals)


def lift_certificate(cert: LmiCertificate, n_agents: int) -> tuple[np.ndarray, np.ndarray]:
    """Block-diagonal full-size (Q, Z) built from agent-level certificate matrices.

    Deflated certificates lift onto the (N - 1)-agent disagreement coordinates.
    """
    if cert.deflated:
        eye = np.eye(n_agents - 1)
        return np.kron(eye, cert.Q), np.kron(eye, cert.Z1)
    mean = np.full((n_agents, n_agents), 1.0 / n_agents)
    q_lift = np.kron(np.eye(n_agents), cert.Q)
    z_lift = np.kron(mean, cert.Z2) + np.kron(np.eye(n_agents) - mean, cert.Z1)
    return q_lift, z_lift


def verify_certificate_lifting(
    mas: SwitchedMas, cert: LmiCertificate, cap: int = DEFAULT_ENUMERATION_CAP
) -> LiftingReport:
    """Evaluate the mode-enumerated conditions at the lifted certificate, per topology."""
    q_lift, z_lift = lift_certificate(cert, mas.n_agents)
    residuals = []
    for tm in topology_modes(mas, project=cert.deflated, cap=cap):
        t = tm.probabilities
        gramian = (_expected_congruence(t, tm.a, q_lift)
                   + np.einsum("m,mji,mjk->ik", t, tm.c, tm.c) - q_lift)
        trace = (_expected_congruence(t, tm.b, q_lift)
                 + np.einsum("m,mji,mjk->ik", t, tm.d, tm.d) - z_lift)
        residual = TopologyResidual(tm.topology, max_eigenvalue(gramian), max_eigenvalue(trace))
        if not residual.passed:
            logger.warning(
                f"Lifted certificate fails on topology {tm.topology}: "
                f"gramian {residual.gramian:.3e}, trace {residual.trace:.3e}"
            )
        residuals.append(residual)
    return LiftingReport(tuple(residuals), float(np.trace(z_lift)))


# --- REPORTING ---

def _format_matrix(m: np.ndarray) -> str:
    return "\n".join("    " + " ".join(f"{v: .10g}" for v in row) for row in np.atleast_2d(m))


def format_certificate(cert: LmiCertificate) -> str:
    out = io.StringIO()
    mode = "deflated (disagreement space)" if cert.deflated else "full"
    out.write(f"status: {cert.status}\n")
    out.write(f"mode: {mode}\n")
    out.write(f"N: {cert.n_agents}\n")
    out.write(f"p: {cert.p!r}\n")
    out.write(f"bounds: [{cert.lambda_lo!r}, {cert.lambda_hi!r}]\n")
    out.write(f"h2_bound: {cert.h2_bound:.10g}\n")
    out.write(f"gamma: {cert.gamma:.10g}\n")
    out.write(f"beta: {cert.beta:.10g}\n")
    out.write(f"epsilon: {cert.epsilon:.3e}\n")
    out.write(f"Q:\n{_format_matrix(cert.Q)}\n")
    out.write(f"Z1:\n{_format_matrix(cert.Z1)}\n")
    if cert.Z2 is not None:
        out.write(f"Z2:\n{_format_matrix(cert.Z2)}\n")
    out.write("residual max eigenvalues:\n")
    for label, value in cert.residuals.items():
        out.write(f"    {label}: {value:.6e}\n")
    return out.getvalue()
